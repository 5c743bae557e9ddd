"""Numba kernels for bounded Voronoi construction by half-plane clipping.

Each cell starts from the domain polygon and is clipped by the bisector of
every nearby seed, gathered from a uniform background grid in expanding
rings until the security-radius criterion holds (no unseen seed can cut the
polygon).  Labels on polygon edges track which bisector (candidate index)
or which domain edge produced them, so facet geometry falls out of a single
walk around the final polygon.
"""

import numpy as np
from numba import njit

MAXV = 64          # max polygon vertices during clipping
STATUS_OK = 0
STATUS_DUP = 1
STATUS_OVERFLOW = 2
STATUS_DEGENERATE = 3


@njit(cache=True)
def build_grid(xs, ys, gx0, gy0, gbin, gnx, gny):
    """Linked-list bucket grid over point set."""
    n = xs.shape[0]
    head = np.full(gnx * gny, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        bi = int((xs[k] - gx0) / gbin)
        bj = int((ys[k] - gy0) / gbin)
        if bi < 0:
            bi = 0
        elif bi >= gnx:
            bi = gnx - 1
        if bj < 0:
            bj = 0
        elif bj >= gny:
            bj = gny - 1
        b = bi * gny + bj
        nxt[k] = head[b]
        head[b] = k
    return head, nxt


@njit(cache=True)
def build_cells(xs, ys, n_real,
                init_px, init_py, init_lab,
                head, nxt, gx0, gy0, gbin, gnx, gny,
                min_sep2, eps_len,
                maxf,
                out_nv, out_vx, out_vy,
                out_nf, out_flab, out_flen, out_fmx, out_fmy,
                out_vol, out_diam, out_status, out_dup):
    m0 = init_px.shape[0]
    px = np.empty(MAXV)
    py = np.empty(MAXV)
    lab = np.empty(MAXV, dtype=np.int64)
    tpx = np.empty(MAXV)
    tpy = np.empty(MAXV)
    tlab = np.empty(MAXV, dtype=np.int64)
    sval = np.empty(MAXV)
    CBUF = 4096
    cidx = np.empty(CBUF, dtype=np.int64)
    cd2 = np.empty(CBUF)
    max_ring = gnx + gny + 2

    for i in range(n_real):
        xi = xs[i]
        yi = ys[i]
        nv = m0
        for k in range(m0):
            px[k] = init_px[k]
            py[k] = init_py[k]
            lab[k] = init_lab[k]
        dmax2 = 0.0
        for k in range(nv):
            d2 = (px[k] - xi) ** 2 + (py[k] - yi) ** 2
            if d2 > dmax2:
                dmax2 = d2
        status = STATUS_OK

        bi = int((xi - gx0) / gbin)
        bj = int((yi - gy0) / gbin)
        if bi < 0:
            bi = 0
        elif bi >= gnx:
            bi = gnx - 1
        if bj < 0:
            bj = 0
        elif bj >= gny:
            bj = gny - 1

        ring = 0
        while ring <= max_ring:
            # gather candidates in ring bins (Chebyshev distance == ring)
            nc = 0
            lo_i = bi - ring
            hi_i = bi + ring
            lo_j = bj - ring
            hi_j = bj + ring
            for ci in range(lo_i, hi_i + 1):
                if ci < 0 or ci >= gnx:
                    continue
                for cj in range(lo_j, hi_j + 1):
                    if cj < 0 or cj >= gny:
                        continue
                    if ring > 0 and (ci != lo_i and ci != hi_i and cj != lo_j and cj != hi_j):
                        continue  # interior of the square, already visited
                    p = head[ci * gny + cj]
                    while p >= 0:
                        if p != i:
                            d2 = (xs[p] - xi) ** 2 + (ys[p] - yi) ** 2
                            if nc < CBUF:
                                cidx[nc] = p
                                cd2[nc] = d2
                                nc += 1
                            # buffer overflow: process unsorted, extremely rare
                            else:
                                cidx[0] = p
                                cd2[0] = d2
                                nc = 1
                        p = nxt[p]
            # insertion sort by (distance, index) for determinism + early shrink
            for a in range(1, nc):
                kd = cd2[a]
                ki = cidx[a]
                b = a - 1
                while b >= 0 and (cd2[b] > kd or (cd2[b] == kd and cidx[b] > ki)):
                    cd2[b + 1] = cd2[b]
                    cidx[b + 1] = cidx[b]
                    b -= 1
                cd2[b + 1] = kd
                cidx[b + 1] = ki

            for a in range(nc):
                d2 = cd2[a]
                if d2 < min_sep2:
                    status = STATUS_DUP
                    out_dup[i] = cidx[a]
                    break
                if d2 >= 4.0 * dmax2:
                    break  # sorted: no remaining candidate can cut
                c = cidx[a]
                cx = xs[c]
                cy = ys[c]
                mx = 0.5 * (xi + cx)
                my = 0.5 * (yi + cy)
                dxv = cx - xi
                dyv = cy - yi
                any_pos = False
                for k in range(nv):
                    s = (px[k] - mx) * dxv + (py[k] - my) * dyv
                    sval[k] = s
                    if s > 0.0:
                        any_pos = True
                if not any_pos:
                    continue
                m = 0
                ok = True
                for k in range(nv):
                    k2 = k + 1
                    if k2 == nv:
                        k2 = 0
                    sa = sval[k]
                    sb = sval[k2]
                    if sa <= 0.0:
                        if m >= MAXV:
                            ok = False
                            break
                        tpx[m] = px[k]
                        tpy[m] = py[k]
                        tlab[m] = lab[k]
                        m += 1
                    if (sa < 0.0 and sb > 0.0) or (sa > 0.0 and sb < 0.0):
                        if m >= MAXV:
                            ok = False
                            break
                        t = sa / (sa - sb)
                        tpx[m] = px[k] + t * (px[k2] - px[k])
                        tpy[m] = py[k] + t * (py[k2] - py[k])
                        tlab[m] = c if sa < 0.0 else lab[k]
                        m += 1
                if not ok:
                    status = STATUS_OVERFLOW
                    break
                if m < 3:
                    status = STATUS_DEGENERATE
                    break
                nv = m
                dmax2 = 0.0
                for k in range(nv):
                    px[k] = tpx[k]
                    py[k] = tpy[k]
                    lab[k] = tlab[k]
                    d2v = (px[k] - xi) ** 2 + (py[k] - yi) ** 2
                    if d2v > dmax2:
                        dmax2 = d2v
            if status != STATUS_OK:
                break
            # security radius: rings 0..ring guarantee coverage of (ring-1)*gbin
            covered = (ring - 1) * gbin
            if covered > 0.0 and 4.0 * dmax2 <= covered * covered:
                break
            ring += 1

        if status != STATUS_OK:
            out_status[i] = status
            continue

        # drop zero-length edges (vertex k+1 merged into k, keep later label)
        changed = True
        while changed and nv > 3:
            changed = False
            for k in range(nv):
                k2 = k + 1
                if k2 == nv:
                    k2 = 0
                dx = px[k2] - px[k]
                dy = py[k2] - py[k]
                if dx * dx + dy * dy < eps_len * eps_len:
                    lab[k] = lab[k2]
                    for b in range(k2, nv - 1):
                        px[b] = px[b + 1]
                        py[b] = py[b + 1]
                        lab[b] = lab[b + 1]
                    nv -= 1
                    changed = True
                    break

        # area (shoelace) and diameter
        area2 = 0.0
        for k in range(nv):
            k2 = k + 1
            if k2 == nv:
                k2 = 0
            area2 += px[k] * py[k2] - px[k2] * py[k]
        vol = 0.5 * area2
        if vol <= 0.0:
            out_status[i] = STATUS_DEGENERATE
            continue
        diam2 = 0.0
        for k in range(nv):
            for b in range(k + 1, nv):
                d2v = (px[k] - px[b]) ** 2 + (py[k] - py[b]) ** 2
                if d2v > diam2:
                    diam2 = d2v

        # facets: merge edges by label
        nf = 0
        ok = True
        for k in range(nv):
            k2 = k + 1
            if k2 == nv:
                k2 = 0
            ex = px[k2] - px[k]
            ey = py[k2] - py[k]
            elen = np.sqrt(ex * ex + ey * ey)
            if elen <= 0.0:
                continue
            l = lab[k]
            fx = 0.5 * (px[k] + px[k2]) * elen
            fy = 0.5 * (py[k] + py[k2]) * elen
            found = -1
            for b in range(nf):
                if out_flab[i, b] == l:
                    found = b
                    break
            if found >= 0:
                out_flen[i, found] += elen
                out_fmx[i, found] += fx
                out_fmy[i, found] += fy
            else:
                if nf >= maxf:
                    ok = False
                    break
                out_flab[i, nf] = l
                out_flen[i, nf] = elen
                out_fmx[i, nf] = fx
                out_fmy[i, nf] = fy
                nf += 1
        if not ok:
            out_status[i] = STATUS_OVERFLOW
            continue

        # normalize midpoints, drop slivers
        keep = 0
        for b in range(nf):
            if out_flen[i, b] >= eps_len:
                out_flab[i, keep] = out_flab[i, b]
                out_flen[i, keep] = out_flen[i, b]
                out_fmx[i, keep] = out_fmx[i, b] / out_flen[i, b]
                out_fmy[i, keep] = out_fmy[i, b] / out_flen[i, b]
                keep += 1
        out_nf[i] = keep
        out_nv[i] = nv
        for k in range(nv):
            out_vx[i, k] = px[k]
            out_vy[i, k] = py[k]
        out_vol[i] = vol
        out_diam[i] = np.sqrt(diam2)
        out_status[i] = STATUS_OK
