"""plots <kind> --in FILE [--ref FILE] --out IMAGE [--field NAME]"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, MissingInput, SchemaMismatch, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="plots",
                                 description="figures from vorflow run outputs")
    ap.add_argument("kind", choices=FIGURE_KINDS)
    ap.add_argument("--in", dest="input_path", required=True,
                    help="diagnostics/convergence CSV or snapshot VTK")
    ap.add_argument("--ref", dest="ref_path", default=None,
                    help="optional digitized reference curve CSV")
    ap.add_argument("--out", dest="output_path", required=True)
    ap.add_argument("--field", default="density",
                    help="cell field for 'field' figures")
    ap.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)

    spec = FigureSpec(kind=args.kind, input_path=args.input_path,
                      output_path=args.output_path, ref_path=args.ref_path,
                      field=args.field, options={"dpi": args.dpi})
    try:
        out = render(spec)
    except MissingInput as ex:
        print(f"missing input: {ex}", file=sys.stderr)
        return 2
    except SchemaMismatch as ex:
        print(f"schema mismatch: {ex}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
