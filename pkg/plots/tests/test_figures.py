import numpy as np
import pytest

from flowplots import FigureSpec, MissingInput, SchemaMismatch, render
from flowplots.figures import read_csv_with_schema, read_reference_curve


def write_convergence(path):
    path.write_text(
        "# schema: vorflow-convergence-v1\n"
        "resolution,h,err_v_l2,err_p_l2\n"
        "10,0.1,0.02,0.4\n"
        "20,0.05,0.01,0.21\n")
    return str(path)


def write_diag(path, extra_cols="", extra_vals=""):
    path.write_text(
        "# schema: vorflow-diagnostics-v1\n"
        f"time,dt,mass_phase0,mass_phase1,momentum_x,momentum_y,energy_total,"
        f"q_mesh,n_remaps{extra_cols}\n"
        f"0.1,0.1,1.0,2.0,0.0,0.0,3.0,0.8,0{extra_vals}\n"
        f"0.2,0.1,1.0,2.0,0.0,0.0,3.0,0.7,0{extra_vals}\n")
    return str(path)


def write_snapshot(path, fields=("density", "schlieren")):
    body = ["# vtk DataFile Version 3.0", "test", "ASCII", "DATASET POLYDATA",
            "POINTS 6 double",
            "0.0 0.0 0.0", "1.0 0.0 0.0", "1.0 1.0 0.0",
            "0.0 1.0 0.0", "2.0 0.0 0.0", "2.0 1.0 0.0",
            "POLYGONS 2 10",
            "4 0 1 2 3", "4 1 4 5 2",
            "CELL_DATA 2"]
    for k, f in enumerate(fields):
        body += [f"SCALARS {f} double 1", "LOOKUP_TABLE default",
                 f"{0.5 + k}", f"{1.5 + k}"]
    path.write_text("\n".join(body) + "\n")
    return str(path)


class TestParsers:
    def test_schema_enforced(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("time,dt\n0,1\n")
        with pytest.raises(SchemaMismatch):
            read_csv_with_schema(p, "vorflow-diagnostics-v1")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingInput):
            read_csv_with_schema(tmp_path / "nope.csv", "vorflow-diagnostics-v1")

    def test_header_only_is_missing_input(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("# schema: vorflow-diagnostics-v1\ntime,dt\n")
        with pytest.raises(MissingInput):
            read_csv_with_schema(p, "vorflow-diagnostics-v1")

    def test_reference_curve(self, tmp_path):
        p = tmp_path / "ref.csv"
        p.write_text("# digitized from somewhere\nT,X\n0.0,1.0\n1.0,2.0\n")
        ref = read_reference_curve(p)
        assert list(ref["X"]) == [1.0, 2.0]


class TestRender:
    def test_convergence_figure(self, tmp_path):
        out = render(FigureSpec("convergence", write_convergence(tmp_path / "c.csv"),
                                str(tmp_path / "fig.png")))
        assert (tmp_path / "fig.png").stat().st_size > 0

    def test_dambreak_overlay(self, tmp_path):
        diag = write_diag(tmp_path / "d.csv", ",T,X,H", ",0.3,1.2,0.99")
        ref = tmp_path / "ref.csv"
        ref.write_text("T,X\n0.0,1.0\n0.5,1.3\n")
        out = render(FigureSpec("dambreak", diag, str(tmp_path / "f.png"),
                                ref_path=str(ref)))
        assert (tmp_path / "f.png").stat().st_size > 0

    def test_bubble_figure(self, tmp_path):
        diag = write_diag(tmp_path / "d.csv", ",y_centroid,v_rise,bubble_volume",
                          ",0.5,0.1,0.19")
        render(FigureSpec("bubble", diag, str(tmp_path / "b.png")))
        assert (tmp_path / "b.png").stat().st_size > 0

    def test_field_and_schlieren(self, tmp_path):
        snap = write_snapshot(tmp_path / "s.vtk")
        render(FigureSpec("field", snap, str(tmp_path / "f1.png"), field="density"))
        render(FigureSpec("schlieren", snap, str(tmp_path / "f2.png")))
        assert (tmp_path / "f1.png").stat().st_size > 0
        assert (tmp_path / "f2.png").stat().st_size > 0

    def test_missing_field_is_schema_mismatch(self, tmp_path):
        snap = write_snapshot(tmp_path / "s.vtk", fields=("density",))
        with pytest.raises(SchemaMismatch):
            render(FigureSpec("schlieren", snap, str(tmp_path / "f.png")))

    def test_wrong_schema_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("# schema: something-else-v9\ntime\n0.0\n")
        with pytest.raises(SchemaMismatch):
            render(FigureSpec("bubble", str(bad), str(tmp_path / "f.png")))

    def test_empty_diagnostics_is_missing_input(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("# schema: vorflow-diagnostics-v1\ntime,dt\n")
        with pytest.raises(MissingInput):
            render(FigureSpec("bubble", str(empty), str(tmp_path / "f.png")))

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            FigureSpec("hologram", "x", "y")

    def test_rendering_is_deterministic(self, tmp_path):
        src = write_convergence(tmp_path / "c.csv")
        a = render(FigureSpec("convergence", src, str(tmp_path / "a.png")))
        b = render(FigureSpec("convergence", src, str(tmp_path / "b.png")))
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


class TestCli:
    def test_cli_round_trip(self, tmp_path):
        from flowplots.cli import main
        src = write_convergence(tmp_path / "c.csv")
        rc = main(["convergence", "--in", src, "--out", str(tmp_path / "f.png")])
        assert rc == 0

    def test_cli_error_codes(self, tmp_path, capsys):
        from flowplots.cli import main
        rc = main(["bubble", "--in", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "f.png")])
        assert rc == 2
        assert "missing input" in capsys.readouterr().err
