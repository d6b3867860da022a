"""Figure structure and CLI behavior on synthetic datasets."""

import matplotlib.pyplot as plt
import pytest

from errfig import FigureSpec, render, spec_for
from errfig.cli import main

HEADER = "schema_version,experiment,n,mode,trial,rel_error,A,B,seed"


def write_csv(path, body):
    path.write_text(HEADER + "\n" + body)
    return str(path)


def small_csv(tmp_path, name="rows.csv"):
    body = "".join(
        f"1,seq,{n},{mode},{j},{err},{2 * err},{4 * err},7\n"
        for n in (100, 1000, 10000)
        for j, (mode, err) in enumerate((("rtn", 1e-4), ("sr", 3e-4)))
    )
    return write_csv(tmp_path / name, body)


def artists(fig):
    ax = fig.axes[0]
    markers = [l for l in ax.lines if l.get_linestyle() == "None"]
    curves = [l for l in ax.lines if l.get_linestyle() == "-"]
    refs = [l for l in ax.lines if l.get_linestyle() == "--"]
    return markers, curves, refs


class TestRender:
    def test_one_marker_per_row_one_curve_per_bound(self, tmp_path):
        path = small_csv(tmp_path)
        spec = FigureSpec((path,), str(tmp_path / "f.png"), bounds=("A", "B"), u_line=1e-3)
        fig = render(spec)
        markers, curves, refs = artists(fig)
        assert sum(len(l.get_xdata()) for l in markers) == 6
        assert [l.get_label() for l in curves] == ["A", "B"]
        assert len(refs) == 1 and refs[0].get_ydata()[0] == 1e-3
        plt.close(fig)

    def test_marker_style_by_mode(self, tmp_path):
        fig = render(FigureSpec((small_csv(tmp_path),), str(tmp_path / "f.png")))
        markers, _, _ = artists(fig)
        styles = {l.get_label(): l.get_marker() for l in markers}
        assert styles == {"seq (rtn)": "+", "seq (sr)": "x"}
        plt.close(fig)

    def test_log_log_axes(self, tmp_path):
        fig = render(FigureSpec((small_csv(tmp_path),), str(tmp_path / "f.png")))
        ax = fig.axes[0]
        assert ax.get_xscale() == "log" and ax.get_yscale() == "log"
        plt.close(fig)

    def test_curves_are_per_n_medians(self, tmp_path):
        path = write_csv(
            tmp_path / "rows.csv",
            "1,seq,100,sr,0,1e-4,1.0,,7\n"
            "1,seq,100,sr,1,1e-4,3.0,,7\n"
            "1,seq,100,sr,2,1e-4,9.0,,7\n",
        )
        fig = render(FigureSpec((path,), str(tmp_path / "f.png"), bounds=("A",)))
        _, curves, _ = artists(fig)
        assert list(curves[0].get_ydata()) == [3.0]
        plt.close(fig)

    def test_multi_experiment_curves_split_and_label(self, tmp_path):
        path = write_csv(
            tmp_path / "rows.csv",
            "1,seq,100,sr,0,1e-4,1.0,2.0,7\n1,pairwise,100,sr,0,1e-4,5.0,6.0,7\n",
        )
        fig = render(FigureSpec((path,), str(tmp_path / "f.png"), bounds=("A",)))
        _, curves, _ = artists(fig)
        assert [l.get_label() for l in curves] == ["A (pairwise)", "A (seq)"]
        plt.close(fig)

    def test_rerender_is_structurally_identical(self, tmp_path):
        spec = FigureSpec(
            (small_csv(tmp_path),), str(tmp_path / "f.png"), bounds=("A",), u_line=1e-3
        )

        def structure(fig):
            markers, curves, refs = artists(fig)
            return (
                [(l.get_label(), list(l.get_xdata()), list(l.get_ydata())) for l in markers],
                [(l.get_label(), list(l.get_xdata()), list(l.get_ydata())) for l in curves],
                len(refs),
            )

        one, two = render(spec), render(spec)
        assert structure(one) == structure(two)
        plt.close(one)
        plt.close(two)

    def test_merges_multiple_files(self, tmp_path):
        a = small_csv(tmp_path, "a.csv")
        b = small_csv(tmp_path, "b.csv")
        fig = render(FigureSpec((a, b), str(tmp_path / "f.png")))
        markers, _, _ = artists(fig)
        assert sum(len(l.get_xdata()) for l in markers) == 12
        plt.close(fig)

    def test_missing_bound_id_raises(self, tmp_path):
        spec = FigureSpec((small_csv(tmp_path),), str(tmp_path / "f.png"), bounds=("Z",))
        with pytest.raises(ValueError, match="not in the CSV header"):
            render(spec)

    def test_bound_without_values_raises(self, tmp_path):
        path = write_csv(tmp_path / "rows.csv", "1,seq,100,sr,0,1e-4,,2.0,7\n")
        spec = FigureSpec((path,), str(tmp_path / "f.png"), bounds=("A",))
        with pytest.raises(ValueError, match="no recorded values"):
            render(spec)

    def test_spec_validation(self, tmp_path):
        with pytest.raises(ValueError, match="at least one"):
            FigureSpec((), "f.png")
        with pytest.raises(ValueError, match="positive"):
            FigureSpec(("a.csv",), "f.png", u_line=0.0)
        with pytest.raises(ValueError, match="unknown figure id"):
            spec_for("spectral", ("a.csv",), "f.png")


class TestCli:
    def test_renders_png(self, tmp_path):
        out = tmp_path / "fig.png"
        code = main(
            ["--csv", small_csv(tmp_path), "--figure", "tree",
             "--bounds", "A,B", "--u-line", "1e-3", "--out", str(out)]
        )
        assert code == 0
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_empty_csv_yields_empty_axes_image(self, tmp_path):
        path = write_csv(tmp_path / "empty.csv", "")
        out = tmp_path / "fig.png"
        code = main(["--csv", path, "--figure", "tree", "--bounds", "A,B", "--out", str(out)])
        assert code == 0
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_schema_mismatch_exits_nonzero(self, tmp_path, capsys):
        path = write_csv(tmp_path / "v2.csv", "2,seq,100,rtn,0,0.5,1.0,2.0,7\n")
        code = main(["--csv", path, "--figure", "tree", "--out", str(tmp_path / "f.png")])
        assert code == 1
        assert "unsupported schema version" in capsys.readouterr().err

    def test_unreadable_file_exits_nonzero(self, tmp_path, capsys):
        code = main(
            ["--csv", str(tmp_path / "absent.csv"), "--figure", "tree",
             "--out", str(tmp_path / "f.png")]
        )
        assert code == 1
        assert "render: error" in capsys.readouterr().err

    def test_missing_bounds_exit_nonzero(self, tmp_path, capsys):
        code = main(
            ["--csv", small_csv(tmp_path), "--figure", "tree",
             "--out", str(tmp_path / "f.png")]
        )
        assert code == 1  # preset bounds absent from this synthetic header
        assert "not in the CSV header" in capsys.readouterr().err

    def test_axis_range_flags(self, tmp_path):
        out = tmp_path / "fig.png"
        code = main(
            ["--csv", small_csv(tmp_path), "--figure", "tree", "--bounds", "A",
             "--xlim", "10,1e5", "--ylim", "1e-6,1", "--out", str(out)]
        )
        assert code == 0

    def test_u_line_zero_hides_the_reference(self, tmp_path):
        spec_args = ["--csv", small_csv(tmp_path), "--figure", "tree", "--bounds", "A",
                     "--u-line", "0", "--out", str(tmp_path / "f.png")]
        assert main(spec_args) == 0
