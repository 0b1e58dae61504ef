"""Figure generation: overlays, error bars, exact data pass-through."""

import csv
import pathlib

import numpy as np
import pytest

from obsfig import FigureSpec, FigureSpecError, load_rows, plot_spectrum
from obsfig.cli import main

DATA = pathlib.Path(__file__).resolve().parent / "data"
EXAMPLE = str(DATA / "example_small.csv")
HENON = [str(DATA / f"henon_fig3_f{i}.csv") for i in (1, 4, 5)]
SINGLE_Q = str(DATA / "single_q.csv")


def csv_column(path, kind, column):
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["kind"] == kind]
    rows.sort(key=lambda r: int(r["q"]))
    return np.array([float(r[column]) for r in rows])


def errorbar_series(ax):
    """Data lines of ax.errorbar calls, keyed by the container label."""
    return {c.get_label(): c.lines[0] for c in ax.containers}


def test_theta_compare_fig2_style(tmp_path):
    out = tmp_path / "fig2.svg"
    fig = plot_spectrum(FigureSpec((EXAMPLE,), "theta_compare", str(out)))
    assert out.exists() and out.read_bytes().startswith(b"<?xml")
    ax = fig.axes[0]

    dashed = [ln for ln in ax.lines if ln.get_linestyle() == "--"]
    assert len(dashed) == 1, "analytic overlay must be drawn dashed"
    assert ax.containers, "error bars must be drawn"

    [est_line] = errorbar_series(ax).values()
    np.testing.assert_array_equal(est_line.get_xdata(),
                                  csv_column(EXAMPLE, "theta", "q"))
    np.testing.assert_array_equal(est_line.get_ydata(),
                                  csv_column(EXAMPLE, "theta", "mean"))
    np.testing.assert_array_equal(dashed[0].get_ydata(),
                                  csv_column(EXAMPLE, "theta_analytic", "mean"))
    # the error bar heights are exactly the std column
    bars = ax.containers[0].lines[2][0].get_segments()
    stds = csv_column(EXAMPLE, "theta", "std")
    means = csv_column(EXAMPLE, "theta", "mean")
    for seg, m, s in zip(bars, means, stds):
        assert seg[0][1] == m - s and seg[1][1] == m + s


def test_theta_spectrum_fig3b_style_multi_csv(tmp_path):
    out = tmp_path / "fig3b.svg"
    fig = plot_spectrum(FigureSpec(tuple(HENON), "theta_spectrum", str(out)))
    ax = fig.axes[0]
    lines = errorbar_series(ax)
    assert len(lines) == 3
    for path, name in zip(HENON, ("fig3_f1", "fig3_f4", "fig3_f5")):
        line = lines[f"henon: {name}"]
        np.testing.assert_array_equal(line.get_ydata(),
                                      csv_column(path, "theta", "mean"))
    assert not [ln for ln in ax.lines if ln.get_linestyle() == "--"]


def test_dq_spectrum_kind(tmp_path):
    out = tmp_path / "dq.svg"
    fig = plot_spectrum(FigureSpec((EXAMPLE,), "dq_spectrum", str(out)))
    ax = fig.axes[0]
    [est_line] = errorbar_series(ax).values()
    np.testing.assert_array_equal(est_line.get_ydata(),
                                  csv_column(EXAMPLE, "dq", "mean"))


def test_single_q_series_no_crash(tmp_path):
    out = tmp_path / "single.svg"
    fig = plot_spectrum(FigureSpec((SINGLE_Q,), "theta_spectrum", str(out)))
    [line] = errorbar_series(fig.axes[0]).values()
    assert line.get_xdata().size == 1
    assert fig.axes[0].containers
    assert out.exists()


def test_output_bytes_reproducible(tmp_path):
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    plot_spectrum(FigureSpec((EXAMPLE,), "theta_compare", str(a)))
    plot_spectrum(FigureSpec((EXAMPLE,), "theta_compare", str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_empty_csv_rejected(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("kind,system,observable,q,run_count,mean,std,"
                     "n_total,block_size,quantile,K,seed\n")
    with pytest.raises(FigureSpecError, match="no data rows"):
        plot_spectrum(FigureSpec((str(empty),), "theta_spectrum", str(tmp_path / "x.svg")))


def test_missing_columns_listed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("kind,q,mean\ntheta,2,0.5\n")
    with pytest.raises(FigureSpecError) as err:
        load_rows(str(bad))
    for col in ("system", "observable", "std"):
        assert col in str(err.value)


def test_overlay_q_misalignment_rejected(tmp_path):
    overlay = tmp_path / "overlay.csv"
    rows = load_rows(EXAMPLE)
    with open(overlay, "w") as fh:
        fh.write("kind,system,observable,q,run_count,mean,std,"
                 "n_total,block_size,quantile,K,seed\n")
        fh.write("theta_analytic,doubling,example_f,7,1,0.9,0.0,0,0,0.9,5,0\n")
    assert rows
    with pytest.raises(FigureSpecError, match="q values"):
        plot_spectrum(FigureSpec((EXAMPLE,), "theta_compare",
                                 str(tmp_path / "x.svg"),
                                 overlay_path=str(overlay)))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(FigureSpecError, match="kind"):
        FigureSpec((EXAMPLE,), "pie_chart", str(tmp_path / "x.svg"))


def test_no_estimate_rows_rejected(tmp_path):
    # a CSV with only analytic rows cannot feed an estimate figure
    only = tmp_path / "analytic_only.csv"
    with open(only, "w") as fh:
        fh.write("kind,system,observable,q,run_count,mean,std,"
                 "n_total,block_size,quantile,K,seed\n")
        fh.write("theta_analytic,doubling,example_f,2,1,0.7,0.0,0,0,0.9,5,0\n")
    with pytest.raises(FigureSpecError, match="no rows of kind"):
        plot_spectrum(FigureSpec((str(only),), "theta_spectrum", str(tmp_path / "y.svg")))


def test_cli_entry_point(tmp_path, capsys):
    out = tmp_path / "cli.svg"
    code = main(["--csv", EXAMPLE, "--kind", "theta_compare",
                 "--out", str(out), "--title", "worked example"])
    assert code == 0
    assert out.exists()
    assert main(["--csv", str(tmp_path / "nope.csv"), "--kind", "theta_compare",
                 "--out", str(tmp_path / "z.svg")]) == 1
