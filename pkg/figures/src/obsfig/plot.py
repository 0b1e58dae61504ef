"""Spectrum charts: estimate means with error bars, dashed analytic overlays.

The input is the result CSV written by the simulation CLI, with header
kind,system,observable,q,run_count,mean,std,n_total,block_size,quantile,K,seed.
Figure kinds map onto the estimate kinds: ``dq_spectrum`` plots ``dq``
rows against a ``dq_analytic`` overlay, ``theta_compare`` plots ``theta``
rows against ``theta_analytic``, ``theta_spectrum`` plots ``theta`` rows
from one or more CSVs with no overlay.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

REQUIRED_COLUMNS = ("kind", "system", "observable", "q", "run_count",
                    "mean", "std")

KINDS = {
    "dq_spectrum": {"estimate": "dq", "overlay": "dq_analytic",
                    "ylabel": "image-measure dimension"},
    "theta_spectrum": {"estimate": "theta", "overlay": "theta_analytic",
                       "ylabel": "extremal index"},
    "theta_compare": {"estimate": "theta", "overlay": "theta_analytic",
                      "ylabel": "extremal index"},
}

# fixed rendering settings so the same CSV always yields the same bytes
_RC = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "svg.hashsalt": "obsfig",
    "svg.fonttype": "path",
    "path.simplify": False,
}


class FigureSpecError(ValueError):
    """The spec or its CSV inputs cannot produce the requested figure."""


@dataclass(frozen=True)
class FigureSpec:
    csv_paths: tuple[str, ...]
    kind: str
    out_path: str
    overlay_path: str | None = None
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "csv_paths",
                           (self.csv_paths,) if isinstance(self.csv_paths, str)
                           else tuple(self.csv_paths))
        if self.kind not in KINDS:
            raise FigureSpecError(
                f"unknown figure kind {self.kind!r}; expected one of {sorted(KINDS)}")
        if not self.csv_paths:
            raise FigureSpecError("no input CSVs given")


def load_rows(path) -> list[dict]:
    """Read one result CSV; floats stay exactly as parsed."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise FigureSpecError(f"{path}: missing columns {missing}")
        rows = []
        for raw in reader:
            rows.append({**raw,
                         "q": int(raw["q"]),
                         "run_count": int(raw["run_count"]),
                         "mean": float(raw["mean"]),
                         "std": float(raw["std"])})
    if not rows:
        raise FigureSpecError(f"{path}: no data rows")
    return rows


def _series(rows, kind: str) -> dict[tuple[str, str], tuple[np.ndarray, ...]]:
    """Group rows of one kind into (system, observable) series sorted by q."""
    grouped: dict[tuple[str, str], list] = {}
    for row in rows:
        if row["kind"] == kind:
            grouped.setdefault((row["system"], row["observable"]), []).append(row)
    out = {}
    for key, entries in grouped.items():
        entries.sort(key=lambda r: r["q"])
        out[key] = (np.array([r["q"] for r in entries]),
                    np.array([r["mean"] for r in entries]),
                    np.array([r["std"] for r in entries]))
    return out


def plot_spectrum(spec: FigureSpec):
    """Render the figure and write it as SVG; returns the matplotlib figure.

    Estimate series get markers with +-1 std error bars; analytic overlays
    are drawn as dashed lines.  Data arrays are passed to matplotlib
    unmodified, so tests can read them back and compare with the CSV.
    """
    estimate_kind = KINDS[spec.kind]["estimate"]
    overlay_kind = KINDS[spec.kind]["overlay"]

    series: dict = {}
    overlay: dict = {}
    for path in spec.csv_paths:
        rows = load_rows(path)
        series.update(_series(rows, estimate_kind))
        if spec.overlay_path is None:
            overlay.update(_series(rows, overlay_kind))
    if spec.overlay_path is not None:
        overlay = _series(load_rows(spec.overlay_path), overlay_kind)
    if not series:
        raise FigureSpecError(
            f"no rows of kind {estimate_kind!r} in {list(spec.csv_paths)}")

    estimate_qs = sorted({int(q) for qs, _, _ in series.values() for q in qs})
    for key, (qs, _, _) in overlay.items():
        if sorted(int(q) for q in qs) != estimate_qs:
            raise FigureSpecError(
                f"overlay series {key} has q values {sorted(int(q) for q in qs)}, "
                f"estimates have {estimate_qs}")

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for (system, observable), (qs, means, stds) in sorted(series.items()):
            label = spec.labels.get(observable, f"{system}: {observable}")
            ax.errorbar(qs, means, yerr=stds, marker="o", linestyle="-",
                        capsize=3, label=label)
        for (system, observable), (qs, means, _) in sorted(overlay.items()):
            label = spec.labels.get(f"analytic:{observable}",
                                    f"{system}: {observable} (analytic)")
            ax.plot(qs, means, linestyle="--", color="black", label=label)
        ax.set_xlabel("q")
        ax.set_ylabel(KINDS[spec.kind]["ylabel"])
        if "title" in spec.labels:
            ax.set_title(spec.labels["title"])
        ax.legend(loc="best")
        fig.savefig(spec.out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return fig
