"""Figure rendering from sweep CSVs.

A figure kind fixes the x-axis meaning: ``ser-vs-snr`` (SNR in dB),
``ser-vs-doppler`` (maximum Doppler shift in Hz), ``ser-vs-threshold``
(starting User 1 threshold normalized by the half minimum distance d1).
SER is always drawn on a logarithmic axis; zero-SER points (no errors
observed) cannot appear on a log axis and are dropped from their series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["CurveSpec", "PlotsError", "read_rows", "render", "render_all"]

EXPECTED_COLUMNS = ("sweep_axis", "sweep_value", "user", "detector", "ser")

KINDS = {
    "ser-vs-snr": "SNR (dB)",
    "ser-vs-doppler": "Maximum Doppler shift (Hz)",
    "ser-vs-threshold": r"$T_1^{(1)}/d_1$",
}

_AXIS_TO_KIND = {"snr": "ser-vs-snr", "doppler": "ser-vs-doppler",
                 "threshold": "ser-vs-threshold"}

_DETECTOR_LABELS = {"proposed": "proposed", "mmse-sic": "MMSE-SIC"}

# Fixed styling so reruns are byte-for-byte deterministic.
_STYLES = {
    (1, "proposed"): dict(color="C0", marker="o", linestyle="-"),
    (2, "proposed"): dict(color="C0", marker="s", linestyle="--"),
    (1, "mmse-sic"): dict(color="C3", marker="^", linestyle="-"),
    (2, "mmse-sic"): dict(color="C3", marker="v", linestyle="--"),
}


class PlotsError(Exception):
    """Raised for unusable input: missing columns, empty CSV, bad kind."""


@dataclass(frozen=True)
class CurveSpec:
    """One figure: input CSVs, figure kind, output image path."""

    csv_paths: tuple
    kind: str
    out_path: str

    def __post_init__(self):
        paths = self.csv_paths
        if isinstance(paths, (str, Path)):
            paths = (paths,)
        object.__setattr__(self, "csv_paths", tuple(str(p) for p in paths))
        if self.kind not in KINDS:
            raise PlotsError(
                f"unknown figure kind {self.kind!r}; expected one of "
                f"{sorted(KINDS)}")
        if not self.csv_paths:
            raise PlotsError("at least one CSV path is required")


@dataclass
class Row:
    sweep_value: float
    user: int
    detector: str
    ser: float
    extras: dict = field(default_factory=dict)


def read_rows(path) -> list:
    """Parse one results CSV; raises PlotsError on schema violations."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in EXPECTED_COLUMNS if c not in header]
        if missing:
            raise PlotsError(
                f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for rec in reader:
            try:
                rows.append(Row(sweep_value=float(rec["sweep_value"]),
                                user=int(rec["user"]),
                                detector=rec["detector"],
                                ser=float(rec["ser"])))
            except (TypeError, ValueError) as exc:
                raise PlotsError(f"{path}: malformed row {rec!r}") from exc
    if not rows:
        raise PlotsError(f"{path}: no data rows")
    return rows


def _series(rows):
    """Group rows into {(user, detector): (x values, ser values)}."""
    keys = sorted({(r.user, r.detector) for r in rows})
    out = {}
    for key in keys:
        pts = sorted((r.sweep_value, r.ser) for r in rows
                     if (r.user, r.detector) == key)
        out[key] = ([p[0] for p in pts], [p[1] for p in pts])
    return out


def render(spec: CurveSpec) -> str:
    """Draw the figure described by `spec` and return the written path."""
    rows = []
    for p in spec.csv_paths:
        rows.extend(read_rows(p))

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for (user, detector), (xs, sers) in _series(rows).items():
        label = f"User {user} — {_DETECTOR_LABELS.get(detector, detector)}"
        style = _STYLES.get((user, detector),
                            dict(marker="x", linestyle=":"))
        # A log axis cannot show SER = 0 (no errors observed); keep the
        # series but omit those points.
        pos = [(x, s) for x, s in zip(xs, sers) if s > 0]
        ax.semilogy([p[0] for p in pos], [p[1] for p in pos],
                    label=label, **style)
    ax.set_xlabel(KINDS[spec.kind])
    ax.set_ylabel("SER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)
    return str(out)


def infer_kind(path) -> str:
    """Figure kind from the CSV's own sweep_axis column."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "sweep_axis" not in reader.fieldnames:
            raise PlotsError(f"{path}: missing column(s) sweep_axis")
        first = next(reader, None)
    if first is None:
        raise PlotsError(f"{path}: no data rows")
    axis = first["sweep_axis"]
    if axis not in _AXIS_TO_KIND:
        raise PlotsError(f"{path}: unknown sweep axis {axis!r}")
    return _AXIS_TO_KIND[axis]


def render_all(results_dir, out_dir=None):
    """Render one figure per CSV found in `results_dir`.

    Returns (written image paths, [(skipped path, reason), ...]). Never
    fails on an individual bad file; output names are `<csv stem>.png`
    so reruns overwrite deterministically.
    """
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir is not None else results_dir
    written, skipped = [], []
    for csv_path in sorted(results_dir.glob("*.csv")):
        try:
            kind = infer_kind(csv_path)
            spec = CurveSpec((csv_path,), kind,
                             out_dir / (csv_path.stem + ".png"))
            written.append(render(spec))
        except PlotsError as exc:
            skipped.append((str(csv_path), str(exc)))
    return written, skipped
