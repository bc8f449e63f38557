"""SVG plots of sweep and spectrum CSV files.

Plots are written with a fixed SVG hash salt and no date stamp so the same
CSV always produces the same bytes.
"""
import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigurationError, CsvParseError  # noqa: E402

PLOT_KINDS = {
    "ber_alpha": ("bandwidth compression factor alpha", True),
    "ber_rop": ("received optical power (dBm)", True),
    "ber_l": ("number of sub-bands L", True),
    "ber": ("swept value", True),
    "psd": ("frequency (GHz)", False),
}
BER_FLOOR_DEFAULT = 1e-6
_RC = {"svg.hashsalt": "nomftn", "svg.fonttype": "path", "font.size": 9}


def read_csv(path):
    """Header and numeric-or-text rows of a CSV file; raises :class:`CsvParseError`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CsvParseError(0, f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or not rows[0]:
        raise CsvParseError(1, "missing header row")
    header = [h.strip() for h in rows[0]]
    out = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        out.append(dict(zip(header, row)))
    if not out:
        raise CsvParseError(len(rows) + 1, "no data rows")
    return header, out


def _number(row, key, lineno):
    try:
        return float(row[key])
    except (KeyError, ValueError):
        raise CsvParseError(lineno, f"column {key!r} is not numeric: {row.get(key)!r}") from None


def _x_value(row, lineno):
    text = row.get("value", "")
    try:
        return float(text)
    except ValueError:
        # allocation keys such as "4B" sort after their digit
        digits = "".join(ch for ch in text if ch.isdigit())
        if not digits:
            raise CsvParseError(lineno, f"swept value {text!r} is not numeric") from None
        return float(digits) + 0.5


def ber_floor(values) -> float:
    """Axis minimum for a log BER plot: a decade below the smallest positive value."""
    pos = [v for v in values if v > 0]
    if not pos:
        return BER_FLOOR_DEFAULT
    return 10.0 ** math.floor(math.log10(min(pos)) - 1)


def _plot_ber(ax, header, rows, xlabel):
    xs = [_x_value(r, i) for i, r in enumerate(rows, 2)]
    series = [("overall", "ber")] + [(c.replace("ber_", ""), c) for c in header
                                     if c.startswith("ber_band")]
    all_vals = []
    data = []
    for label, col in series:
        pts = []
        for i, (x, r) in enumerate(zip(xs, rows), 2):
            if r.get(col, "") == "":
                continue
            pts.append((x, _number(r, col, i)))
        all_vals += [v for _, v in pts]
        data.append((label, pts))
    floor = ber_floor(all_vals)
    for label, pts in data:
        if not pts:
            continue
        style = {"lw": 2.0} if label == "overall" else {"lw": 1.0, "ls": "--"}
        line, = ax.plot([p[0] for p in pts], [max(p[1], floor) for p in pts], marker="o",
                        ms=4, label=label, **style)
        zeros = [p[0] for p in pts if p[1] <= 0]
        if zeros:
            ax.plot(zeros, [floor] * len(zeros), ls="none", marker="v", ms=8,
                    color=line.get_color(), mfc="none")
    ax.set_yscale("log")
    ax.set_ylim(bottom=floor)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("BER (zero counts drawn at the floor, open triangles)")
    ax.legend(fontsize=7)


def _plot_psd(ax, header, rows):
    if "frequency_hz" not in header or "power_db" not in header:
        raise CsvParseError(1, "spectrum CSV needs frequency_hz and power_db columns")
    f = [_number(r, "frequency_hz", i) / 1e9 for i, r in enumerate(rows, 2)]
    p = [_number(r, "power_db", i) for i, r in enumerate(rows, 2)]
    ax.plot(f, [max(v, -80.0) for v in p], lw=1.2)
    ax.axhline(-10.0, color="0.5", lw=0.8, ls=":")
    ax.set_xlabel(PLOT_KINDS["psd"][0])
    ax.set_ylabel("normalized PSD (dB)")


def emit_plot(csv_path, kind: str, out_path=None) -> Path:
    """Render ``csv_path`` as an SVG next to it (or at ``out_path``)."""
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"unknown plot kind {kind!r}; expected one of {sorted(PLOT_KINDS)}")
    csv_path = Path(csv_path)
    header, rows = read_csv(csv_path)
    out = Path(out_path) if out_path else csv_path.with_suffix(".svg")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        try:
            if kind == "psd":
                _plot_psd(ax, header, rows)
            else:
                _plot_ber(ax, header, rows, PLOT_KINDS[kind][0])
            ax.grid(True, which="both", lw=0.3)
            fig.tight_layout()
            fig.savefig(out, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return out
