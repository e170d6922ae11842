"""Diagnostic tables (npd percentile bands, observed proportions) and their
CSV + SVG renderings.

CSV files store floats with ``repr`` so reading them back is exact.  SVG
output is written from fixed templates (see ``SVG_TEMPLATE_VERSION``); no
plotting library is involved, which keeps the files byte-stable.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng
from .npd import NpdVector
from .simulate import Dataset
from .stattests import KsResult, NullDistribution, StratumPlan

SVG_TEMPLATE_VERSION = "1"
PERCENTILES = (5.0, 50.0, 95.0)


@dataclass(frozen=True)
class BandRow:
    stratum: tuple
    time: float
    n: int
    observed: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]


@dataclass(frozen=True)
class PercentileBandTable:
    """Observed npd percentiles per cell with simulated prediction intervals."""

    variables: tuple[str, ...]
    percentiles: tuple[float, ...]
    level: float
    rows: tuple[BandRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def inside(self) -> np.ndarray:
        """Boolean array (rows x percentiles): observed within its band."""
        if not self.rows:
            return np.zeros((0, len(self.percentiles)), dtype=bool)
        obs = np.array([r.observed for r in self.rows])
        lo = np.array([r.lower for r in self.rows])
        hi = np.array([r.upper for r in self.rows])
        return (obs >= lo) & (obs <= hi)


@dataclass(frozen=True)
class ProportionRow:
    stratum: tuple
    time: float
    n: int
    fractions: tuple[float, ...]


@dataclass(frozen=True)
class ProportionTable:
    variables: tuple[str, ...]
    categories: tuple
    rows: tuple[ProportionRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True, eq=False)
class NullView:
    """A null distribution with the observed statistic, for the histogram."""

    null: NullDistribution
    observed: KsResult
    label: str = "KS statistic"


def percentile_bands(npd: NpdVector, strata: StratumPlan, n_band_sims: int = 1000,
                     master_seed: int = 0, percentiles: Sequence[float] = PERCENTILES,
                     level: float = 0.95) -> PercentileBandTable:
    """Compare npd percentiles in each cell with those of N(0,1) samples.

    For a cell of ``m`` npd, ``n_band_sims`` samples of ``m`` standard
    normal values give the distribution of each percentile; its central
    ``level`` interval is the band.
    """
    if n_band_sims < 500:
        raise ValueError(f"n_band_sims={n_band_sims}; bands need at least 500 simulations")
    if strata.obs_stratum.size != len(npd):
        raise ValueError("stratum plan and npd vector describe different observations")
    pct = tuple(float(p) for p in percentiles)
    tail = 100.0 * (1.0 - level) / 2.0
    rows = []
    for j, (cell, m) in enumerate(zip(strata.cells, strata.members())):
        if m.size == 0:
            warnings.warn(f"empty cell {cell} skipped", stacklevel=2)
            continue
        g = rng.substream(master_seed, rng.BANDS, j)
        sims = np.percentile(g.standard_normal((n_band_sims, m.size)), pct, axis=1)
        lo, hi = np.percentile(sims, [tail, 100.0 - tail], axis=1)
        obs = np.percentile(npd.npd[m], pct)
        t, combo = cell
        rows.append(BandRow(tuple(combo), float(t), int(m.size), tuple(map(float, obs)),
                            tuple(map(float, lo)), tuple(map(float, hi))))
    return PercentileBandTable(strata.variables, pct, float(level), tuple(rows))


def observed_proportions(data: Dataset, strata: StratumPlan) -> ProportionTable:
    K = data.categories.K
    rows = []
    for cell, m in zip(strata.cells, strata.members()):
        counts = np.bincount(data.y[m], minlength=K)
        t, combo = cell
        rows.append(ProportionRow(tuple(combo), float(t), int(m.size),
                                  tuple(float(c) / m.size for c in counts)))
    return ProportionTable(strata.variables, tuple(data.categories.labels), tuple(rows))


# ------------------------------------------------------------------ CSV


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows, preamble: Sequence[str] = ()):
    buf = io.StringIO()
    for line in preamble:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _pct_name(p: float) -> str:
    return f"p{p:g}".replace(".", "_")


def band_csv_header(table: PercentileBandTable) -> list[str]:
    head = [f"stratum_{v}" for v in table.variables] + ["time", "n"]
    for p in table.percentiles:
        name = _pct_name(p)
        head += [f"{name}_obs", f"{name}_lo", f"{name}_hi"]
    return head


def write_band_csv(table: PercentileBandTable, path) -> Path:
    path = Path(path)
    rows = []
    for r in table.rows:
        row = list(r.stratum) + [r.time, r.n]
        for o, lo, hi in zip(r.observed, r.lower, r.upper):
            row += [o, lo, hi]
        rows.append(row)
    meta = [f"level={table.level!r}",
            f"percentiles={','.join(repr(p) for p in table.percentiles)}"]
    _write_csv(path, band_csv_header(table), rows, meta)
    return path


def read_band_csv(path) -> PercentileBandTable:
    lines = Path(path).read_text().splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        k, _, v = lines.pop(0)[1:].strip().partition("=")
        meta[k] = v
    reader = csv.reader(lines)
    header = next(reader)
    variables = tuple(h[len("stratum_"):] for h in header if h.startswith("stratum_"))
    pct = tuple(float(p) for p in meta["percentiles"].split(","))
    nv = len(variables)
    rows = []
    for rec in reader:
        stratum = tuple(float(x) for x in rec[:nv])
        t, n = float(rec[nv]), int(rec[nv + 1])
        vals = [float(x) for x in rec[nv + 2:]]
        rows.append(BandRow(stratum, t, n, tuple(vals[0::3]), tuple(vals[1::3]), tuple(vals[2::3])))
    return PercentileBandTable(variables, pct, float(meta["level"]), tuple(rows))


def write_proportion_csv(table: ProportionTable, path) -> Path:
    path = Path(path)
    head = [f"stratum_{v}" for v in table.variables] + ["time", "n"] + \
        [f"frac_{c}" for c in table.categories]
    rows = [list(r.stratum) + [r.time, r.n] + list(r.fractions) for r in table.rows]
    _write_csv(path, head, rows)
    return path


def read_proportion_csv(path) -> ProportionTable:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        variables = tuple(h[len("stratum_"):] for h in header if h.startswith("stratum_"))
        cats = tuple(_label(h[len("frac_"):]) for h in header if h.startswith("frac_"))
        nv = len(variables)
        rows = [ProportionRow(tuple(float(x) for x in rec[:nv]), float(rec[nv]), int(rec[nv + 1]),
                              tuple(float(x) for x in rec[nv + 2:])) for rec in reader]
    return ProportionTable(variables, cats, tuple(rows))


def _label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def write_null_csv(view: NullView, path) -> Path:
    path = Path(path)
    rows = [("threshold", view.null.threshold), ("observed", view.observed.D)]
    rows += [("null", v) for v in view.null.statistics]
    _write_csv(path, ("kind", "value"), rows)
    return path


def read_null_csv(path) -> tuple[np.ndarray, float, float]:
    """``(sorted null statistics, threshold, observed)``."""
    null, thr, obs = [], math.nan, math.nan
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["kind"] == "null":
                null.append(float(rec["value"]))
            elif rec["kind"] == "threshold":
                thr = float(rec["value"])
            else:
                obs = float(rec["value"])
    return np.asarray(null), thr, obs


# ------------------------------------------------------------------ SVG

_W, _H = 360, 260
_M = dict(left=48, right=12, top=28, bottom=36)
_BAND_FILL = {50.0: "#f4b6c2"}
_BAND_DEFAULT_FILL = "#b6d0f4"


def _svg_doc(panels: list[str], width: int, height: int, title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
            f'<!-- npdcat svg template v{SVG_TEMPLATE_VERSION} -->\n'
            f'<title>{_esc(title)}</title>\n<rect width="100%" height="100%" fill="white"/>\n')
    return head + "".join(panels) + "</svg>\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Axes:
    def __init__(self, x0, y0, xlim, ylim):
        self.x0, self.y0 = x0, y0
        self.xlim, self.ylim = xlim, ylim
        self.pw = _W - _M["left"] - _M["right"]
        self.ph = _H - _M["top"] - _M["bottom"]

    def x(self, v):
        a, b = self.xlim
        return self.x0 + _M["left"] + (v - a) / ((b - a) or 1.0) * self.pw

    def y(self, v):
        a, b = self.ylim
        return self.y0 + _M["top"] + (1 - (v - a) / ((b - a) or 1.0)) * self.ph

    def frame(self, title, xlabel, ylabel) -> str:
        x1, y1 = self.x0 + _M["left"], self.y0 + _M["top"]
        out = [f'<g class="panel"><text x="{x1 + self.pw / 2:.2f}" y="{self.y0 + 16:.2f}" '
               f'text-anchor="middle">{_esc(title)}</text>',
               f'<rect x="{x1:.2f}" y="{y1:.2f}" width="{self.pw:.2f}" height="{self.ph:.2f}" '
               'fill="none" stroke="#444"/>']
        for v in np.linspace(*self.xlim, 5):
            out.append(f'<text x="{self.x(v):.2f}" y="{y1 + self.ph + 14:.2f}" '
                       f'text-anchor="middle">{v:.3g}</text>')
        for v in np.linspace(*self.ylim, 5):
            out.append(f'<text x="{x1 - 4:.2f}" y="{self.y(v) + 4:.2f}" '
                       f'text-anchor="end">{v:.3g}</text>')
        out.append(f'<text x="{x1 + self.pw / 2:.2f}" y="{y1 + self.ph + 30:.2f}" '
                   f'text-anchor="middle">{_esc(xlabel)}</text>')
        out.append(f'<text x="{self.x0 + 12:.2f}" y="{y1 + self.ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 {self.x0 + 12:.2f} {y1 + self.ph / 2:.2f})">'
                   f'{_esc(ylabel)}</text>')
        return "\n".join(out) + "\n"


def _points(ax, xs, ys) -> str:
    return " ".join(f"{ax.x(a):.2f},{ax.y(b):.2f}" for a, b in zip(xs, ys))


def _group_rows(rows):
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault(r.stratum, []).append(r)
    return [(k, sorted(v, key=lambda r: r.time)) for k, v in sorted(groups.items())]


def _stratum_title(variables, stratum) -> str:
    if not variables:
        return "all observations"
    return ", ".join(f"{v}={s:g}" for v, s in zip(variables, stratum))


def band_svg(table: PercentileBandTable) -> str:
    groups = _group_rows(table.rows)
    times = [r.time for r in table.rows]
    vals = [v for r in table.rows for v in (*r.observed, *r.lower, *r.upper)]
    xlim = (min(times), max(times)) if max(times) > min(times) else (min(times) - 1, min(times) + 1)
    ylim = (min(vals) - 0.2, max(vals) + 0.2)
    panels = []
    for gi, (stratum, rows) in enumerate(groups):
        ax = _Axes(gi * _W, 0, xlim, ylim)
        parts = [ax.frame(_stratum_title(table.variables, stratum), "time", "npd")]
        ts = [r.time for r in rows]
        for k, p in enumerate(table.percentiles):
            lo = [r.lower[k] for r in rows]
            hi = [r.upper[k] for r in rows]
            poly = _points(ax, ts + ts[::-1], lo + hi[::-1])
            fill = _BAND_FILL.get(p, _BAND_DEFAULT_FILL)
            parts.append(f'<polygon class="band" data-percentile="{p:g}" points="{poly}" '
                         f'fill="{fill}" fill-opacity="0.6" stroke="none"/>\n')
        for k, p in enumerate(table.percentiles):
            obs = [r.observed[k] for r in rows]
            dash = "" if p == 50.0 else ' stroke-dasharray="5,3"'
            parts.append(f'<polyline class="observed" data-percentile="{p:g}" '
                         f'points="{_points(ax, ts, obs)}" fill="none" stroke="black"{dash}/>\n')
        parts.append("</g>\n")
        panels.append("".join(parts))
    return _svg_doc(panels, _W * len(groups), _H, "npd percentiles with prediction intervals")


def proportion_svg(table: ProportionTable) -> str:
    groups = _group_rows(table.rows)
    times = [r.time for r in table.rows]
    xlim = (min(times), max(times)) if max(times) > min(times) else (min(times) - 1, min(times) + 1)
    palette = ("#1b6ca8", "#c8553d", "#2a9d8f", "#8d5a97", "#e9c46a", "#264653")
    panels = []
    for gi, (stratum, rows) in enumerate(groups):
        ax = _Axes(gi * _W, 0, xlim, (0.0, 1.0))
        parts = [ax.frame(_stratum_title(table.variables, stratum), "time", "observed fraction")]
        ts = [r.time for r in rows]
        for k, c in enumerate(table.categories):
            fr = [r.fractions[k] for r in rows]
            parts.append(f'<polyline class="category" data-category="{_esc(str(c))}" '
                         f'points="{_points(ax, ts, fr)}" fill="none" '
                         f'stroke="{palette[k % len(palette)]}" stroke-width="1.5"/>\n')
        parts.append("</g>\n")
        panels.append("".join(parts))
    return _svg_doc(panels, _W * len(groups), _H, "observed category fractions")


def null_svg(view: NullView, bins: int = 20) -> str:
    stats = view.null.statistics
    thr, obs = view.null.threshold, view.observed.D
    lo = min(stats.min(), obs)
    hi = max(stats.max(), obs)
    pad = 0.05 * (hi - lo or 1.0)
    counts, edges = np.histogram(stats, bins=bins, range=(lo - pad, hi + pad))
    ax = _Axes(0, 0, (edges[0], edges[-1]), (0.0, float(counts.max()) * 1.1))
    parts = [ax.frame("distribution under the null", view.label, "count")]
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        if c:
            parts.append(f'<rect class="bar" x="{ax.x(a):.2f}" y="{ax.y(c):.2f}" '
                         f'width="{ax.x(b) - ax.x(a):.2f}" height="{ax.y(0) - ax.y(c):.2f}" '
                         'fill="#bbbbbb" stroke="white"/>\n')
    for v, colour, name in ((thr, "red", "threshold"), (obs, "black", "observed")):
        parts.append(f'<line class="marker" data-kind="{name}" x1="{ax.x(v):.2f}" '
                     f'y1="{ax.y(0):.2f}" x2="{ax.x(v):.2f}" y2="{ax.y(ax.ylim[1]):.2f}" '
                     f'stroke="{colour}" stroke-width="2"/>\n')
    parts.append("</g>\n")
    return _svg_doc(["".join(parts)], _W, _H, "null distribution of the test statistic")


def render(artifact, path) -> list[Path]:
    """Write ``<path>.csv`` and, for non-empty tables, ``<path>.svg``."""
    base = Path(path)
    if base.suffix in (".csv", ".svg"):
        base = base.with_suffix("")
    if not base.parent.exists():
        raise OSError(f"output directory {base.parent} does not exist")
    csv_path, svg_path = base.with_suffix(".csv"), base.with_suffix(".svg")
    if isinstance(artifact, PercentileBandTable):
        write_band_csv(artifact, csv_path)
        svg = band_svg(artifact) if artifact.rows else None
    elif isinstance(artifact, ProportionTable):
        write_proportion_csv(artifact, csv_path)
        svg = proportion_svg(artifact) if artifact.rows else None
    elif isinstance(artifact, NullView):
        write_null_csv(artifact, csv_path)
        svg = null_svg(artifact)
    else:
        raise TypeError(f"cannot render {type(artifact).__name__}")
    out = [csv_path]
    if svg is not None:
        try:
            svg_path.write_text(svg)
        except OSError as exc:
            raise OSError(f"cannot write {svg_path}: {exc}") from exc
        out.append(svg_path)
    return out
