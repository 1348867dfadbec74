"""Rate-distortion post-processing: quality ladders and bitrate interpolation.

Turns fitted Elo scores plus per-method bitrates into monotone quality
ladders, interpolates bitrate at matched quality across encoder families,
and produces equivalent-quality tables and bitrate-reduction figures.

Two reference tables ship as package data: the per-method Elo/bpp table
(``elo_bitrate_reference.csv``) and the equivalent-quality table derived
from it (``equivalent_quality_reference.csv``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .domain import EloEstimate, EloFit, parse_method_id
from .errors import MappingError, NonMonotoneLadderError, OutOfRangeError
from .validation import check_finite, check_positive

GAP_MARKER = "-"

#: Column order of the published tables: baseline first, newest last.
FAMILY_DISPLAY_ORDER = ("libjpeg-turbo", "mozjpeg", "jpegli")


def family_sort_key(family: str) -> tuple:
    """Sort known families in display order; newcomers alphabetical after."""
    if family in FAMILY_DISPLAY_ORDER:
        return (0, FAMILY_DISPLAY_ORDER.index(family), "")
    return (1, 0, family)


def bits_per_pixel(file_size: int, width: int, height: int) -> float:
    """Encoded size in bits divided by pixel count.

    No rounding here; display formatting happens at table-rendering time.
    """
    if width <= 0 or height <= 0 or width * height == 0:
        raise ValueError(f"pixel count must be positive, got {width}x{height}")
    if file_size < 0:
        raise ValueError(f"file_size must be >= 0, got {file_size}")
    return file_size * 8.0 / (width * height)


@dataclass(frozen=True)
class RatePoint:
    """One (method, elo, bpp) point on the rate-distortion plane."""

    method: str
    elo: float
    bpp: float


@dataclass(frozen=True)
class Ladder:
    """Monotone (elo, bpp) staircase for one encoder family.

    Valid ladders are strictly increasing in both axes, which makes
    bitrate-at-elo interpolation and its inverse well defined.
    """

    family: str
    points: tuple[RatePoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise NonMonotoneLadderError(
                f"ladder {self.family!r} needs >= 2 points, got {len(self.points)}"
            )
        for a, b in zip(self.points, self.points[1:]):
            if not (a.elo < b.elo and a.bpp < b.bpp):
                raise NonMonotoneLadderError(
                    f"ladder {self.family!r} is not strictly monotone between "
                    f"{a.method!r} (elo {a.elo}, bpp {a.bpp}) and "
                    f"{b.method!r} (elo {b.elo}, bpp {b.bpp})",
                    offending_pair=(a.method, b.method),
                )

    @property
    def member_methods(self) -> list[str]:
        return [p.method for p in self.points]

    @property
    def elo_range(self) -> tuple[float, float]:
        return (self.points[0].elo, self.points[-1].elo)

    @property
    def bpp_range(self) -> tuple[float, float]:
        return (self.points[0].bpp, self.points[-1].bpp)


def _as_rate_points(points: Iterable[RatePoint | tuple]) -> list[RatePoint]:
    out = []
    for i, p in enumerate(points):
        if isinstance(p, RatePoint):
            out.append(p)
        elif len(p) == 3:
            out.append(RatePoint(str(p[0]), float(p[1]), float(p[2])))
        else:
            out.append(RatePoint(f"point-{i}", float(p[0]), float(p[1])))
    return out


def build_ladder(
    points: Iterable[RatePoint | tuple],
    family: str,
    selection: Callable[[str], bool] | Iterable[str] | None = None,
    pareto: bool = False,
) -> Ladder:
    """Build a ladder from (method, elo, bpp) points, sorted by elo.

    ``selection`` filters by method id (a predicate or an id collection).
    A non-monotone selection raises :class:`NonMonotoneLadderError` naming
    the offending adjacent pair; pass ``pareto=True`` to drop dominated
    points instead.
    """
    pts = _as_rate_points(points)
    if selection is not None:
        if callable(selection):
            pts = [p for p in pts if selection(p.method)]
        else:
            wanted = set(selection)
            pts = [p for p in pts if p.method in wanted]
    if pareto:
        pts = pareto_filter(pts)
    pts.sort(key=lambda p: (p.elo, p.bpp))
    return Ladder(family=family, points=tuple(pts))


def pareto_filter(points: Iterable[RatePoint | tuple]) -> list[RatePoint]:
    """Keep only undominated points: no other point has >= elo and <= bpp
    (one strict).  The survivors are monotone in both axes.  Idempotent.
    """
    pts = _as_rate_points(points)
    if not pts:
        raise ValueError("pareto_filter needs at least one point")
    kept = []
    for p in pts:
        dominated = any(
            q.elo >= p.elo and q.bpp <= p.bpp and (q.elo > p.elo or q.bpp < p.bpp)
            for q in pts
        )
        if not dominated:
            kept.append(p)
    kept.sort(key=lambda p: (p.elo, p.bpp))
    return kept


def bitrate_at_elo(ladder: Ladder, elo: float) -> float:
    """Piecewise-linear bpp at the given quality; exact at the knots."""
    check_finite("elo", elo)
    lo, hi = ladder.elo_range
    if not lo <= elo <= hi:
        raise OutOfRangeError(
            f"elo {elo} outside ladder {ladder.family!r} range [{lo}, {hi}]"
        )
    xs = [p.elo for p in ladder.points]
    ys = [p.bpp for p in ladder.points]
    return float(np.interp(elo, xs, ys))


def elo_at_bitrate(ladder: Ladder, bpp: float) -> float:
    """Inverse of :func:`bitrate_at_elo`; well defined by monotonicity."""
    check_finite("bpp", bpp)
    lo, hi = ladder.bpp_range
    if not lo <= bpp <= hi:
        raise OutOfRangeError(
            f"bpp {bpp} outside ladder {ladder.family!r} range [{lo}, {hi}]"
        )
    xs = [p.bpp for p in ladder.points]
    ys = [p.elo for p in ladder.points]
    return float(np.interp(bpp, xs, ys))


def bitrate_reduction(anchor: Ladder, other: Ladder, anchor_bpp: float) -> float:
    """Fractional bitrate savings of ``other`` vs ``anchor`` at matched quality.

    Find the quality the anchor reaches at ``anchor_bpp``, read the other
    family's bitrate at that same quality, and express the saving as a
    fraction of the anchor bitrate.  Positive means ``other`` is cheaper.
    """
    check_positive("anchor_bpp", anchor_bpp)
    elo = elo_at_bitrate(anchor, anchor_bpp)
    other_bpp = bitrate_at_elo(other, elo)
    return (anchor_bpp - other_bpp) / anchor_bpp


def _round2(x: float) -> Decimal:
    return Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def format_number(x: float) -> str:
    """Two decimals, half away from zero, trailing zeros stripped: the
    layout of the per-method reference table (``0.9``, ``1947``, ``1611.1``).
    """
    s = str(_round2(x))
    return s.rstrip("0").rstrip(".") if "." in s else s


def format_fixed2(x: float) -> str:
    """Fixed two decimals (``1.40``): the equivalent-quality table layout."""
    return str(_round2(x))


@dataclass(frozen=True)
class EquivalentQualityRow:
    """One anchor setting with each family's bitrate at the anchor's quality.

    ``bitrates`` maps family -> bpp, or None where the anchor quality falls
    outside that family's ladder (rendered as a gap marker).
    """

    method: str
    elo: float
    bitrates: dict[str, float | None]


@dataclass(frozen=True)
class EquivalentQualityTable:
    anchor_family: str
    families: tuple[str, ...]
    rows: tuple[EquivalentQualityRow, ...]

    def column_names(self) -> list[str]:
        cols = [f"{self.anchor_family.replace('-', '_')}_equiv_quality", "elo"]
        cols += [f"{f.replace('-', '_')}_bitrate" for f in self.families]
        return cols

    def to_text(self) -> str:
        lines = [",".join(self.column_names())]
        for row in self.rows:
            cells = [row.method, format_fixed2(row.elo)]
            for fam in self.families:
                bpp = row.bitrates[fam]
                cells.append(GAP_MARKER if bpp is None else format_fixed2(bpp))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def equivalent_quality_table(
    anchor: Ladder,
    others: Sequence[Ladder],
    anchor_points: Sequence[RatePoint] | None = None,
) -> EquivalentQualityTable:
    """Bitrate of every family at each anchor setting's quality level.

    One row per anchor point: the anchor method, its elo, the anchor's own
    bitrate, then each other family's interpolated bitrate.  Anchor
    qualities outside another ladder's range yield a None cell (gap).
    """
    points = list(anchor_points) if anchor_points is not None else list(anchor.points)
    rows = []
    for p in points:
        bitrates: dict[str, float | None] = {anchor.family: p.bpp}
        for lad in others:
            try:
                bitrates[lad.family] = bitrate_at_elo(lad, p.elo)
            except OutOfRangeError:
                bitrates[lad.family] = None
        rows.append(EquivalentQualityRow(method=p.method, elo=p.elo, bitrates=bitrates))
    return EquivalentQualityTable(
        anchor_family=anchor.family,
        families=(anchor.family, *[lad.family for lad in others]),
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class AlignmentResult:
    """Gauge alignment of one fit against reference estimates."""

    translation: float
    aligned: list[EloEstimate]
    spearman: float
    max_abs_delta: float
    common_methods: list[str]


def align_elos(
    fit: EloFit | Sequence[EloEstimate],
    reference: Sequence[EloEstimate],
) -> AlignmentResult:
    """Shift fitted elos by a constant so their mean matches the reference
    over common methods (both gauges are arbitrary translations), then
    report Spearman rank correlation and the largest residual.
    """
    estimates = fit.estimates if isinstance(fit, EloFit) else list(fit)
    fitted = {e.method: e for e in estimates}
    ref = {e.method: e.elo for e in reference}
    common = sorted(set(fitted) & set(ref))
    if not common:
        raise ValueError("no common methods between fit and reference")

    deltas = [ref[m] - fitted[m].elo for m in common]
    translation = float(np.mean(deltas))
    aligned = [
        EloEstimate(
            method=e.method,
            elo=e.elo + translation,
            p99_low=e.p99_low + translation,
            p99_high=e.p99_high + translation,
        )
        for e in estimates
    ]
    fit_vals = [fitted[m].elo for m in common]
    ref_vals = [ref[m] for m in common]
    if len(common) == 1 or len(set(fit_vals)) == 1 or len(set(ref_vals)) == 1:
        # rank correlation is undefined on a constant side
        rho = float("nan")
    else:
        rho = float(stats.spearmanr(fit_vals, ref_vals).statistic)
    max_abs = max(abs(ref[m] - (fitted[m].elo + translation)) for m in common)
    return AlignmentResult(
        translation=translation,
        aligned=aligned,
        spearman=rho,
        max_abs_delta=float(max_abs),
        common_methods=common,
    )


@dataclass(frozen=True)
class ReferenceRow:
    """Row of the shipped per-method reference table."""

    method: str
    elo: float
    p99_low: float
    p99_high: float
    bpp: float

    @property
    def estimate(self) -> EloEstimate:
        return EloEstimate(self.method, self.elo, self.p99_low, self.p99_high)

    @property
    def rate_point(self) -> RatePoint:
        return RatePoint(self.method, self.elo, self.bpp)


def _data_text(name: str) -> str:
    return resources.files("pairelo.data").joinpath(name).read_text()


def parse_reference_table(text: str) -> list[ReferenceRow]:
    """Parse a per-method table in the fit-export layout.

    Columns method,elo,p99Low,p99Hi,bpp; a ``-`` bpp cell means the
    bitrate is unknown and comes back as nan.
    """
    reader = csv.DictReader(text.splitlines())
    wanted = ["method", "elo", "p99Low", "p99Hi", "bpp"]
    missing = [c for c in wanted if c not in (reader.fieldnames or [])]
    if missing:
        raise MappingError(f"per-method table is missing columns: {missing}")
    rows = []
    for rec in reader:
        rows.append(ReferenceRow(
            method=rec["method"],
            elo=float(rec["elo"]),
            p99_low=float(rec["p99Low"]),
            p99_high=float(rec["p99Hi"]),
            bpp=float("nan") if rec["bpp"] == GAP_MARKER else float(rec["bpp"]),
        ))
    return rows


def load_reference_table() -> list[ReferenceRow]:
    """The shipped per-method table: elo, 99% interval, mean bpp."""
    return parse_reference_table(_data_text("elo_bitrate_reference.csv"))


def load_equivalent_quality_reference() -> list[dict[str, str]]:
    """The shipped equivalent-quality table, cells as published strings."""
    return list(csv.DictReader(_data_text("equivalent_quality_reference.csv").splitlines()))


def default_ladders(rows: Sequence[ReferenceRow | RatePoint]) -> dict[str, Ladder]:
    """Standard ladder membership per encoder family.

    libjpeg-turbo and mozjpeg ladders take every row of their family (each
    quality appears once, at the subsampling actually used); the jpegli
    ladder takes the yuv444 rows.  Mixed jpegli subsamplings are not
    monotone, so any other membership needs an explicit pareto_filter.
    """
    pts = [r.rate_point if isinstance(r, ReferenceRow) else r for r in rows]
    by_family: dict[str, list[RatePoint]] = {}
    for p in pts:
        encoder, _, subsampling = parse_method_id(p.method)
        if encoder == "jpegli" and subsampling != "yuv444":
            continue
        by_family.setdefault(encoder, []).append(p)
    return {fam: build_ladder(v, family=fam) for fam, v in sorted(by_family.items())}


def format_elo_table(rows: Sequence[ReferenceRow]) -> str:
    """Render method/elo/interval/bpp rows in the reference-table layout."""
    lines = ["method,elo,p99Low,p99Hi,bpp"]
    for r in rows:
        lines.append(",".join([
            r.method,
            format_number(r.elo),
            format_number(r.p99_low),
            format_number(r.p99_high),
            GAP_MARKER if not math.isfinite(r.bpp) else format_number(r.bpp),
        ]))
    return "\n".join(lines) + "\n"


def fit_to_reference_rows(
    fit: EloFit, bpp: Mapping[str, float | None]
) -> list[ReferenceRow]:
    """Join a fit with per-method bitrates into reference-table rows."""
    rows = []
    for e in fit.estimates:
        value = bpp.get(e.method)
        rows.append(ReferenceRow(
            method=e.method, elo=e.elo, p99_low=e.p99_low, p99_high=e.p99_high,
            bpp=float("nan") if value is None else float(value),
        ))
    return rows
