"""Empirical tail estimators on lattice fields.

The building blocks are indicator events over the vector of field values
in a neighbourhood: the single-site exceedance event, the lagged pair
event, and conjunctions of those.  Counts are accumulated as integers and
divided once at the end, so results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .fields import GridField
from .lattice import LagSet, ball_offsets, lag_norm, shifted_size
from .theory import Interval

__all__ = [
    "AndEvent",
    "EmptyEvent",
    "ExtremogramSeries",
    "NoExceedancesError",
    "PairEvent",
    "SingleEvent",
    "ThresholdSequence",
    "empirical_extremogram",
    "event_sets",
    "mu_hat",
    "tau_hat",
    "threshold",
]


class NoExceedancesError(RuntimeError):
    """The denominator event never occurred on the observed field."""

    def __init__(self, message: str, count: int = 0):
        self.count = count
        super().__init__(message)


#: model families whose margins are exactly standard Frechet
FRECHET_TAGS = ("iid", "mma", "br")


@dataclass(frozen=True)
class ThresholdSequence:
    """Threshold level a_m used to scale the field before taking indicators."""

    mode: str
    m: int
    value: float


def threshold(field: GridField, m: int, mode: str = "analytic") -> ThresholdSequence:
    """Threshold a_m for index m.

    Analytic mode returns m**d, exact for unit Frechet margins.  Empirical
    mode returns the (1 - m**-d) sample quantile of the pooled values.
    """
    if m < 2:
        raise ValueError(f"threshold index must be >= 2, got {m}")
    d = field.grid.d
    if mode == "analytic":
        if not field.model_tag.startswith(FRECHET_TAGS):
            raise ValueError(
                f"analytic thresholds assume unit Frechet margins; field is "
                f"tagged {field.model_tag!r}, use the empirical mode"
            )
        return ThresholdSequence(mode=mode, m=m, value=float(m) ** d)
    if mode == "empirical":
        if float(m) ** d > field.grid.n_sites:
            raise ValueError(
                f"quantile level 1 - {m}**-{d} lies beyond a sample of "
                f"{field.grid.n_sites} sites"
            )
        q = 1.0 - float(m) ** (-d)
        value = float(np.quantile(field.flat(), q, method="higher"))
        return ThresholdSequence(mode=mode, m=m, value=value)
    raise ValueError(f"unknown threshold mode {mode!r}")


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleEvent:
    """Field value at the site itself falls in ``a_set`` (after scaling)."""

    a_set: Interval

    def conjuncts(self, d: int):
        return ((tuple([0] * d), self.a_set),)


@dataclass(frozen=True)
class PairEvent:
    """Value at the site in ``a_set`` and at site + h in ``b_set``."""

    a_set: Interval
    b_set: Interval
    h: tuple[int, ...]

    def conjuncts(self, d: int):
        hv = tuple(int(c) for c in self.h)
        if len(hv) != d:
            raise ValueError(f"lag has {len(hv)} components, expected {d}")
        return ((tuple([0] * d), self.a_set), (hv, self.b_set))


@dataclass(frozen=True)
class AndEvent:
    """Both events hold at the same site."""

    first: object
    second: object

    def conjuncts(self, d: int):
        return tuple(self.first.conjuncts(d)) + tuple(self.second.conjuncts(d))


@dataclass(frozen=True)
class EmptyEvent:
    """The impossible event."""

    def conjuncts(self, d: int):
        return None


def event_sets(lag_set: LagSet, a_set: Interval, b_set: Interval):
    """The p lagged pair events followed by the single-site event."""
    pairs = [PairEvent(a_set, b_set, h) for h in lag_set.lags]
    return pairs + [SingleEvent(a_set)]


def _dedupe(conjuncts):
    seen = []
    for c in conjuncts:
        if c not in seen:
            seen.append(c)
    return seen


def _region_for(n: int, d: int, offsets, extent, shifts) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive site ranges (lo, hi) of the retained evaluation region.

    Every conjunct offset must stay on the grid, and for each shift b the
    whole radius-extent box around s + b must stay on the grid.
    """
    lo = np.ones(d, dtype=int)
    hi = np.full(d, n, dtype=int)
    ext = np.asarray(extent, dtype=int)
    for b in shifts:
        bv = np.asarray(b, dtype=int)
        lo = np.maximum(lo, 1 + ext + np.maximum(0, -bv))
        hi = np.minimum(hi, n - ext - np.maximum(0, bv))
    offs = np.asarray(offsets, dtype=int)
    lo = np.maximum(lo, 1 + np.maximum(0, -offs.min(axis=0)))
    hi = np.minimum(hi, n - np.maximum(0, offs.max(axis=0)))
    if np.any(hi < lo):
        raise ValueError("no site supports the requested event on this grid")
    return lo, hi


def _count_conjuncts(values: np.ndarray, conjuncts, a_m: float, lo, hi) -> int:
    """Count sites s in the (lo, hi) box where every conjunct holds."""
    out = None
    for off, interval in conjuncts:
        sl = tuple(
            slice(lo[k] - 1 + off[k], hi[k] + off[k]) for k in range(len(off))
        )
        ind = interval.contains(values[sl] / a_m)
        out = ind if out is None else (out & ind)
    return int(np.count_nonzero(out))


def _ball_extent(gamma: float | None, d: int, norm: str) -> np.ndarray:
    if gamma is None:
        return np.zeros(d, dtype=int)
    offs = ball_offsets(gamma, d, norm)
    return np.abs(offs).max(axis=0)


def _check_offsets_in_ball(conjuncts, gamma: float | None, norm: str) -> None:
    if gamma is None:
        return
    for off, _ in conjuncts:
        if lag_norm(off, norm) > gamma * (1.0 + 1e-12):
            raise ValueError(
                f"event offset {off} lies outside the ball of radius {gamma}"
            )


def mu_hat(
    field: GridField,
    event,
    m: int,
    gamma: float | None = None,
    norm: str = "sup",
) -> float:
    """Scaled frequency m**d * count / retained of the event on the field.

    With ``gamma`` set, sites whose radius-gamma neighbourhood leaves the
    grid are dropped and the count is renormalised by the retained number
    of sites; with ``gamma`` omitted only the sites the event actually
    needs are required to be interior, which makes ratios of these
    estimates match the lag-restricted index sets exactly.
    """
    d = field.grid.d
    conjuncts = event.conjuncts(d)
    if conjuncts is None:
        return 0.0
    conjuncts = _dedupe(conjuncts)
    _check_offsets_in_ball(conjuncts, gamma, norm)
    ext = _ball_extent(gamma, d, norm)
    offsets = [off for off, _ in conjuncts]
    lo, hi = _region_for(field.grid.n, d, offsets, ext, [tuple([0] * d)])
    a_m = float(m) ** d
    count = _count_conjuncts(field.values, conjuncts, a_m, lo, hi)
    retained = int(np.prod(hi - lo + 1))
    return a_m * count / retained


def tau_hat(
    field: GridField,
    c_event,
    d_event,
    h,
    m: int,
    gamma: float | None = None,
    norm: str = "sup",
) -> float:
    """Scaled joint frequency of ``c_event`` at s and ``d_event`` at s + h."""
    d = field.grid.d
    hv = tuple(int(c) for c in np.atleast_1d(np.asarray(h, dtype=int)))
    if len(hv) != d:
        raise ValueError(f"lag has {len(hv)} components, expected {d}")
    if all(c == 0 for c in hv):
        raise ValueError("the joint estimator needs a nonzero lag")
    c_conj = c_event.conjuncts(d)
    d_conj = d_event.conjuncts(d)
    if c_conj is None or d_conj is None:
        return 0.0
    shifted = [(tuple(o + s for o, s in zip(off, hv)), iv) for off, iv in d_conj]
    conjuncts = _dedupe(list(c_conj) + shifted)
    _check_offsets_in_ball(c_conj, gamma, norm)
    _check_offsets_in_ball(d_conj, gamma, norm)
    ext = _ball_extent(gamma, d, norm)
    offsets = [off for off, _ in conjuncts]
    lo, hi = _region_for(field.grid.n, d, offsets, ext, [tuple([0] * d), hv])
    a_m = float(m) ** d
    count = _count_conjuncts(field.values, conjuncts, a_m, lo, hi)
    retained = int(np.prod(hi - lo + 1))
    return a_m * count / retained


# ---------------------------------------------------------------------------
# the empirical extremogram
# ---------------------------------------------------------------------------


@dataclass
class ExtremogramSeries:
    """Per-lag dependence values with their provenance."""

    lags: tuple[tuple[int, ...], ...]
    values: np.ndarray
    kind: str
    meta: dict = dataclass_field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for h, v in zip(self.lags, self.values):
            row = {"lag": h, "value": float(v), "kind": self.kind}
            row.update(self.meta)
            out.append(row)
        return out


def empirical_extremogram(
    field: GridField,
    lag_set: LagSet,
    a_set: Interval,
    b_set: Interval,
    a_m: float,
    meta: dict | None = None,
) -> ExtremogramSeries:
    """Ratio of lagged joint exceedance frequencies to the marginal one.

    For each lag h the numerator averages the pair indicator over the
    sites with both ends on the grid, the denominator averages the
    single-site indicator over the whole grid.
    """
    if a_m <= 0:
        raise ValueError(f"threshold must be positive, got {a_m}")
    grid = field.grid
    if lag_set.d != grid.d:
        raise ValueError(f"lag dimension {lag_set.d} != grid dimension {grid.d}")
    scaled = field.values / a_m
    in_a = a_set.contains(scaled)
    denom_count = int(np.count_nonzero(in_a))
    if denom_count == 0:
        raise NoExceedancesError(
            f"no site fell in {a_set} at threshold {a_m:g}", count=0
        )
    in_b = b_set.contains(scaled)
    n = grid.n
    values = np.empty(lag_set.p)
    for i, h in enumerate(lag_set.lags):
        sl_a = tuple(slice(max(0, -c), min(n, n - c)) for c in h)
        sl_b = tuple(slice(max(0, c), min(n, n + c)) for c in h)
        pairs = int(np.count_nonzero(in_a[sl_a] & in_b[sl_b]))
        values[i] = (pairs / shifted_size(grid, h)) / (denom_count / grid.n_sites)
    info = {"n": n, "a_m": a_m, "A": str(a_set), "B": str(b_set),
            "model_tag": field.model_tag, "seed": field.seed}
    if meta:
        info.update(meta)
    return ExtremogramSeries(lags=lag_set.lags, values=values, kind="empirical", meta=info)
