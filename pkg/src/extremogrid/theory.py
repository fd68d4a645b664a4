"""Closed-form extremal dependence for the supported models.

Everything in this module is deterministic arithmetic: exponent measures,
extremal coefficients, the limiting and finite-level extremograms, the
second-order bias coefficient, and the geometric mixing bound for the
moving-maximum model.  These values are the ground truth against which
the simulation-based estimators are checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .lattice import ball_offsets, lag_norm, lag_norms
from .models import (
    SUP,
    BrModel,
    IidModel,
    MmaModel,
    Model,
    Variogram,
    check_norm,
)

__all__ = [
    "BivariateExponent",
    "ExtremogramRangeError",
    "Interval",
    "br_dependence",
    "br_v2",
    "dependence_of",
    "dependence_table",
    "iid_dependence",
    "incomplete_gamma",
    "mma_counts",
    "mma_dependence",
    "mma_exponent_measure",
    "mma_mixing_bound",
    "mma_theta",
    "mma_v1",
    "mma_v2",
    "mma_v2_general",
    "preasymptotic_exact",
    "preasymptotic_taylor",
    "second_order_coefficient",
    "true_extremogram",
]

#: bivariate exponent measure as a callable: (lag, level1, level2) -> value
BivariateExponent = Callable[[tuple[int, ...], float, float], float]

_RANGE_TOL = 1e-12


class ExtremogramRangeError(ValueError):
    """A computed extremogram value left [0, 1] by more than the tolerance."""


@dataclass(frozen=True)
class Interval:
    """Open interval (lower, upper) bounded away from zero; upper may be inf."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lower < self.upper:
            raise ValueError(
                f"need 0 < lower < upper, got ({self.lower}, {self.upper})"
            )

    @property
    def is_ray(self) -> bool:
        return math.isinf(self.upper)

    def frechet_mass(self) -> float:
        """Limit measure of the interval under standard Frechet scaling."""
        return 1.0 / self.lower - (0.0 if self.is_ray else 1.0 / self.upper)

    def contains(self, x: np.ndarray) -> np.ndarray:
        out = x > self.lower
        if not self.is_ray:
            out &= x < self.upper
        return out

    def __str__(self) -> str:
        up = "inf" if self.is_ray else f"{self.upper:g}"
        return f"({self.lower:g},{up})"


def incomplete_gamma(s: int, y: float) -> float:
    """Upper incomplete gamma at integer order: (s-1)! e^{-y} sum_{i<s} y^i/i!."""
    if s < 1 or s != int(s):
        raise ValueError(f"order must be a positive integer, got {s}")
    if y < 0:
        raise ValueError(f"lower limit must be >= 0, got {y}")
    acc = 0.0
    term = 1.0
    for i in range(int(s)):
        if i > 0:
            term *= y / i
        acc += term
    return math.factorial(int(s) - 1) * math.exp(-y) * acc


# ---------------------------------------------------------------------------
# moving-maximum model
# ---------------------------------------------------------------------------


def mma_counts(d: int, h, j: int, norm: str = SUP) -> tuple[int, int]:
    """Shell counts at integer distance j.

    Returns (N, Q): N is the number of lattice points with norm exactly j,
    Q the number of points s with min(||s||, ||s + h||) exactly j.  The
    counts coincide with the shell representation of the lattice sums for
    integer-valued norms; they remain well defined (mostly zero shells)
    for the Euclidean norm.
    """
    check_norm(norm)
    if j < 0:
        raise ValueError(f"shell index must be >= 0, got {j}")
    hv = np.atleast_1d(np.asarray(h, dtype=int))
    if hv.size != d:
        raise ValueError(f"lag has {hv.size} components, expected {d}")
    reach = j + int(math.ceil(lag_norm(hv, SUP))) + 1
    pts = ball_offsets(reach, d, SUP)
    a = lag_norms(pts, norm)
    b = lag_norms(pts + hv, norm)
    tol = 1e-9
    n_count = int(np.count_nonzero(np.abs(a - j) <= tol))
    q_count = int(np.count_nonzero(np.abs(np.minimum(a, b) - j) <= tol))
    return n_count, q_count


@lru_cache(maxsize=64)
def _shell_counts(d: int, radius: int, norm: str) -> np.ndarray:
    """N(j) for j = 0..radius (integer-valued norms only)."""
    pts = ball_offsets(radius, d, norm)
    norms = np.rint(lag_norms(pts, norm)).astype(int)
    return np.bincount(norms, minlength=radius + 1)


def mma_v1(model: MmaModel) -> float:
    """Total truncated weight sum, the Frechet scale of the raw maximum."""
    r = model.trunc_radius
    if model.norm == SUP:
        counts = _shell_counts(model.d, r, model.norm)
        return float(np.sum(counts * model.phi ** np.arange(r + 1)))
    pts = ball_offsets(r, model.d, model.norm)
    return float(np.sum(model.phi ** lag_norms(pts, model.norm)))


def _pair_weights(model: MmaModel, h) -> tuple[np.ndarray, np.ndarray]:
    """Truncated weights seen from the origin and from lag h, on a shared cube."""
    r = model.trunc_radius
    hv = np.atleast_1d(np.asarray(h, dtype=int))
    reach = r + int(np.max(np.abs(hv)))
    pts = ball_offsets(reach, model.d, SUP)
    na = lag_norms(pts, model.norm)
    nb = lag_norms(pts - hv, model.norm)
    wa = np.where(na <= r + 1e-9, model.phi**na, 0.0)
    wb = np.where(nb <= r + 1e-9, model.phi**nb, 0.0)
    return wa, wb


def mma_v2(model: MmaModel, h) -> float:
    """Equal-level pair exponent of the raw (unstandardised) maximum.

    Computed from the shell counts Q(j) for the sup norm, by direct lattice
    summation otherwise.
    """
    hv = np.atleast_1d(np.asarray(h, dtype=int))
    r = model.trunc_radius
    if model.norm == SUP:
        reach = r + int(np.max(np.abs(hv)))
        pts = ball_offsets(reach, model.d, SUP)
        a = lag_norms(pts, SUP)
        b = lag_norms(pts + hv, SUP)
        mins = np.rint(np.minimum(a, b)).astype(int)
        mins = mins[mins <= r]
        q = np.bincount(mins, minlength=r + 1)
        return float(np.sum(q * model.phi ** np.arange(r + 1)))
    wa, wb = _pair_weights(model, h)
    return float(np.sum(np.maximum(wa, wb)))


def mma_theta(model: MmaModel, h) -> float:
    """Extremal coefficient of the standardised process, in [1, 2]."""
    return mma_v2(model, h) / mma_v1(model)


def mma_v2_general(model: MmaModel, h, x1: float, x2: float) -> float:
    """Pair exponent of the standardised process at levels (x1, x2)."""
    if x1 <= 0 or x2 <= 0:
        raise ValueError(f"levels must be positive, got ({x1}, {x2})")
    if math.isinf(x1) and math.isinf(x2):
        return 0.0
    if math.isinf(x1):
        return 1.0 / x2
    if math.isinf(x2):
        return 1.0 / x1
    wa, wb = _pair_weights(model, h)
    return float(np.sum(np.maximum(wa / x1, wb / x2))) / mma_v1(model)


def mma_exponent_measure(model: MmaModel, sites, levels) -> float:
    """Exponent measure of the standardised process over several sites.

    ``sites`` is a (k, d) collection of lattice points and ``levels`` the
    matching positive thresholds; the joint survival function is
    exp(-value).  Used as the brute-force oracle for multi-site events.
    """
    pts_sites = np.atleast_2d(np.asarray(sites, dtype=int))
    lv = np.asarray(levels, dtype=float)
    if pts_sites.shape[0] != lv.size:
        raise ValueError("one level per site is required")
    if np.any(lv <= 0):
        raise ValueError("levels must be positive")
    r = model.trunc_radius
    reach = r + int(np.max(np.abs(pts_sites)))
    pts = ball_offsets(reach, model.d, SUP)
    best = np.zeros(len(pts))
    for site, x in zip(pts_sites, lv):
        if math.isinf(x):
            continue
        norms = lag_norms(pts - site, model.norm)
        w = np.where(norms <= r + 1e-9, model.phi**norms, 0.0) / x
        np.maximum(best, w, out=best)
    return float(best.sum()) / mma_v1(model)


def mma_mixing_bound(model: MmaModel, k: int, ell: int, r: float) -> float:
    """Proportional mixing bound k * ell * sum_{j >= r/2} j**(d-1) phi**j.

    The sum runs over the truncated weight range, so separations beyond
    twice the truncation radius give exactly zero.  The unknown constant
    in front is not estimated.
    """
    if r < 0:
        raise ValueError(f"separation must be >= 0, got {r}")
    lo = int(math.ceil(r / 2.0))
    hi = model.trunc_radius
    if lo > hi:
        return 0.0
    js = np.arange(lo, hi + 1, dtype=float)
    return float(k * ell * np.sum(js ** (model.d - 1) * model.phi**js))


# ---------------------------------------------------------------------------
# Brown-Resnick model
# ---------------------------------------------------------------------------


def br_v2(variogram: Variogram, h, x1: float, x2: float) -> float:
    """Pair exponent of the Brown-Resnick field at levels (x1, x2).

    For dependence value delta = variogram(h) the measure is
    (1/x1) Phi(sqrt(delta/2) + log(x2/x1)/sqrt(2 delta))
    + (1/x2) Phi(sqrt(delta/2) + log(x1/x2)/sqrt(2 delta)),
    with the complete-dependence limit at delta == 0.
    """
    if x1 <= 0 or x2 <= 0:
        raise ValueError(f"levels must be positive, got ({x1}, {x2})")
    if math.isinf(x1) and math.isinf(x2):
        return 0.0
    if math.isinf(x1):
        return 1.0 / x2
    if math.isinf(x2):
        return 1.0 / x1
    delta = float(variogram(np.asarray(h, dtype=float)))
    if delta == 0.0:
        return max(1.0 / x1, 1.0 / x2)
    s = math.sqrt(2.0 * delta)
    g = math.log(x2 / x1)
    return float(ndtr(s / 2.0 + g / s) / x1 + ndtr(s / 2.0 - g / s) / x2)


def br_theta(variogram: Variogram, h) -> float:
    """Extremal coefficient 2 Phi(sqrt(variogram(h)) / sqrt(2))."""
    return br_v2(variogram, h, 1.0, 1.0)


# ---------------------------------------------------------------------------
# dependence dispatch
# ---------------------------------------------------------------------------


def iid_dependence() -> BivariateExponent:
    """Pair exponent of independent Frechet values (complete dependence at 0)."""

    def v2(h, x1: float, x2: float) -> float:
        if x1 <= 0 or x2 <= 0:
            raise ValueError(f"levels must be positive, got ({x1}, {x2})")
        a = 0.0 if math.isinf(x1) else 1.0 / x1
        b = 0.0 if math.isinf(x2) else 1.0 / x2
        hv = np.atleast_1d(np.asarray(h))
        if not np.any(hv != 0):
            return max(a, b)
        return a + b

    return v2


def mma_dependence(model: MmaModel) -> BivariateExponent:
    def v2(h, x1: float, x2: float) -> float:
        return mma_v2_general(model, h, x1, x2)

    return v2


def br_dependence(variogram: Variogram) -> BivariateExponent:
    def v2(h, x1: float, x2: float) -> float:
        return br_v2(variogram, h, x1, x2)

    return v2


def dependence_of(model: Model) -> BivariateExponent:
    """Bivariate exponent measure callable for any supported model."""
    if isinstance(model, IidModel):
        return iid_dependence()
    if isinstance(model, MmaModel):
        return mma_dependence(model)
    if isinstance(model, BrModel):
        return br_dependence(model.variogram)
    raise TypeError(f"unsupported model {model!r}")


# ---------------------------------------------------------------------------
# extremograms
# ---------------------------------------------------------------------------


def _v2_at(v2: BivariateExponent, h, x1: float, x2: float) -> float:
    """Evaluate with the standard conventions at infinite levels."""
    if math.isinf(x1) and math.isinf(x2):
        return 0.0
    if math.isinf(x1):
        return 1.0 / x2
    if math.isinf(x2):
        return 1.0 / x1
    return float(v2(h, x1, x2))


def true_extremogram(v2: BivariateExponent, h, a_set: Interval, b_set: Interval) -> float:
    """Limiting conditional dependence value for intervals A and B at lag h."""
    a1, a2 = a_set.lower, a_set.upper
    b1, b2 = b_set.lower, b_set.upper
    pref = a1 if a_set.is_ray else a1 * a2 / (a2 - a1)
    rho = pref * (
        -_v2_at(v2, h, a2, b2)
        + _v2_at(v2, h, a2, b1)
        + _v2_at(v2, h, a1, b2)
        - _v2_at(v2, h, a1, b1)
    )
    if rho < -_RANGE_TOL or rho > 1.0 + _RANGE_TOL:
        raise ExtremogramRangeError(
            f"extremogram value {rho} for A={a_set}, B={b_set} leaves [0, 1]"
        )
    return float(min(max(rho, 0.0), 1.0))


def preasymptotic_exact(
    v2: BivariateExponent, h, a_set: Interval, b_set: Interval, m: int, d: int
) -> float:
    """Finite-level conditional dependence at threshold scale m**d.

    Exact ratio of the joint and marginal interval probabilities of the
    max-stable law, no expansion involved.
    """
    if m <= 0:
        raise ValueError(f"threshold index must be positive, got {m}")
    am = float(m) ** d
    a1, a2 = a_set.lower, a_set.upper
    b1, b2 = b_set.lower, b_set.upper

    def cdf_term(x: float, y: float) -> float:
        v = _v2_at(v2, h, x, y)
        return math.exp(-v / am)

    num = (
        cdf_term(a2, b2) - cdf_term(a2, b1) - cdf_term(a1, b2) + cdf_term(a1, b1)
    )
    den = (1.0 if a_set.is_ray else math.exp(-1.0 / (a2 * am))) - math.exp(
        -1.0 / (a1 * am)
    )
    return num / den


def second_order_coefficient(
    v2: BivariateExponent,
    h,
    a_set: Interval,
    b_set: Interval,
    rho: float | None = None,
) -> float:
    """Coefficient c with rho_m = rho + c / (2 m**d) + O(m**-2d).

    For a pair of rays A=(a,inf), B=(b,inf) this is
    (1/a)(rho - 2a/b)(rho - 1); the general interval case carries the
    signed squares of the corner exponent values plus the denominator
    curvature, to which the ray form reduces.
    """
    if rho is None:
        rho = true_extremogram(v2, h, a_set, b_set)
    a1, a2 = a_set.lower, a_set.upper
    b1, b2 = b_set.lower, b_set.upper
    if a_set.is_ray and b_set.is_ray:
        return (1.0 / a1) * (rho - 2.0 * a1 / b1) * (rho - 1.0)
    s2 = (
        _v2_at(v2, h, a2, b2) ** 2
        - _v2_at(v2, h, a2, b1) ** 2
        - _v2_at(v2, h, a1, b2) ** 2
        + _v2_at(v2, h, a1, b1) ** 2
    )
    t1 = 1.0 / a1 - (0.0 if a_set.is_ray else 1.0 / a2)
    t2 = (0.0 if a_set.is_ray else 1.0 / a2**2) - 1.0 / a1**2
    return (s2 - rho * t2) / t1


def preasymptotic_taylor(
    v2: BivariateExponent,
    h,
    a_set: Interval,
    b_set: Interval,
    m: int,
    d: int,
    rho: float | None = None,
) -> float:
    """Second-order approximation of the finite-level dependence value."""
    if m <= 0:
        raise ValueError(f"threshold index must be positive, got {m}")
    if rho is None:
        rho = true_extremogram(v2, h, a_set, b_set)
    coeff = second_order_coefficient(v2, h, a_set, b_set, rho=rho)
    return rho + coeff / (2.0 * float(m) ** d)


def dependence_table(
    model: Model,
    lags,
    a_set: Interval,
    b_set: Interval,
    m: int,
) -> list[dict]:
    """Per-lag closed-form summary rows for export."""
    v2 = dependence_of(model)
    d = model.d
    rows = []
    for h in lags:
        hv = tuple(int(c) for c in np.atleast_1d(np.asarray(h, dtype=int)))
        rho = true_extremogram(v2, hv, a_set, b_set)
        row = {
            "lag": hv,
            "theta": _v2_at(v2, hv, 1.0, 1.0),
            "rho_true": rho,
            "rho_pre": preasymptotic_exact(v2, hv, a_set, b_set, m, d),
            "rho_taylor": preasymptotic_taylor(v2, hv, a_set, b_set, m, d, rho=rho),
        }
        rows.append(row)
    return rows
