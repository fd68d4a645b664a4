"""Parametric descriptions of the random-field models.

The model objects are plain frozen dataclasses carrying everything the
simulators and the closed-form dependence functions need, so that both
always refer to exactly the same (truncated) process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUP = "sup"
EUCLIDEAN = "euclidean"
NORMS = (SUP, EUCLIDEAN)

#: weights phi**R below this floor are dropped by the default truncation
WEIGHT_FLOOR = 1e-12


def check_norm(norm: str) -> None:
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def default_trunc_radius(phi: float) -> int:
    """Smallest radius R with phi**R below the weight floor."""
    r = math.ceil(math.log(WEIGHT_FLOOR) / math.log(phi))
    while phi**r >= WEIGHT_FLOOR:
        r += 1
    return max(r, 1)


@dataclass(frozen=True)
class IidModel:
    """Independent standard Frechet values at every site."""

    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")

    @property
    def tag(self) -> str:
        return "iid"


@dataclass(frozen=True)
class MmaModel:
    """Max-moving average with weights phi**||z|| over ||z|| <= trunc_radius.

    The simulated process is the truncated moving maximum itself,
    standardised to exact unit Frechet margins; the closed-form
    dependence functions use the same truncation radius.
    """

    phi: float
    d: int
    trunc_radius: int | None = None
    norm: str = SUP

    def __post_init__(self) -> None:
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        check_norm(self.norm)
        if self.trunc_radius is None:
            object.__setattr__(self, "trunc_radius", default_trunc_radius(self.phi))
        if self.trunc_radius < 1:
            raise ValueError(f"trunc_radius must be >= 1, got {self.trunc_radius}")

    @property
    def tag(self) -> str:
        return f"mma(phi={self.phi:g},R={self.trunc_radius},norm={self.norm})"


@dataclass(frozen=True)
class Variogram:
    """Power variogram theta * ||h||_2 ** alpha.

    Distances are Euclidean regardless of the lattice norm used elsewhere:
    the power family is conditionally negative definite for the Euclidean
    distance and alpha in (0, 2], which is what the Gaussian construction
    requires.  theta == 0 gives the completely dependent limit.
    """

    theta: float
    alpha: float
    family: str = "power"

    def __post_init__(self) -> None:
        if self.family != "power":
            raise ValueError(f"unsupported variogram family {self.family!r}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")

    def __call__(self, h) -> np.ndarray | float:
        """Evaluate on a lag (shape (d,)) or a stack of lags (..., d)."""
        a = np.asarray(h, dtype=float)
        r2 = np.sum(a * a, axis=-1)
        out = self.theta * np.power(r2, self.alpha / 2.0)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BrModel:
    """Brown-Resnick field driven by a power variogram."""

    variogram: Variogram
    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")

    @property
    def tag(self) -> str:
        v = self.variogram
        return f"br(theta={v.theta:g},alpha={v.alpha:g})"


#: anything accepted by ``simulate_field`` / ``dependence_of``
Model = IidModel | MmaModel | BrModel
