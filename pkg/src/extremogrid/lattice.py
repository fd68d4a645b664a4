"""Lattice geometry: observation grids, norm balls and finite lag sets.

Sites of the side-n grid in dimension d are the integer points
{1, ..., n}^d.  Every enumeration here is lexicographic so that results
are reproducible down to the byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .models import EUCLIDEAN, SUP, check_norm

__all__ = [
    "Grid",
    "LagSet",
    "LagTooLargeError",
    "ball",
    "ball_offsets",
    "lag_norm",
    "lags_within",
    "shifted_index_set",
    "shifted_size",
]


class LagTooLargeError(ValueError):
    """Some lag component reaches or exceeds the grid side length."""


def lag_norm(h, norm: str = SUP) -> float:
    """Norm of a single lag under the configured lattice norm."""
    check_norm(norm)
    a = np.asarray(h, dtype=float)
    if a.size == 0:
        return 0.0
    if norm == SUP:
        return float(np.max(np.abs(a)))
    return float(np.sqrt(np.sum(a * a)))


def lag_norms(lags: np.ndarray, norm: str = SUP) -> np.ndarray:
    """Norms along the last axis of a stack of lags."""
    check_norm(norm)
    a = np.asarray(lags, dtype=float)
    if norm == SUP:
        return np.max(np.abs(a), axis=-1)
    return np.sqrt(np.sum(a * a, axis=-1))


@dataclass(frozen=True)
class Grid:
    """Regular observation grid {1, ..., n}^d."""

    n: int
    d: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"side length must be >= 2, got {self.n}")
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")

    @property
    def n_sites(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def sites(self) -> np.ndarray:
        """All sites in lexicographic order, shape (n**d, d)."""
        axes = [np.arange(1, self.n + 1)] * self.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@lru_cache(maxsize=128)
def _cached_offsets(gamma: float, d: int, norm: str) -> np.ndarray:
    g = int(np.floor(gamma + 1e-12))
    axes = [np.arange(-g, g + 1)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if norm == EUCLIDEAN:
        keep = np.sum(pts * pts, axis=1) <= gamma * gamma * (1.0 + 1e-12)
        pts = pts[keep]
    pts.setflags(write=False)
    return pts


def ball_offsets(gamma: float, d: int, norm: str = SUP) -> np.ndarray:
    """Lattice points z with ||z|| <= gamma, lexicographic, shape (K, d)."""
    check_norm(norm)
    if gamma < 0:
        raise ValueError(f"radius must be >= 0, got {gamma}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return _cached_offsets(float(gamma), int(d), norm)


def ball(center, gamma: float, d: int | None = None, norm: str = SUP) -> np.ndarray:
    """Lattice points within distance gamma of ``center``.

    Translation of ``ball_offsets``: the center itself is always included.
    """
    c = np.atleast_1d(np.asarray(center, dtype=int))
    if d is None:
        d = c.size
    if c.size != d:
        raise ValueError(f"center has {c.size} components, expected {d}")
    return c + ball_offsets(gamma, d, norm)


def shifted_size(grid: Grid, h) -> int:
    """Number of sites s with both s and s + h on the grid."""
    comps = _lag_components(grid, h)
    out = 1
    for c in comps:
        out *= grid.n - abs(c)
    return out


def shifted_index_set(grid: Grid, h) -> np.ndarray:
    """Sites s with s and s + h on the grid, lexicographic, shape (K, d)."""
    comps = _lag_components(grid, h)
    axes = [
        np.arange(max(1, 1 - c), min(grid.n, grid.n - c) + 1) for c in comps
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _lag_components(grid: Grid, h) -> tuple[int, ...]:
    comps = tuple(int(c) for c in np.atleast_1d(np.asarray(h, dtype=int)))
    if len(comps) != grid.d:
        raise ValueError(f"lag has {len(comps)} components, expected {grid.d}")
    for c in comps:
        if abs(c) >= grid.n:
            raise LagTooLargeError(
                f"lag component {c} does not fit a grid of side {grid.n}"
            )
    return comps


def lags_within(gamma: float, d: int, norm: str = SUP) -> tuple[tuple[int, ...], ...]:
    """All nonzero lags h with ||h|| <= gamma, lexicographic."""
    pts = ball_offsets(gamma, d, norm)
    out = [tuple(int(c) for c in p) for p in pts if np.any(p != 0)]
    return tuple(out)


@dataclass(frozen=True)
class LagSet:
    """Finite set of distinct nonzero lags inside the ball of radius gamma."""

    lags: tuple[tuple[int, ...], ...]
    gamma: float
    norm: str = SUP

    def __post_init__(self) -> None:
        check_norm(self.norm)
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        lags = tuple(tuple(int(c) for c in h) for h in self.lags)
        object.__setattr__(self, "lags", lags)
        if len(lags) == 0:
            raise ValueError("a lag set needs at least one lag")
        if len(set(lags)) != len(lags):
            raise ValueError("duplicate lags in lag set")
        d = len(lags[0])
        for h in lags:
            if len(h) != d:
                raise ValueError("all lags must share one dimension")
            if all(c == 0 for c in h):
                raise ValueError("the zero lag is not allowed in a lag set")
            if lag_norm(h, self.norm) > self.gamma * (1.0 + 1e-12):
                raise ValueError(f"lag {h} lies outside the ball of radius {self.gamma}")

    @property
    def p(self) -> int:
        return len(self.lags)

    @property
    def d(self) -> int:
        return len(self.lags[0])

    @classmethod
    def up_to(cls, gamma: float, d: int, norm: str = SUP) -> "LagSet":
        """Every nonzero lag with norm at most gamma."""
        return cls(lags_within(gamma, d, norm), gamma=gamma, norm=norm)
