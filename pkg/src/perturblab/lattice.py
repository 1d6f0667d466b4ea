"""Grid function spaces on an interval: L^p norms, sup norm and gauge norms.

Vectors are plain ``ndarray`` objects whose length matches a
:class:`GridSpace`.  The principal ideal generated by a strictly positive
weight ``u`` is normed by ``max_j |x_j| / u_j``, which is exactly the gauge
norm ``inf{c > 0 : |x| <= c u}`` once "almost everywhere" means "at every
node".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpace:
    """Uniform grid on ``[left, right]``.

    ``closed`` grids carry a value at both endpoints and use trapezoidal
    weights.  Open grids hold only the ``n`` interior nodes of a uniform
    grid with ``n + 2`` points; they are meant for operators whose trace
    vanishes, so the missing endpoint weights multiply zeros.
    """

    n: int
    left: float = -math.pi
    right: float = math.pi
    closed: bool = True
    x: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.right > self.left:
            raise ValueError("need left < right")
        if self.n < (2 if self.closed else 1):
            raise ValueError("grid too small")
        if self.closed:
            x = np.linspace(self.left, self.right, self.n)
            w = np.full(self.n, self.h)
            w[0] = w[-1] = 0.5 * self.h
        else:
            x = self.left + self.h * np.arange(1, self.n + 1)
            w = np.full(self.n, self.h)
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @property
    def length(self) -> float:
        return self.right - self.left

    @property
    def h(self) -> float:
        return self.length / (self.n - 1 if self.closed else self.n + 1)

    @property
    def boundary_indices(self) -> tuple[int, ...]:
        return (0, self.n - 1) if self.closed else ()

    def ones(self) -> np.ndarray:
        return np.ones(self.n)

    def nearest_index(self, x0: float) -> int:
        if not self.left <= x0 <= self.right:
            raise ValueError(f"{x0} lies outside [{self.left}, {self.right}]")
        return int(np.argmin(np.abs(self.x - x0)))

    def to_dict(self) -> dict:
        return {"n": self.n, "left": self.left, "right": self.right, "closed": self.closed}


def weight_vector(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or not np.all(u > 0):
        raise ValueError("u must be a strictly positive vector")
    return u


def _check(x, space: GridSpace) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != space.n:
        raise ValueError(f"vector length {x.shape[0]} does not match grid size {space.n}")
    return x


def norm(x, space: GridSpace, which: str = "L2", p: float | None = None) -> float:
    """``which`` is ``"L2"``, ``"Lp"`` (with ``p``) or ``"sup"``."""
    x = np.abs(_check(x, space))
    w = space.weights
    if which == "L2":
        return float(np.sqrt(np.sum(w * x**2)))
    if which == "Lp":
        if p is None or p < 1:
            raise ValueError("Lp norm needs p >= 1")
        if math.isinf(p):
            return float(x.max(initial=0.0))
        m = x.max(initial=0.0)
        if m == 0:
            return 0.0
        # scaled to avoid overflow for large p
        return float(m * np.sum(w * (x / m) ** p) ** (1.0 / p))
    if which == "sup":
        return float(x.max(initial=0.0))
    raise ValueError(f"unknown norm {which!r}")


def gauge_norm(x, u) -> float:
    x = np.asarray(x)
    u = weight_vector(u)
    if x.shape != u.shape:
        raise ValueError("length mismatch between x and u")
    return float(np.max(np.abs(x) / u, initial=0.0))


def inner(x, y, space: GridSpace) -> complex:
    """Weighted inner product, conjugate-linear in the second slot."""
    return complex(np.sum(space.weights * np.asarray(x) * np.conj(y)))


def op_norm(
    t,
    space: GridSpace,
    frm: str,
    to: str,
    *,
    u=None,
    p: float | None = None,
) -> float:
    """Operator norm of the matrix ``t`` between grid norms.

    Supported pairs: ``L2->sup``, ``L2->L2``, ``Lp->sup`` and
    ``gauge->gauge`` (the latter needs ``u``).
    """
    t = np.asarray(t)
    a = np.abs(t)
    w = space.weights
    pair = (frm, to)
    if pair == ("L2", "sup"):
        return float(np.sqrt(np.max(a**2 @ (1.0 / w))))
    if pair == ("L2", "L2"):
        sw = np.sqrt(w)
        return float(np.linalg.norm((sw[:, None] * t) / sw[None, :], 2))
    if pair == ("Lp", "sup"):
        if p is None or p < 1:
            raise ValueError("Lp->sup needs p >= 1")
        if p == 1:
            return float(np.max(a / w[None, :]))
        if math.isinf(p):
            return float(np.max(a.sum(axis=1)))
        q = p / (p - 1.0)
        return float(np.max((a**q @ w ** (1.0 - q)) ** (1.0 / q)))
    if pair == ("gauge", "gauge"):
        if u is None:
            raise ValueError("gauge norm needs a weight vector u")
        u = weight_vector(u)
        return float(np.max((a @ u) / u))
    raise ValueError(f"unsupported norm pair {frm}->{to}")


def rank_one_positive(u, space: GridSpace) -> np.ndarray:
    """Matrix of ``x -> <u, x> u``."""
    u = weight_vector(_check(u, space))
    return np.outer(u, u * space.weights)


def min_ratio(x, u) -> float:
    """``min_j x_j / u_j``; positive exactly when ``x`` dominates a multiple of ``u``."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        if np.max(np.abs(x.imag), initial=0.0) > 1e-12 * max(np.max(np.abs(x.real), initial=0.0), 1.0):
            raise ValueError("min_ratio needs a real vector")
        x = x.real
    u = weight_vector(u)
    return float(np.min(x / u))


def embedding_constant(space: GridSpace, u=None) -> float:
    """Smallest ``c`` with ``||x||_2 <= c ||x||_{E_u}``, i.e. ``||u||_2``."""
    u = space.ones() if u is None else weight_vector(u)
    return norm(u, space)
