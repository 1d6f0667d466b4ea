"""Finite-difference realizations of the elliptic operators and perturbations.

Elliptic builders return the *positive* operator ``L`` assembled from its
quadratic form; the semigroup generator is ``-L`` (see
:meth:`DiscreteOperator.generator`).  Perturbation builders return ``B``
itself.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import GridSpace
from .numkernel import eigendecompose

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: np.ndarray
    space: GridSpace
    label: str
    is_real: bool = True
    is_symmetric_L2: bool = False
    order: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.space.n, self.space.n):
            raise ValueError(f"matrix shape {m.shape} does not match grid size {self.space.n}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator matrix has non-finite entries")
        if self.is_real and np.iscomplexobj(m):
            if np.any(m.imag != 0):
                raise ValueError("operator flagged real has complex entries")
            m = m.real
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.is_symmetric_L2:
            r = symmetry_residual(m, self.space)
            if r > SYMMETRY_TOL:
                raise ValueError(f"{self.label}: weighted symmetry residual {r:.2e}")

    @property
    def n(self) -> int:
        return self.space.n

    def generator(self) -> "DiscreteOperator":
        """The operator ``-L`` generating the semigroup of an elliptic ``L``."""
        return DiscreteOperator(-self.matrix, self.space, f"-({self.label})", self.is_real,
                                self.is_symmetric_L2, self.order, dict(self.meta))

    def scaled(self, c: float) -> "DiscreteOperator":
        return DiscreteOperator(c * self.matrix, self.space, f"{c:g}*({self.label})", self.is_real,
                                self.is_symmetric_L2, self.order, dict(self.meta))

    def shifted(self, gamma: float) -> "DiscreteOperator":
        """``self + gamma I``."""
        return DiscreteOperator(self.matrix + gamma * np.eye(self.n), self.space,
                                f"{self.label}+{gamma:g}", self.is_real, self.is_symmetric_L2,
                                self.order, dict(self.meta))


def symmetry_residual(m: np.ndarray, space: GridSpace) -> float:
    """``||D M - M^T D|| / ||D M||`` with ``D = diag(weights)``."""
    dm = space.weights[:, None] * m
    scale = np.linalg.norm(dm) or 1.0
    return float(np.linalg.norm(dm - dm.conj().T) / scale)


@dataclass(frozen=True)
class PerturbationFamily:
    """The affine family ``kappa -> A + kappa B`` of generators."""

    base: DiscreteOperator
    direction: DiscreteOperator

    def __post_init__(self):
        if self.base.space != self.direction.space:
            raise ValueError("base and direction live on different grids")

    @property
    def space(self) -> GridSpace:
        return self.base.space

    def assemble(self, kappa: complex) -> np.ndarray:
        if kappa == 0:
            return self.base.matrix
        m = self.base.matrix + kappa * self.direction.matrix
        return m

    def operator(self, kappa: float) -> DiscreteOperator:
        return DiscreteOperator(
            self.assemble(kappa), self.space, f"{self.base.label}+{kappa:g}*{self.direction.label}",
            self.base.is_real and self.direction.is_real,
            self.base.is_symmetric_L2 and self.direction.is_symmetric_L2,
            self.base.order, dict(self.base.meta))


def _coefficient_at(a, points: np.ndarray) -> np.ndarray:
    if callable(a):
        vals = np.asarray(a(points), dtype=float) * np.ones_like(points)
    else:
        vals = np.full_like(points, float(a))
    return vals


def _stiffness(space: GridSpace, a) -> np.ndarray:
    if not space.closed:
        raise ValueError("Robin-type operators need a closed grid")
    h = space.h
    mid = 0.5 * (space.x[:-1] + space.x[1:])
    am = _coefficient_at(a, mid)
    if not np.min(am) > 0:
        raise ValueError("coefficient a is not uniformly elliptic on the grid")
    n = space.n
    k = np.zeros((n, n))
    idx = np.arange(n - 1)
    c = am / h
    k[idx, idx] += c
    k[idx + 1, idx + 1] += c
    k[idx, idx + 1] -= c
    k[idx + 1, idx] -= c
    return k


def build_robin_laplacian(space: GridSpace, a=1.0, beta_left: float = 0.0,
                          beta_right: float = 0.0) -> DiscreteOperator:
    """``L u = -(a u')'`` with ``-a u' + beta_l u = 0`` at the left end and
    ``a u' + beta_r u = 0`` at the right end.

    Assembled from ``sum a (u_{j+1}-u_j)(v_{j+1}-v_j)/h + beta_l u_0 v_0 +
    beta_r u_n v_n`` and the trapezoidal mass, which is the ghost-node
    centred scheme.  Negative ``beta`` is allowed; the form may then be
    indefinite.
    """
    k = _stiffness(space, a)
    k[0, 0] += beta_left
    k[-1, -1] += beta_right
    lmat = k / space.weights[:, None]
    kind = "neumann" if beta_left == 0 and beta_right == 0 else "robin"
    return DiscreteOperator(lmat, space, f"{kind}-laplacian", True, True, 2.0,
                            {"builder": "robin_laplacian", "beta_left": beta_left,
                             "beta_right": beta_right})


def build_nonlocal_robin(space: GridSpace, v_left: float, v_right: float,
                         a=1.0) -> DiscreteOperator:
    """Laplacian with the boundary term ``<N u, v>`` where ``N f = <v, f> v``
    on the two-point boundary with counting measure."""
    if abs(v_left + v_right) > 1e-12 * max(1.0, abs(v_left), abs(v_right)):
        raise ValueError("boundary weight v must have zero mean: v_left + v_right = 0")
    k = _stiffness(space, a)
    vb = np.array([v_left, v_right])
    ends = [0, space.n - 1]
    k[np.ix_(ends, ends)] += np.outer(vb, vb)
    lmat = k / space.weights[:, None]
    return DiscreteOperator(lmat, space, "nonlocal-robin-laplacian", True, True, 2.0,
                            {"builder": "nonlocal_robin", "v": [v_left, v_right]})


def boundary_block(v_left: float, v_right: float) -> np.ndarray:
    vb = np.array([v_left, v_right], dtype=float)
    return np.outer(vb, vb)


def build_clamped_bilaplacian(space: GridSpace) -> DiscreteOperator:
    """``u''''`` with ``u = u' = 0`` at both ends on an open grid.

    The boundary nodes carry ``u = 0`` and the ghost value is reflected,
    ``u_{-1} = u_1`` (centred ``u' = 0``), which keeps the matrix symmetric.
    """
    if space.closed:
        raise ValueError("the clamped bi-Laplacian lives on an open (interior) grid")
    n = space.n
    if n < 8:
        raise ValueError("grid too small for the bi-Laplacian stencil (n >= 8)")
    h4 = space.h**4
    m = (np.diag(np.full(n, 6.0)) + np.diag(np.full(n - 1, -4.0), 1)
         + np.diag(np.full(n - 1, -4.0), -1) + np.diag(np.ones(n - 2), 2)
         + np.diag(np.ones(n - 2), -2))
    m[0, 0] = m[-1, -1] = 7.0
    return DiscreteOperator(m / h4, space, "clamped-bilaplacian", True, True, 4.0,
                            {"builder": "clamped_bilaplacian"})


def build_dirichlet_laplacian(space: GridSpace) -> DiscreteOperator:
    """``-u''`` with ``u = 0`` at both ends on an open grid."""
    if space.closed:
        raise ValueError("the Dirichlet Laplacian lives on an open (interior) grid")
    n = space.n
    m = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1))
    return DiscreteOperator(m / space.h**2, space, "dirichlet-laplacian", True, True, 2.0,
                            {"builder": "dirichlet_laplacian"})


def build_spectral_power(base: DiscreteOperator, s: float, shift: float = 0.0) -> DiscreteOperator:
    """``(L + shift)^s`` through the weighted eigendecomposition of ``L``."""
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    if not base.is_symmetric_L2:
        raise ValueError("spectral powers need an operator symmetric in L2")
    op = base.shifted(shift) if shift else base
    eig = eigendecompose(op.matrix, op.space.weights)
    lam = eig.values.real
    if lam.min() <= 1e-12 * max(abs(lam).max(), 1.0):
        raise ValueError(
            f"{op.label} has a nonpositive eigenvalue {lam.min():.3e}; supply a shift")
    m = eig.function(lambda v: np.power(v.real, s))
    meta = {"builder": "spectral_power", "s": s, "shift": shift, "base": base.label}
    if base.meta.get("builder") == "dirichlet_laplacian":
        meta["note"] = "powers of the Dirichlet Laplacian carry Navier, not clamped, conditions"
    return DiscreteOperator(m.real, op.space, f"({op.label})^{s:g}", True, True,
                            base.order * s, meta)


def build_delta_perturbation(space: GridSpace, x0: float = 0.0, sign: float = -1.0) -> DiscreteOperator:
    """``B x = sign * x(x0) * 1``; ``sign = -1`` is ``<-delta_0, x> 1``."""
    if sign not in (1, -1, 1.0, -1.0):
        raise ValueError("sign must be +1 or -1")
    j = space.nearest_index(x0)
    if abs(space.x[j] - x0) > 1e-12 * max(1.0, abs(x0)):
        warnings.warn(f"x0={x0} is not a grid node; snapped to {space.x[j]:.6g}", stacklevel=2)
    m = np.zeros((space.n, space.n))
    m[:, j] = sign
    return DiscreteOperator(m, space, f"{'+' if sign > 0 else '-'}delta({space.x[j]:.3g})",
                            True, False, 0.0,
                            {"builder": "delta", "x0": float(space.x[j]), "index": j, "sign": sign})


def build_kernel_perturbation(space: GridSpace, k, symmetric: bool = True) -> DiscreteOperator:
    """``(B u)(x) = int k(x, y) u(y) dy`` with the grid quadrature."""
    if callable(k):
        kk = np.asarray(k(space.x[:, None], space.x[None, :]), dtype=float)
        kk = kk * np.ones((space.n, space.n))
    else:
        kk = np.asarray(k, dtype=float)
    if kk.shape != (space.n, space.n):
        raise ValueError(f"kernel shape {kk.shape} does not match grid size {space.n}")
    if symmetric and np.max(np.abs(kk - kk.T), initial=0.0) > 1e-12 * max(np.abs(kk).max(initial=0.0), 1.0):
        raise ValueError("kernel flagged symmetric is not symmetric")
    return DiscreteOperator(kk * space.weights[None, :], space, "kernel", True, symmetric, 0.0,
                            {"builder": "kernel"})


# named kernels usable from configuration files
KERNELS: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "constant": lambda x, y: np.ones(np.broadcast(x, y).shape),
    "cos": lambda x, y: np.cos(x) * np.cos(y),
    # sign-changing, symmetric, smooth, and not orthogonal to constants
    "mixed": lambda x, y: np.cos(x - y) + 0.5 * (np.cos(x) + np.cos(y)) + 0.25,
    "gaussian": lambda x, y: np.exp(-((x - y) ** 2)),
}


def kernel_by_name(name: str):
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


def make_space(n: int, closed: bool = True, left: float = -math.pi, right: float = math.pi) -> GridSpace:
    return GridSpace(n=n, left=left, right=right, closed=closed)
