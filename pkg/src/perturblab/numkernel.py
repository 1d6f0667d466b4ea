"""Dense linear algebra, special functions and quadrature rules.

Everything here works on plain ``numpy`` arrays.  Matrices are square
complex or real ``ndarray`` objects; no wrapper type is imposed on callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

EIG_RESIDUAL_TOL = 1e-8
RESOLVENT_RESIDUAL_TOL = 1e-10
EIGVEC_COND_MAX = 1e8


class SpectralCollision(ValueError):
    """A resolvent was requested at (or numerically at) a spectral point."""


class NumericalAbort(RuntimeError):
    """A numerical procedure failed to converge or overflowed."""


def as_square(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


# ---------------------------------------------------------------------------
# eigendecomposition and the matrix exponential


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray
    reconstruction_residual: float

    @property
    def accepted(self) -> bool:
        return self.reconstruction_residual <= EIG_RESIDUAL_TOL

    def function(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Apply a scalar function through the decomposition: V f(D) V^-1."""
        return (self.vectors * f(self.values)) @ self.inverse


def eigendecompose(a, weights: np.ndarray | None = None) -> EigenDecomposition:
    """Right eigenvectors of ``a``.

    With ``weights`` given, ``a`` is assumed self-adjoint for the inner
    product ``<x, y> = sum w x conj(y)``; the symmetric solver is then used on
    ``D^{1/2} a D^{-1/2}`` and the eigenvectors come back orthonormal in that
    inner product, so the inverse is ``V^* D``.
    """
    a = as_square(a)
    if weights is not None:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        sym = (sw[:, None] * a) / sw[None, :]
        sym = 0.5 * (sym + sym.conj().T)
        vals, q = np.linalg.eigh(sym)
        vecs = q / sw[:, None]
        inv = q.conj().T * sw[None, :]
    else:
        vals, vecs = np.linalg.eig(a)
        if np.linalg.cond(vecs) > EIGVEC_COND_MAX:
            inv = np.full_like(vecs, np.nan)
            return EigenDecomposition(vals, vecs, inv, math.inf)
        inv = np.linalg.inv(vecs)
    scale = spectral_norm(a) or 1.0
    resid = spectral_norm(a @ vecs - vecs * vals) / scale
    return EigenDecomposition(vals, vecs, inv, float(resid))


def matrix_exp(a, t: float = 1.0, eig: EigenDecomposition | None = None) -> np.ndarray:
    """``exp(t a)``.

    Uses the eigendecomposition when it reconstructs ``a`` to within
    ``EIG_RESIDUAL_TOL``; otherwise falls back to scaling and squaring.
    """
    a = as_square(a)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    n = a.shape[0]
    if t == 0.0:
        return np.eye(n, dtype=a.dtype)
    if eig is None:
        eig = eigendecompose(a)
    if eig.accepted:
        out = eig.function(lambda v: np.exp(t * v))
        if np.isrealobj(a) and np.iscomplexobj(out):
            out = out.real.copy()
        return out
    return sla.expm(t * a)


def _lu_checked(m: np.ndarray):
    lu, piv, info = lapack.dgetrf(m) if np.isrealobj(m) else lapack.zgetrf(m)
    if info > 0:
        raise SpectralCollision("shifted matrix is exactly singular")
    anorm = np.linalg.norm(m, 1)
    gecon = lapack.dgecon if np.isrealobj(m) else lapack.zgecon
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond < 1e-14:
        raise SpectralCollision(f"shifted matrix numerically singular (rcond={rcond:.2e})")
    return lu, piv


def resolvent_apply(a, lam: complex, rhs) -> np.ndarray:
    """Solve ``(lam I - a) X = rhs``."""
    a = as_square(a)
    rhs = np.asarray(rhs)
    n = a.shape[0]
    if isinstance(lam, complex) and lam.imag == 0:
        lam = lam.real
    dtype = np.result_type(a, rhs, complex if np.iscomplex(lam) else float)
    shifted = (lam * np.eye(n) - a).astype(dtype)
    lu, piv = _lu_checked(shifted)
    x = sla.lu_solve((lu, piv), rhs.astype(dtype), check_finite=False)
    rnorm = np.linalg.norm(rhs) or 1.0
    resid = np.linalg.norm(shifted @ x - rhs) / rnorm
    if resid > RESOLVENT_RESIDUAL_TOL:
        raise SpectralCollision(f"resolvent residual {resid:.2e} too large at lambda={lam}")
    return x


def resolvent(a, lam: complex) -> np.ndarray:
    a = as_square(a)
    return resolvent_apply(a, lam, np.eye(a.shape[0]))


# ---------------------------------------------------------------------------
# special functions


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise ValueError("gamma_fn is defined here for x > 0 only")
    return math.gamma(x)


def mittag_leffler(alpha: float, z: float) -> float:
    """One-parameter Mittag-Leffler function ``sum z^k / Gamma(k alpha + 1)``.

    Only real ``z >= 0`` is supported; the terms are then positive and the
    partial sums are accumulated in log space to postpone overflow.
    """
    if not alpha > 0 or alpha > 1:
        raise ValueError("alpha must lie in (0, 1]")
    if z < 0:
        raise ValueError("z must be nonnegative")
    if z == 0:
        return 1.0
    logz = math.log(z)
    total = 0.0
    prev = math.inf
    k = 0
    while True:
        logterm = k * logz - math.lgamma(k * alpha + 1.0)
        if logterm > 709.0:
            raise OverflowError(f"E_{alpha}({z}) exceeds double range")
        term = math.exp(logterm)
        total += term
        if not math.isfinite(total):
            raise OverflowError(f"E_{alpha}({z}) exceeds double range")
        if term <= 1e-16 * total and term <= prev:
            return total
        prev = term
        k += 1
        if k > 100000:
            raise NumericalAbort("Mittag-Leffler series did not converge")


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def gauss_legendre01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def composite_gauss(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre01(order)
    edges = np.asarray(edges, dtype=float)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def _graded_unit_edges(panels: int, levels: int) -> np.ndarray:
    # uniform panels on [0,1] with the first one split dyadically toward 0
    uniform = np.linspace(0.0, 1.0, panels + 1)
    first = uniform[1] * 0.5 ** np.arange(levels, 0, -1)
    return np.concatenate([[0.0], first, uniform[1:]])


def singular_rule(
    t: float,
    beta: float,
    *,
    beta_right: float | None = None,
    panels: int = 64,
    order: int = 8,
    levels: int = 30,
    complement: bool = False,
) -> tuple[np.ndarray, ...]:
    """Nodes and weights for ``int_0^t f(s) ds`` with ``f ~ s^-beta`` at 0.

    The map ``s = T sigma^(1/(1-beta))`` turns the algebraic endpoint
    behaviour into a bounded integrand; composite Gauss-Legendre is then
    applied in ``sigma``.  With ``beta_right`` set, the interval is split at
    ``t/2`` and the mirrored map handles ``(t-s)^-beta_right`` as well.
    With ``complement`` the triple ``(s, t - s, weights)`` is returned, the
    middle entry computed without cancellation near ``s = t``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    for b in (beta, beta_right):
        if b is not None and b >= 1:
            raise ValueError("exponent >= 1 gives a non-integrable singularity")
    sig, wsig = composite_gauss(_graded_unit_edges(panels, levels), order)

    def mapped(length: float, b: float):
        p = 1.0 / (1.0 - b)
        return length * sig**p, length * p * sig ** (p - 1.0) * wsig

    if beta_right is None:
        s, w = mapped(t, beta)
        return (s, t - s, w) if complement else (s, w)
    sl, wl = mapped(0.5 * t, beta)
    sr, wr = mapped(0.5 * t, beta_right)
    nodes = np.concatenate([sl, t - sr[::-1]])
    weights = np.concatenate([wl, wr[::-1]])
    if complement:
        return nodes, np.concatenate([t - sl, sr[::-1]]), weights
    return nodes, weights


def singular_quadrature(
    f: Callable[[float], object],
    t: float,
    beta: float,
    *,
    beta_right: float | None = None,
    panels: int = 64,
    order: int = 8,
    complement: bool = False,
):
    """Integrate ``f`` over ``(0, t)``; ``f`` may return scalars or arrays.

    With ``complement`` the integrand is called as ``f(s, t - s)``.
    """
    nodes, comp, weights = singular_rule(t, beta, beta_right=beta_right, panels=panels,
                                         order=order, complement=True)
    total = None
    for s, c, w in zip(nodes, comp, weights):
        val = w * np.asarray(f(float(s), float(c)) if complement else f(float(s)))
        total = val if total is None else total + val
    if np.ndim(total) == 0:
        return float(np.real_if_close(total))
    return total


# ---------------------------------------------------------------------------
# contour integrals


@dataclass(frozen=True)
class ContourNodes:
    """Equispaced trapezoidal nodes for ``(1/2 pi i) * contour integral``."""

    center: complex
    radius: float
    m: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def circle(cls, center: complex, radius: float, m: int = 64) -> "ContourNodes":
        if not radius > 0:
            raise ValueError("radius must be positive")
        if m < 1:
            raise ValueError("need at least one node")
        e = np.exp(2j * np.pi * np.arange(m) / m)
        return cls(complex(center), float(radius), int(m), center + radius * e, radius * e / m)


def contour_projection_quadrature(a, contour: ContourNodes, *, eigvals=None,
                                  eig: EigenDecomposition | None = None) -> np.ndarray:
    """Riesz projection ``(1/2 pi i) oint R(lambda, a) d lambda`` by trapezoid.

    With an accepted ``eig`` the same rule is summed in the eigenbasis,
    ``V diag(sum_j w_j / (lambda_j - mu)) V^-1``; otherwise each node costs
    one checked LU solve.
    """
    a = as_square(a)
    if eig is not None and eig.accepted:
        eigvals = eig.values
    elif eigvals is None:
        eigvals = np.linalg.eigvals(a)
    dist = np.abs(np.abs(np.asarray(eigvals) - contour.center) - contour.radius)
    if dist.size and dist.min() < 1e-8:
        raise SpectralCollision("an eigenvalue lies on the integration contour")
    if eig is not None and eig.accepted:
        filt = np.sum(contour.weights[:, None] / (contour.nodes[:, None] - eig.values[None, :]), axis=0)
        return eig.function(lambda v: filt)
    n = a.shape[0]
    eye = np.eye(n)
    p = np.zeros((n, n), dtype=complex)
    for lam, w in zip(contour.nodes, contour.weights):
        p += w * resolvent_apply(a, lam, eye)
    return p


# ---------------------------------------------------------------------------
# phi functions for exponential product integration


def phi_functions(z: np.ndarray, kmax: int) -> np.ndarray:
    """``phi_k(z) = int_0^1 e^{z(1-x)} x^{k-1}/(k-1)! dx`` for k = 0..kmax.

    Returns an array of shape ``(kmax + 1,) + z.shape``.  Small ``|z|`` uses
    the Taylor series, the rest the downward-safe recurrence
    ``phi_{k+1} = (phi_k - 1/k!) / z``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty((kmax + 1,) + z.shape)
    small = np.abs(z) < 2.0
    zs = np.where(small, z, 0.0)
    zl = np.where(small, 1.0, z)
    out[0] = np.exp(z)
    rec = np.exp(zl)
    fact = 1.0
    for k in range(1, kmax + 1):
        rec = (rec - 1.0 / fact) / zl
        fact *= k
        out[k] = rec
    if np.any(small):
        for k in range(1, kmax + 1):
            acc = np.zeros_like(zs)
            term = np.full_like(zs, 1.0 / math.factorial(k))
            for i in range(40):
                acc = acc + term
                term = term * zs / (i + k + 1)
            out[k] = np.where(small, acc, out[k])
    return out
