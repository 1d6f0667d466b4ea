"""Semigroup evaluation, the Dyson-Phillips series and variation of parameters.

The production route to a perturbed semigroup is the direct exponential of
``A + kappa B``.  :func:`dyson_phillips` rebuilds the same object term by
term from ``S_{k+1}(t) = int_0^t S_k(t-s) B T(s) ds`` and is used as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import lattice
from .numkernel import (
    EigenDecomposition,
    NumericalAbort,
    eigendecompose,
    gauss_legendre01,
    matrix_exp,
    phi_functions,
    singular_rule,
)
from .operators import DiscreteOperator, PerturbationFamily, symmetry_residual


class SemigroupEvaluator:
    """``T(t) = exp(t G)`` for a fixed generator ``G`` (a :class:`DiscreteOperator`)."""

    def __init__(self, generator: DiscreteOperator):
        self.generator = generator
        self.space = generator.space

    @cached_property
    def eig(self) -> EigenDecomposition:
        g = self.generator
        if g.is_symmetric_L2:
            return eigendecompose(g.matrix, g.space.weights)
        return eigendecompose(g.matrix)

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)

    def evaluate(self, t: float, shift: float = 0.0) -> np.ndarray:
        """``exp(t (G - shift))``; the shift keeps rescaled semigroups in range."""
        if t < 0:
            raise ValueError("semigroups are only defined for t >= 0")
        if t == 0:
            return np.eye(self.space.n)
        eig = self.eig
        if eig.accepted:
            out = eig.function(lambda v: np.exp(t * (v - shift)))
            if self.generator.is_real:
                out = out.real
            return out
        g = self.generator.matrix
        if shift:
            return matrix_exp(g - shift * np.eye(len(g)), t)
        return matrix_exp(g, t, eig)

    def spectral_bound(self) -> float:
        return float(np.max(self.eig.values.real))


def perturbed_evaluator(family: PerturbationFamily, kappa: float,
                        kappa_max: float | None = None) -> SemigroupEvaluator:
    if kappa_max is not None and abs(kappa) > kappa_max:
        raise ValueError(f"|kappa| = {abs(kappa)} exceeds kappa_max = {kappa_max}")
    return SemigroupEvaluator(family.operator(kappa))


def semigroup_symmetry_residual(ev: SemigroupEvaluator, t: float) -> float:
    return symmetry_residual(ev.evaluate(t), ev.space)


# ---------------------------------------------------------------------------
# Dyson-Phillips series


@dataclass
class DysonPhillipsResult:
    t: float
    K: int
    panels: int
    partial_terms: list[np.ndarray]
    term_norms: list[float]
    term_norms_gauge: list[float]
    oracle_error: float
    oracle_errors_partial: list[float] = field(default_factory=list)
    ratio_k: int | None = None

    @property
    def sum(self) -> np.ndarray:
        return np.sum(self.partial_terms, axis=0)

    def ratios(self) -> list[float]:
        n = self.term_norms
        return [n[k + 1] / n[k] if n[k] > 0 else 0.0 for k in range(len(n) - 1)]


def geometric_edges(t: float, panels: int, smallest: float = 1e-9) -> np.ndarray:
    """Panel edges ``0, t q^(1-P), ..., t q^-1, t`` resolving the stiff start."""
    if panels < 2:
        return np.array([0.0, t])
    ratio = smallest ** (-1.0 / (panels - 1))
    return np.concatenate([[0.0], t * ratio ** (np.arange(1 - panels, 1, dtype=float))])


def _lagrange_monomial(nodes: np.ndarray) -> np.ndarray:
    # C[q, m]: coefficient of xi^m in the Lagrange polynomial for node q
    v = np.vander(nodes, increasing=True)
    return np.linalg.inv(v).T


def _low_rank(m: np.ndarray, tol: float = 1e-13):
    u, s, vh = np.linalg.svd(m)
    r = int(np.sum(s > tol * (s[0] if s.size and s[0] > 0 else 1.0)))
    if r == 0:
        return np.zeros((m.shape[0], 1), m.dtype), np.zeros((1, m.shape[1]), m.dtype)
    return u[:, :r] * s[:r], vh[:r]


def dyson_phillips(
    a: DiscreteOperator,
    b: DiscreteOperator,
    t: float,
    K: int = 12,
    panels: int = 32,
    order: int = 8,
    u=None,
) -> DysonPhillipsResult:
    """Terms ``S_0 .. S_K`` of the Dyson-Phillips series at time ``t``.

    Work happens in the eigenbasis of ``A`` where ``T`` is diagonal.  On each
    panel the factor ``S_k(sigma) B`` is interpolated at Gauss nodes and the
    remaining ``T(t - sigma)`` is integrated exactly against the interpolant
    (exponential product quadrature).  Panels grade geometrically toward
    ``sigma = 0`` where the stiff modes of ``T`` live.  All terms are
    advanced panel by panel, so memory stays at ``O(K n^2)``.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    if K < 1:
        raise ValueError("K must be at least 1")
    space = a.space
    eig = eigendecompose(a.matrix, space.weights) if a.is_symmetric_L2 else eigendecompose(a.matrix)
    if not eig.accepted:
        raise NumericalAbort("Dyson-Phillips needs a diagonalizable unperturbed generator")
    lam = eig.values
    real = a.is_real and b.is_real and np.all(np.abs(lam.imag) == 0)
    if real:
        lam = lam.real
    bt = eig.inverse @ b.matrix @ eig.vectors
    if real:
        bt = bt.real
    n = space.n
    dtype = float if real else complex
    bl, br = _low_rank(bt)
    lowrank = bl.shape[1] < n // 4

    xi, _ = gauss_legendre01(order)
    coef = _lagrange_monomial(xi)
    targets = np.concatenate([xi, [1.0]])
    fact = np.array([math.factorial(m) for m in range(order)], dtype=float)
    edges = geometric_edges(t, panels)

    # state at the left edge of the current panel, k = 1..K
    edge_vals = np.zeros((K, n, n), dtype=dtype)
    lam_r = lam.real if not real else lam
    for p in range(len(edges) - 1):
        lo, h = edges[p], edges[p + 1] - edges[p]
        # exact weights omega[target, q, j]
        z = np.multiply.outer(targets, lam_r * h) if real else np.multiply.outer(targets, lam * h)
        if real:
            phis = phi_functions(z, order)  # (order+1, targets, n)
        else:
            phis = _phi_complex(z, order)
        rho_pow = targets[:, None] ** (np.arange(order) + 1)[None, :]  # (targets, m)
        mom = phis[1:] * (fact[:, None, None] * rho_pow.T[:, :, None])  # (m, targets, n)
        # (n, q, targets) layout for batched products over the column index
        omega = h * np.einsum("qm,mrj->jqr", coef, mom)
        decay = phis[0]  # exp(lam h rho), (targets, n)
        # S_0 at the panel's Gauss nodes is diagonal
        s0_diag = np.exp(np.multiply.outer(lo + h * xi, lam))  # (q, n)
        g = s0_diag[:, :, None] * bt[None, :, :]
        for k in range(K):
            # new[r] = edge diag(decay[r]) + sum_q g[q] diag(omega[:, q, r])
            mixed = np.matmul(g.transpose(2, 1, 0), omega).transpose(2, 1, 0)
            new = edge_vals[k][None, :, :] * decay[:, None, :] + mixed
            edge_vals[k] = new[-1]
            if k + 1 < K:
                nodes_k = new[:-1]
                g = (nodes_k @ bl) @ br if lowrank else nodes_k @ bt
    terms = [eig.function(lambda v: np.exp(t * v))]
    for k in range(K):
        terms.append(eig.vectors @ edge_vals[k] @ eig.inverse)
    if a.is_real and b.is_real:
        terms = [np.real(m) for m in terms]
    uu = space.ones() if u is None else lattice.weight_vector(u)
    norms2 = [lattice.op_norm(m, space, "L2", "L2") for m in terms]
    normsg = [lattice.op_norm(m, space, "gauge", "gauge", u=uu) for m in terms]
    exact = matrix_exp(a.matrix + b.matrix, t)
    scale = lattice.op_norm(exact, space, "L2", "L2")
    partial = np.zeros_like(exact, dtype=terms[0].dtype)
    errs = []
    for m in terms:
        partial = partial + m
        errs.append(lattice.op_norm(partial - exact, space, "L2", "L2") / scale)
    res = DysonPhillipsResult(t, K, panels, terms, norms2, normsg, errs[-1], errs)
    for k, r in enumerate(res.ratios()):
        if k > 0 and r < 0.1:
            res.ratio_k = k + 1
            break
    return res


def _phi_complex(z: np.ndarray, kmax: int) -> np.ndarray:
    # series / recurrence on complex arguments (rarely used: non-normal A)
    out = np.empty((kmax + 1,) + z.shape, dtype=complex)
    out[0] = np.exp(z)
    small = np.abs(z) < 2.0
    zl = np.where(small, 1.0, z)
    rec = np.exp(zl)
    f = 1.0
    for k in range(1, kmax + 1):
        rec = (rec - 1.0 / f) / zl
        f *= k
        out[k] = rec
    zs = np.where(small, z, 0.0)
    for k in range(1, kmax + 1):
        acc = np.zeros_like(zs)
        term = np.full_like(zs, 1.0 / math.factorial(k))
        for i in range(40):
            acc = acc + term
            term = term * zs / (i + k + 1)
        out[k] = np.where(small, acc, out[k])
    return out


def term_bound(C: float, beta: float, t: float, k: int) -> float:
    """``C^{k+1} Gamma(1-beta)^k t^{k(1-beta)} / Gamma(k(1-beta)+1)``."""
    g = 1.0 - beta
    return C ** (k + 1) * math.gamma(g) ** k * t ** (k * g) / math.gamma(k * g + 1.0)


# ---------------------------------------------------------------------------
# variation of parameters


def variation_residual(a: DiscreteOperator, b: DiscreteOperator, t: float, panels: int = 256,
                       order: int = 4, grading: float = 0.5) -> float:
    """``||S(t) - T(t) - int_0^t S(t-s) B T(s) ds|| / ||S(t)||`` in L2.

    ``S`` comes from the direct exponential of ``A + B``.  The integral uses
    the graded rule of :func:`numkernel.singular_rule` at both ends; the
    integrand is evaluated in the two eigenbases so each node costs ``O(n^2)``.
    """
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    space = a.space
    ea = eigendecompose(a.matrix, space.weights) if a.is_symmetric_L2 else eigendecompose(a.matrix)
    pert = a.matrix + b.matrix
    sym = a.is_symmetric_L2 and b.is_symmetric_L2
    es = eigendecompose(pert, space.weights) if sym else eigendecompose(pert)
    if not (ea.accepted and es.accepted):
        raise NumericalAbort("variation residual needs diagonalizable generators")
    nodes, weights = singular_rule(t, grading, beta_right=grading, panels=panels, order=order)
    c = es.inverse @ b.matrix @ ea.vectors
    left = np.exp(np.multiply.outer(t - nodes, es.values)) * weights[:, None]  # (N, n)
    right = np.exp(np.multiply.outer(nodes, ea.values))  # (N, n)
    f = left.T @ right
    integral = es.vectors @ (c * f) @ ea.inverse
    s_t = es.function(lambda v: np.exp(t * v))
    t_t = ea.function(lambda v: np.exp(t * v))
    resid = s_t - t_t - integral
    if a.is_real and b.is_real:
        resid, s_t = resid.real, s_t.real
    return lattice.op_norm(resid, space, "L2", "L2") / lattice.op_norm(s_t, space, "L2", "L2")
