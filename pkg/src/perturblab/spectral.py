"""Contour spectral projections, eigenpair tracking along ``A + kappa B`` and
gap distances between subspaces and operator graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import lattice
from .numkernel import (
    ContourNodes,
    SpectralCollision,
    as_square,
    contour_projection_quadrature,
    eigendecompose,
    resolvent,
    spectral_norm,
)
from .operators import DiscreteOperator, PerturbationFamily

COLLISION_TOL = 1e-8
# projections carry ~1e-12 quadrature noise; smaller changes are not signal
ROUNDOFF_FLOOR = 1e-10


def _matrix_and_space(a):
    if isinstance(a, DiscreteOperator):
        return a.matrix, a.space
    return as_square(a), None


def _norm2(m: np.ndarray, space) -> float:
    return lattice.op_norm(m, space, "L2", "L2") if space is not None else spectral_norm(m)


def _check_contour(eigvals, center: complex, r: float) -> None:
    d = np.abs(np.abs(np.asarray(eigvals) - center) - r)
    if d.size and d.min() < COLLISION_TOL:
        raise SpectralCollision(f"eigenvalue within {d.min():.1e} of the contour |z - {center}| = {r}")


# ---------------------------------------------------------------------------
# projections


@dataclass
class Projection:
    matrix: np.ndarray
    rank: int
    m: int
    change: float
    idempotency: float


def spectral_projection(a, center: complex, r: float, m: int = 64, *, m_max: int = 1024,
                        tol: float = 1e-12, method: str = "auto") -> Projection:
    """Riesz projection for the disk ``|z - center| < r``.

    The trapezoid rule starts at ``m`` nodes and doubles, reusing the old
    nodes, until successive projections differ by less than ``tol``
    (relative to ``max(1, ||P||)``).  ``method`` is ``"resolvent"`` (one LU
    solve per node), ``"eigen"`` (the same rule summed in the eigenbasis) or
    ``"auto"``, which takes the eigenbasis when it is well conditioned.
    """
    if method not in ("auto", "eigen", "resolvent"):
        raise ValueError(f"unknown method {method!r}")
    mat, _ = _matrix_and_space(a)
    eig = None
    if method != "resolvent":
        eig = eigendecompose(mat)
        if not eig.accepted:
            if method == "eigen":
                raise SpectralCollision("eigenbasis too ill-conditioned for the eigen method")
            eig = None
    ev = eig.values if eig is not None else np.linalg.eigvals(mat)
    _check_contour(ev, center, r)

    def quad(nodes):
        return contour_projection_quadrature(mat, nodes, eigvals=ev, eig=eig)

    p = quad(ContourNodes.circle(center, r, m))
    change = np.inf
    while m < m_max:
        # nodes midway between the current ones
        e = np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
        odd = ContourNodes(complex(center), float(r), m, center + r * e, r * e / m)
        p_new = 0.5 * (p + quad(odd))
        change = spectral_norm(p_new - p) / max(1.0, spectral_norm(p_new))
        p, m = p_new, 2 * m
        if change < tol:
            break
    else:
        raise SpectralCollision(f"contour quadrature did not settle by m = {m_max}")
    rank = int(round(np.trace(p).real))
    return Projection(p, rank, m, float(change), spectral_norm(p @ p - p))


def beta_kappa(B, A, lam0: complex, r: float, m: int = 64, kappa: float = 1.0) -> float:
    """``sup_{|lam - lam0| = r} ||kappa B R(lam, A)||_{2->2}`` over ``m`` nodes."""
    return abs(kappa) * contour_sup(B, A, lam0, r, m)


def contour_sup(B, A, lam0: complex, r: float, m: int = 64) -> float:
    """``max_j ||B R(lam_j, A)||_{2->2}`` over the contour nodes."""
    amat, space = _matrix_and_space(A)
    bmat, _ = _matrix_and_space(B)
    _check_contour(np.linalg.eigvals(amat), lam0, r)
    nodes = ContourNodes.circle(lam0, r, m).nodes
    return max(_norm2(bmat @ resolvent(amat, lam), space) for lam in nodes)


# ---------------------------------------------------------------------------
# eigenpair tracking


@dataclass
class SpectralTrack:
    kappa_grid: list[float]
    lam: list[complex]
    ranks: list[int]
    min_ratio_to_u: list[float]
    min_ratio_normalized: list[float]
    beta: list[float]
    projection_change: list[float]
    idempotency: list[float]
    eig_residual: list[float]
    c: float
    delta_empirical: float
    projections: list[np.ndarray] = field(default_factory=list, repr=False)
    eigvecs: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def simplicity(self) -> list[int]:
        return self.ranks

    @property
    def all_simple(self) -> bool:
        return all(k == 1 for k in self.ranks)

    @property
    def max_imag(self) -> float:
        return float(max((abs(z.imag) for z in self.lam), default=0.0))

    @property
    def beta_vanishes(self) -> bool:
        """``beta`` at the smallest nonzero ``|kappa|`` below a tenth of its largest value."""
        pairs = sorted((abs(k), b) for k, b in zip(self.kappa_grid, self.beta) if k != 0)
        if len(pairs) < 2:
            return False
        return pairs[0][1] < 0.1 * pairs[-1][1]

    def rows(self) -> list[tuple]:
        return [(k, z.real, z.imag, rk, mr, b) for k, z, rk, mr, b in
                zip(self.kappa_grid, self.lam, self.ranks, self.min_ratio_to_u, self.beta)]

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa_grid, "re_lambda": [z.real for z in self.lam],
            "im_lambda": [z.imag for z in self.lam], "rank": self.ranks,
            "min_ratio": self.min_ratio_to_u, "min_ratio_normalized": self.min_ratio_normalized,
            "beta_kappa": self.beta, "projection_change": self.projection_change,
            "idempotency": self.idempotency, "eig_residual": self.eig_residual,
            "c": self.c, "delta_empirical": self.delta_empirical,
            "all_simple": self.all_simple, "beta_vanishes": self.beta_vanishes,
        }


def symmetric_prefix(kappas, ok) -> float:
    """Largest ``d`` such that every grid point with ``|kappa| <= d`` is ``ok``.

    Returns 0 when only ``kappa = 0`` qualifies and ``-1`` when nothing does.
    """
    d = -1.0
    for k, good in sorted(zip(np.abs(kappas), ok)):
        if not good:
            break
        d = float(k)
    return d


def track_eigenpair(family: PerturbationFamily, lam0: float, r: float, kappa_grid, v0, u=None,
                    m: int = 64) -> SpectralTrack:
    """Follow the eigenvalue in ``|z - lam0| < r`` along the family.

    ``lam(kappa) = tr(A(kappa) P(kappa)) / tr P(kappa)`` and
    ``v(kappa) = P(kappa) v0`` without renormalization.  The empirical
    ``delta`` is the largest symmetric grid prefix on which the projection
    has rank one and ``min_ratio(v, u) >= c/2``.
    """
    space = family.space
    uu = space.ones() if u is None else lattice.weight_vector(u)
    v0 = np.asarray(v0)
    c = lattice.min_ratio(v0, uu)
    if not c > 0:
        raise ValueError("v0 must dominate a positive multiple of u")
    base_sup = contour_sup(family.direction, family.base, lam0, r, m)
    v0_norm = lattice.norm(v0, space)
    kappas = [float(k) for k in kappa_grid]
    p0 = spectral_projection(family.base.matrix, lam0, r, m).matrix
    nan = float("nan")
    out: dict[str, list] = {k: [] for k in ("lam", "ranks", "mr", "mrn", "beta", "chg", "idem",
                                            "res", "P", "v")}
    for k in kappas:
        a = family.assemble(k)
        out["beta"].append(abs(k) * base_sup)
        try:
            proj = spectral_projection(a, lam0, r, m)
        except SpectralCollision:
            # an eigenvalue reached the contour: simplicity is lost here
            for key, val in (("lam", complex(nan, nan)), ("ranks", -1), ("mr", nan), ("mrn", nan),
                             ("chg", nan), ("idem", nan), ("res", nan), ("P", None), ("v", None)):
                out[key].append(val)
            continue
        p = proj.matrix
        tr = np.trace(p)
        lam = complex(np.trace(a @ p) / tr) if abs(tr) > 0.5 else complex(nan, nan)
        v = p @ v0
        if family.base.is_real and family.direction.is_real:
            v = v.real if np.max(np.abs(v.imag), initial=0.0) <= 1e-10 * np.max(np.abs(v)) else v
        vr = np.real(v)
        nv = lattice.norm(vr, space)
        out["lam"].append(lam)
        out["ranks"].append(proj.rank)
        out["mr"].append(lattice.min_ratio(vr, uu))
        out["mrn"].append(lattice.min_ratio(vr * (v0_norm / nv), uu) if nv > 0 else 0.0)
        out["chg"].append(_norm2(p - p0, space))
        out["idem"].append(proj.idempotency)
        scale = max(spectral_norm(a), 1.0)
        out["res"].append(spectral_norm((a - lam * np.eye(space.n)) @ p) / scale
                          if np.isfinite(lam.real) else nan)
        out["P"].append(p)
        out["v"].append(v)
    ok = [rk == 1 and mr >= 0.5 * c for rk, mr in zip(out["ranks"], out["mr"])]
    delta = symmetric_prefix(kappas, ok)
    return SpectralTrack(kappas, out["lam"], out["ranks"], out["mr"], out["mrn"], out["beta"],
                         out["chg"], out["idem"], out["res"], float(c), delta, out["P"], out["v"])


# ---------------------------------------------------------------------------
# analyticity of kappa -> P(kappa)


@dataclass
class AnalyticityReport:
    rho: float
    m: int
    taylor_norms: list[float]
    decay_ratio: float
    fit_range: tuple[int, int]
    ranks: list[int]

    @property
    def verdict(self) -> str:
        finite = all(np.isfinite(self.taylor_norms))
        return "PASS" if finite and 0 <= self.decay_ratio < 0.9 else "FAIL"

    def to_dict(self) -> dict:
        return {"rho": self.rho, "m": self.m, "taylor_norms": self.taylor_norms,
                "decay_ratio": self.decay_ratio, "fit_range": list(self.fit_range),
                "ranks": self.ranks, "verdict": self.verdict}


def taylor_coefficients(family: PerturbationFamily, lam0: complex, r: float, rho: float,
                        m: int = 64, kmax: int = 10, contour_m: int = 64):
    """``P_k = (1/m) sum_j P(rho e^{i theta_j}) e^{-i k theta_j} rho^-k`` for k = 0..kmax."""
    if m <= kmax:
        raise ValueError("need more samples than coefficients")
    theta = 2 * np.pi * np.arange(m) / m
    samples, ranks = [], []
    for th in theta:
        proj = spectral_projection(family.assemble(rho * np.exp(1j * th)), lam0, r, contour_m)
        if proj.rank != 1:
            raise SpectralCollision(f"rank {proj.rank} at kappa = {rho:g} e^(i {th:.3f})")
        samples.append(proj.matrix)
        ranks.append(proj.rank)
    stack = np.asarray(samples)
    coeffs = [np.tensordot(np.exp(-1j * k * theta), stack, axes=1) / m / rho**k
              for k in range(kmax + 1)]
    return coeffs, ranks


def analyticity_test(family: PerturbationFamily, lam0: complex, r: float, rho: float,
                     m: int = 64, u=None, kmax: int = 10) -> AnalyticityReport:
    """Geometric decay of ``||P_k||_{gauge} rho^k`` for the Taylor series of ``P``.

    ``decay_ratio`` is ``exp(slope)`` of a line through ``log`` of the scaled
    norms over ``k = 1..kmax``, restricted to values above the contour
    quadrature roundoff :data:`ROUNDOFF_FLOOR`.
    """
    space = family.space
    uu = space.ones() if u is None else lattice.weight_vector(u)
    coeffs, ranks = taylor_coefficients(family, lam0, r, rho, m, kmax)
    norms = [lattice.op_norm(pk, space, "gauge", "gauge", u=uu) * rho**k
             for k, pk in enumerate(coeffs)]
    floor = ROUNDOFF_FLOOR * max(norms[0], 1.0)
    ks = [k for k in range(1, kmax + 1) if norms[k] > floor]
    if len(ks) < 2:
        ratio = 0.0
        rng = (1, kmax)
    else:
        slope = np.polyfit(ks, np.log([norms[k] for k in ks]), 1)[0]
        ratio = float(np.exp(slope))
        rng = (ks[0], ks[-1])
    return AnalyticityReport(rho, m, [float(x) for x in norms], ratio, rng, ranks)


# ---------------------------------------------------------------------------
# Neumann series for the perturbed resolvent


@dataclass
class NeumannReport:
    lam: complex
    beta: float
    residuals: list[float]
    tail_bounds: list[float]
    resolvent_norm: float
    difference: float
    inequality_slack: float

    @property
    def verdict(self) -> str:
        ok = self.inequality_slack >= 0 and all(
            res <= b * (1 + 1e-8) + 1e-13 for res, b in zip(self.residuals, self.tail_bounds))
        return "PASS" if ok else "FAIL"


def neumann_resolvent_check(A, B, lam: complex, kmax: int = 20) -> NeumannReport:
    """Partial sums of ``R(lam, A) sum_k (B R(lam, A))^k`` against a direct solve.

    Checks the tail bound ``beta^{k+1} ||R_A|| / (1 - beta)`` for each partial
    sum and ``||R_{A+B} - R_A|| <= beta/(1 - beta) ||R_A||``.
    """
    amat, space = _matrix_and_space(A)
    bmat, _ = _matrix_and_space(B)
    ra = resolvent(amat, lam)
    k_op = bmat @ ra
    beta = _norm2(k_op, space)
    if not beta < 1:
        raise ValueError(f"||B R(lam, A)|| = {beta:.3g} is not below 1")
    rab = resolvent(amat + bmat, lam)
    ra_norm = _norm2(ra, space)
    partial = ra.astype(complex)
    power = np.eye(amat.shape[0], dtype=complex)
    residuals, bounds = [], []
    for k in range(kmax + 1):
        if k > 0:
            power = power @ k_op
            partial = partial + ra @ power
        residuals.append(_norm2(partial - rab, space))
        bounds.append(beta ** (k + 1) * ra_norm / (1 - beta))
    diff = _norm2(rab - ra, space)
    slack = beta / (1 - beta) * ra_norm - diff
    return NeumannReport(complex(lam), beta, residuals, bounds, ra_norm, diff, float(slack))


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True)
class GapResult:
    delta_MN: float
    delta_NM: float

    @property
    def gap(self) -> float:
        return max(self.delta_MN, self.delta_NM)

    def to_dict(self) -> dict:
        return {"delta_MN": self.delta_MN, "delta_NM": self.delta_NM, "gap": self.gap}


def _orthonormal(basis: np.ndarray, weights) -> np.ndarray:
    basis = np.asarray(basis)
    if basis.ndim != 2:
        raise ValueError("a basis must be a 2-D array of column vectors")
    if basis.shape[1] == 0:
        return basis.astype(complex)
    sw = np.sqrt(weights)[:, None] if weights is not None else 1.0
    u, s, _ = np.linalg.svd(sw * basis, full_matrices=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ValueError("basis columns are linearly dependent")
    return u


def _delta(qm: np.ndarray, qn: np.ndarray) -> float:
    if qm.shape[1] == 0:
        return 0.0
    resid = qm - qn @ (qn.conj().T @ qm) if qn.shape[1] else qm
    return float(min(max(np.linalg.norm(resid, 2), 0.0), 1.0))


def subspace_gap(M, N, weights=None) -> GapResult:
    """One-sided distances ``delta(M, N) = ||(I - Q_N) Q_M||`` and their max.

    Columns of ``M`` and ``N`` span the subspaces; ``weights`` selects the
    weighted L2 inner product.
    """
    qm = _orthonormal(M, weights)
    qn = _orthonormal(N, weights)
    if qm.shape[0] != qn.shape[0]:
        raise ValueError("subspaces live in spaces of different dimension")
    return GapResult(_delta(qm, qn), _delta(qn, qm))


def graph_basis(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    return np.vstack([np.eye(n), a])


def graph_gap(A, B_pert) -> GapResult:
    """Gap between the graphs of ``A`` and ``A + B_pert`` in the product L2 space."""
    amat, space = _matrix_and_space(A)
    bmat, _ = _matrix_and_space(B_pert)
    if amat.shape != bmat.shape:
        raise ValueError("operators act on different spaces")
    w = None if space is None else np.concatenate([space.weights, space.weights])
    return subspace_gap(graph_basis(amat), graph_basis(amat + bmat), w)


@dataclass
class StabilityReport:
    kappas: list[float]
    beta: list[float]
    projection_change: list[float]
    spearman: float

    def to_dict(self) -> dict:
        return {"kappas": self.kappas, "beta": self.beta,
                "projection_change": self.projection_change, "spearman": self.spearman}


def projection_stability(family: PerturbationFamily, lam0: complex, r: float, kappas,
                         m: int = 64) -> StabilityReport:
    """``||P(kappa) - P(0)||`` against ``beta_kappa`` along a sequence of ``kappa``.

    The Spearman rank correlation measures how monotonically the projection
    returns to ``P(0)`` as ``beta`` shrinks.
    """
    space = family.space
    sup = contour_sup(family.direction, family.base, lam0, r, m)
    p0 = spectral_projection(family.base.matrix, lam0, r, m).matrix
    ks = [float(k) for k in kappas]
    betas = [abs(k) * sup for k in ks]
    changes = [_norm2(spectral_projection(family.assemble(k), lam0, r, m).matrix - p0, space)
               for k in ks]
    rho = float(stats.spearmanr(betas, changes).statistic) if len(ks) > 2 else float("nan")
    return StabilityReport(ks, betas, changes, rho)
