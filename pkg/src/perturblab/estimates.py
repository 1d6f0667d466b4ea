"""Fits and certificates for the smoothing and perturbation estimates.

Every record keeps the raw samples it was computed from, so a verdict can
be re-derived from a saved report alone.  Verdicts are the strings
``PASS``, ``FAIL`` and ``INCONCLUSIVE``; the last one marks a power-law fit
whose ``r^2`` is below :data:`R2_GATE`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import lattice
from .numkernel import gamma_fn, mittag_leffler, singular_quadrature
from .operators import DiscreteOperator, PerturbationFamily
from .semigroup import SemigroupEvaluator, perturbed_evaluator

PASS, FAIL, INCONCLUSIVE = "PASS", "FAIL", "INCONCLUSIVE"
R2_GATE = 0.98
ENVELOPE_SLACK = 0.1
INTERPOLATION_SLACK = 0.15
# log-span below which ||B T(t)|| counts as bounded (beta = 0) whatever r^2
BOUNDED_LOG_SPAN = 0.1


def saturation_floor(space: lattice.GridSpace, order: float) -> float:
    """Smallest usable time ``3 h^order``; below it grid norms plateau."""
    return 3.0 * space.h ** (order if order > 0 else 2.0)


def geometric_samples(lo: float, hi: float, count: int) -> np.ndarray:
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    if count < 2:
        raise ValueError("need at least two samples")
    return np.geomspace(lo, hi, count)


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    stderr: float
    ci95: float

    @classmethod
    def of(cls, t, y) -> "LogLogFit":
        t, y = np.asarray(t, float), np.asarray(y, float)
        if np.any(y <= 0):
            raise ValueError("log-log fit needs positive values")
        lx, ly = np.log(t), np.log(y)
        if np.ptp(ly) < 1e-9:
            # flat data: exact zero slope, perfect fit
            return cls(0.0, float(ly.mean()), 1.0, 0.0, 0.0)
        res = stats.linregress(lx, ly)
        dof = len(t) - 2
        width = float(stats.t.ppf(0.975, dof) * res.stderr) if dof > 0 else math.inf
        return cls(float(res.slope), float(res.intercept), float(res.rvalue**2),
                   float(res.stderr), width)


def _window(space, order, window) -> tuple[tuple[float, float], bool]:
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise ValueError(f"invalid window [{lo}, {hi}]")
    floor = saturation_floor(space, order)
    if lo >= floor:
        return (lo, hi), False
    if floor >= hi:
        raise ValueError(f"window [{lo:g}, {hi:g}] collapsed by the saturation floor {floor:.3g}")
    return (floor, hi), True


# ---------------------------------------------------------------------------
# (S1): ultracontractivity


@dataclass
class UltraFit:
    t_samples: list[float]
    norms: list[float]
    alpha_hat: float
    C_hat: float
    r2: float
    window: tuple[float, float]
    alpha_ci95: float = 0.0
    floor_applied: bool = False

    @property
    def verdict(self) -> str:
        return PASS if self.r2 >= R2_GATE else INCONCLUSIVE

    def envelope(self, t) -> np.ndarray:
        return self.C_hat * np.asarray(t, float) ** (-self.alpha_hat)

    def envelope_violations(self) -> int:
        bound = self.envelope(self.t_samples) * (1 + ENVELOPE_SLACK)
        return int(np.sum(np.asarray(self.norms) > bound))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["verdict"] = self.verdict
        return d


def ultra_norms(T: SemigroupEvaluator, t_samples) -> list[float]:
    return [lattice.op_norm(T.evaluate(t), T.space, "L2", "sup") for t in t_samples]


def fit_ultracontractivity(T: SemigroupEvaluator, window=(1e-3, 1e-1), samples: int = 20) -> UltraFit:
    """Fit ``||T(t)||_{2->sup} ~ C t^-alpha`` over a geometric sample of ``window``.

    ``C_hat`` is the smallest constant for which the fitted power law bounds
    every sample.
    """
    win, clipped = _window(T.space, T.generator.order, window)
    ts = geometric_samples(*win, samples)
    norms = ultra_norms(T, ts)
    fit = LogLogFit.of(ts, norms)
    alpha = -fit.slope
    c_hat = float(np.max(ts**alpha * np.asarray(norms)))
    return UltraFit(ts.tolist(), norms, alpha, c_hat, fit.r2, win, fit.ci95, clipped)


# ---------------------------------------------------------------------------
# (S3): compatibility of B with T


@dataclass
class CompatFit:
    t_samples: list[float]
    norms: list[float]
    beta_raw: float
    beta_hat: float
    C_hat: float
    r2: float
    clamped: bool
    norm: str = "gauge"
    beta_ci95: float = 0.0

    @property
    def bounded(self) -> bool:
        return compat_is_bounded(self.t_samples, self.norms)

    @property
    def verdict(self) -> str:
        return PASS if self.r2 >= R2_GATE or self.bounded else INCONCLUSIVE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounded"] = self.bounded
        d["verdict"] = self.verdict
        return d


BETA_CEILING = 1.0 - 1e-6


def compat_is_bounded(t_samples, norms) -> bool:
    """Norms that barely move, or do not grow as ``t -> 0``: ``beta = 0`` holds."""
    arr = np.asarray(norms, float)
    if np.all(arr == 0):
        return True
    if not np.all(arr > 0):
        return False
    if np.ptp(np.log(arr)) <= BOUNDED_LOG_SPAN:
        return True
    return LogLogFit.of(t_samples, arr).slope >= 0


def fit_compat_beta(B: DiscreteOperator, T: SemigroupEvaluator, window=(1e-3, 1e-1),
                    samples: int = 20, u=None, norm: str = "gauge") -> CompatFit:
    """Fit ``||B T(t)|| ~ C t^-beta``; ``norm`` is ``"gauge"`` (with ``u``) or ``"L2"``.

    The reported ``beta_hat`` is clamped into ``[0, 1)`` and ``clamped`` set
    when that changed the raw slope.
    """
    space = T.space
    win, _ = _window(space, T.generator.order, window)
    ts = geometric_samples(*win, samples)
    uu = space.ones() if u is None else lattice.weight_vector(u)
    norms = []
    for t in ts:
        m = B.matrix @ T.evaluate(t)
        if norm == "gauge":
            norms.append(lattice.op_norm(m, space, "gauge", "gauge", u=uu))
        elif norm == "L2":
            norms.append(lattice.op_norm(m, space, "L2", "L2"))
        else:
            raise ValueError(f"unknown norm {norm!r}")
    arr = np.asarray(norms)
    if np.all(arr == 0):
        return CompatFit(ts.tolist(), norms, 0.0, 0.0, 0.0, 1.0, False, norm)
    fit = LogLogFit.of(ts, np.maximum(arr, np.finfo(float).tiny))
    raw = -fit.slope + 0.0
    beta = min(max(raw, 0.0), BETA_CEILING)
    c_hat = float(np.max(ts**beta * arr))
    return CompatFit(ts.tolist(), norms, raw, beta, c_hat, fit.r2, beta != raw, norm, fit.ci95)


# ---------------------------------------------------------------------------
# (S2): Miyadera-Voigt admissibility


@dataclass
class AdmissibilityReport:
    t0: float
    q_hat: float
    passes: bool
    integrand_slope: float
    divergent: bool = False
    probe_t: list[float] = field(default_factory=list)
    probe_norms: list[float] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return PASS if self.passes else FAIL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d


def check_admissibility(B: DiscreteOperator, T: SemigroupEvaluator, t0: float,
                        panels: int = 8, order: int = 6) -> AdmissibilityReport:
    """Bound ``int_0^t0 ||B T(s)||_{2->2} ds`` by quadrature and test ``< 1``.

    The endpoint exponent fed to the graded rule comes from a log-log fit
    of the integrand on ``[t0/1000, t0]`` (clipped at the saturation floor).
    A fitted slope at or below ``-1`` flags a divergent integral.
    """
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    space = T.space

    def integrand(s: float) -> float:
        return lattice.op_norm(B.matrix @ T.evaluate(s), space, "L2", "L2")

    lo = max(t0 * 1e-3, saturation_floor(space, T.generator.order))
    probe = geometric_samples(min(lo, 0.5 * t0), t0, 8)
    vals = [integrand(s) for s in probe]
    if max(vals) == 0:
        return AdmissibilityReport(t0, 0.0, True, 0.0, False, probe.tolist(), vals)
    slope = LogLogFit.of(probe, np.maximum(vals, np.finfo(float).tiny)).slope
    if slope <= -1:
        return AdmissibilityReport(t0, math.inf, False, slope, True, probe.tolist(), vals)
    beta = min(max(-slope, 0.0), BETA_CEILING)
    q = float(singular_quadrature(integrand, t0, beta, panels=panels, order=order))
    return AdmissibilityReport(t0, q, q < 1, slope, False, probe.tolist(), vals)


# ---------------------------------------------------------------------------
# Mittag-Leffler growth bound in the gauge norm


def mittag_leffler_bound(C: float, beta: float, t) -> np.ndarray:
    """``C E_{1-beta}(C Gamma(1-beta) t^{1-beta})``."""
    g = 1.0 - beta
    return np.array([C * mittag_leffler(g, C * gamma_fn(g) * tt**g) for tt in np.atleast_1d(t)])


def lemma_constant(ultra: UltraFit | None, T: SemigroupEvaluator, compat: CompatFit,
                   t_samples, u=None) -> float:
    """Common constant ``max(1, C_S1, sup ||T(t)||_{V->V}, C_S3)``."""
    uu = T.space.ones() if u is None else lattice.weight_vector(u)
    sup_t = max(lattice.op_norm(T.evaluate(t), T.space, "gauge", "gauge", u=uu) for t in t_samples)
    c1 = ultra.C_hat if ultra is not None else 0.0
    return float(max(1.0, c1, sup_t, compat.C_hat))


@dataclass
class MittagLefflerReport:
    kappa: float
    C: float
    beta: float
    t_samples: list[float]
    measured: list[float]
    bound: list[float]
    margins: list[float]
    worst_margin: float
    violations: int

    @property
    def verdict(self) -> str:
        return PASS if self.violations == 0 else FAIL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d


def check_lemma_mittag_leffler(family: PerturbationFamily, kappa: float, C: float, beta: float,
                               t_samples, u=None) -> MittagLefflerReport:
    """Compare ``||T_kappa(t)||_{gauge}`` with the Mittag-Leffler envelope at each sample."""
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    ev = perturbed_evaluator(family, kappa)
    space = family.space
    uu = space.ones() if u is None else lattice.weight_vector(u)
    ts = np.asarray(t_samples, float)
    measured = [lattice.op_norm(ev.evaluate(t), space, "gauge", "gauge", u=uu) for t in ts]
    bound = mittag_leffler_bound(C, beta, ts)
    margins = (bound - np.asarray(measured)).tolist()
    return MittagLefflerReport(kappa, C, beta, ts.tolist(), measured, bound.tolist(), margins,
                               float(min(margins)), int(sum(m < 0 for m in margins)))


# ---------------------------------------------------------------------------
# preservation of the smoothing exponent under perturbation


@dataclass
class PreservedUltra:
    kappa: float
    fit: UltraFit
    base_alpha: float
    ratio: float
    alpha_tolerance: float
    ratio_ceiling: float = 10.0

    @property
    def alpha_shift(self) -> float:
        return self.fit.alpha_hat - self.base_alpha

    @property
    def verdict(self) -> str:
        if self.fit.verdict == INCONCLUSIVE:
            return INCONCLUSIVE
        ok = abs(self.alpha_shift) <= self.alpha_tolerance and self.ratio <= self.ratio_ceiling
        return PASS if ok else FAIL

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "fit": self.fit.to_dict(), "base_alpha": self.base_alpha,
                "alpha_shift": self.alpha_shift, "ratio": self.ratio,
                "alpha_tolerance": self.alpha_tolerance, "ratio_ceiling": self.ratio_ceiling,
                "verdict": self.verdict}


def check_theorem_preserved_ultra(family: PerturbationFamily, kappa: float, base_fit: UltraFit,
                                  alpha_tolerance: float = 0.05) -> PreservedUltra:
    """Refit the exponent for ``A + kappa B`` on the base window.

    ``ratio`` is ``sup t^alpha0 ||T_kappa(t)||_{2->sup}`` over the same
    ``sup`` for ``kappa = 0``, with ``alpha0`` the base exponent.
    """
    if abs(kappa) > 1:
        raise ValueError("|kappa| must be at most 1")
    ev = perturbed_evaluator(family, kappa)
    ts = np.asarray(base_fit.t_samples)
    norms = ultra_norms(ev, ts)
    fit = LogLogFit.of(ts, norms)
    alpha = -fit.slope
    pert = UltraFit(ts.tolist(), norms, alpha, float(np.max(ts**alpha * np.asarray(norms))),
                    fit.r2, base_fit.window, fit.ci95, base_fit.floor_applied)
    a0 = base_fit.alpha_hat
    ratio = float(np.max(ts**a0 * np.asarray(norms)) / np.max(ts**a0 * np.asarray(base_fit.norms)))
    return PreservedUltra(kappa, pert, a0, ratio, alpha_tolerance)


# ---------------------------------------------------------------------------
# interpolation between the smoothing bound and uniform boundedness


@dataclass
class InterpolationReport:
    theta: float
    p: float
    C: float
    alpha: float
    t_samples: list[float]
    norms: list[float]
    bound: list[float]
    fitted_exponent: float
    r2: float

    @property
    def violations(self) -> int:
        return int(sum(n > b for n, b in zip(self.norms, self.bound)))

    @property
    def verdict(self) -> str:
        return PASS if self.violations == 0 else FAIL

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = self.violations
        d["verdict"] = self.verdict
        return d


def check_interpolation_chain(T: SemigroupEvaluator, theta: float, base_fit: UltraFit) -> InterpolationReport:
    """Test ``||T(t)||_{L^{2/theta}->sup} <= C t^{-alpha theta} (1 + slack)``.

    ``C`` is the common constant ``max(C_S1, sup ||T(t)||_{sup->sup})`` over
    the base samples; ``theta = 0`` means ``L^inf``.
    """
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    space = T.space
    ts = np.asarray(base_fit.t_samples)
    p = math.inf if theta == 0 else 2.0 / theta
    mats = [T.evaluate(t) for t in ts]
    norms = [lattice.op_norm(m, space, "Lp", "sup", p=p) for m in mats]
    sup_v = max(lattice.op_norm(m, space, "Lp", "sup", p=math.inf) for m in mats)
    C = max(base_fit.C_hat, sup_v)
    alpha = base_fit.alpha_hat
    bound = (C * ts ** (-alpha * theta) * (1 + INTERPOLATION_SLACK)).tolist()
    fit = LogLogFit.of(ts, norms)
    return InterpolationReport(theta, p, C, alpha, ts.tolist(), norms, bound, -fit.slope, fit.r2)
