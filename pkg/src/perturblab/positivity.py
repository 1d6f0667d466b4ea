"""Eventual strong positivity certificates and detection of negative entries.

All checks act on the normalized semigroup ``M(t) = exp(-t spb) T(t)``.
The inequality ``M(t) >= eps <u, .> u`` between matrices reads
``M_ij >= eps u_i u_j w_j`` entrywise, so the best constant at a single
time is ``eps*(t) = min_ij M_ij / (u_i u_j w_j)``.  Times are sampled, not
continuous; a certificate's ``tau`` is the first sample after which the
sampled constants stay positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .operators import DiscreteOperator, PerturbationFamily
from .semigroup import SemigroupEvaluator, perturbed_evaluator
from .spectral import symmetric_prefix

NEGATIVE_TOL = 1e-12


def _evaluator(T) -> SemigroupEvaluator:
    return T if isinstance(T, SemigroupEvaluator) else SemigroupEvaluator(T)


def spectral_bound(A) -> float:
    """Largest real part of the spectrum of a generator."""
    return _evaluator(A).spectral_bound()


def spectral_gap(T) -> float:
    """Distance from ``spb`` to the next distinct real part of the spectrum."""
    re = np.unique(np.round(np.sort(_evaluator(T).eig.values.real)[::-1], 12))[::-1]
    return float(re[0] - re[1]) if re.size > 1 else math.inf


def perron_vector(T) -> np.ndarray:
    """L2-normalized eigenvector of the spectral bound, signed to be positive.

    Raises when it is not strictly positive (no admissible default ``u``).
    """
    ev = _evaluator(T)
    eig = ev.eig
    j = int(np.argmax(eig.values.real))
    v = np.real_if_close(eig.vectors[:, j], tol=1e6)
    if np.iscomplexobj(v):
        raise ValueError("the leading eigenvector is not real")
    v = v if v.sum() >= 0 else -v
    if not np.all(v > 0):
        raise ValueError("the leading eigenvector is not strictly positive; supply u")
    return v / lattice.norm(v, ev.space)


def default_samples(t_max: float, t_min: float = 1e-4, geometric: int = 40,
                    uniform: int = 40) -> np.ndarray:
    """Geometric samples in ``[t_min, 1]`` followed by uniform ones on ``(1, t_max]``."""
    if not 0 < t_min < 1:
        raise ValueError("t_min must lie in (0, 1)")
    geo = np.geomspace(t_min, 1.0, geometric)
    if t_max <= 1:
        return geo[geo <= t_max]
    return np.concatenate([geo, np.linspace(1.0, t_max, uniform + 1)[1:]])


def default_t_max(T) -> float:
    gap = spectral_gap(T)
    return 10.0 / gap if math.isfinite(gap) and gap > 0 else 10.0


def normalized(T: SemigroupEvaluator, t: float, spb: float) -> np.ndarray:
    return T.evaluate(t, shift=spb)


def eps_star(m: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
    return float(np.min(m / np.outer(u, u * w)))


def persistent_tail(values) -> int | None:
    """First index after which every value is positive, or ``None``."""
    idx = None
    for i in range(len(values) - 1, -1, -1):
        if values[i] > 0:
            idx = i
        else:
            break
    return idx


# ---------------------------------------------------------------------------
# certificates


@dataclass
class PositivityCertificate:
    u: list[float]
    spb: float
    gap: float
    tau: float
    epsilon: float
    t_max: float
    t_samples: list[float]
    eps_star: list[float]
    margins: list[float]
    test_vectors: list[list[float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return math.isfinite(self.tau) and self.epsilon > 0 and all(m >= 0 for m in self.margins)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def verify(self, T, rng: np.random.Generator, count: int = 3) -> float:
        """Worst entry of ``M(t) - eps u (u w)^T`` at fresh times in ``[tau, t_max]``."""
        if not self.passed:
            raise ValueError("only passing certificates can be re-verified")
        ev = _evaluator(T)
        u = np.asarray(self.u)
        r = lattice.rank_one_positive(u, ev.space)
        worst = math.inf
        for t in rng.uniform(self.tau, self.t_max, count):
            worst = min(worst, float(np.min(normalized(ev, t, self.spb) - self.epsilon * r)))
        return worst

    def to_dict(self) -> dict:
        return {"u": self.u, "spb": self.spb, "gap": self.gap, "tau": self.tau,
                "epsilon": self.epsilon, "t_max": self.t_max, "t_samples": self.t_samples,
                "eps_star": self.eps_star, "margins": self.margins,
                "test_vectors": self.test_vectors, "verdict": self.verdict}


def uniform_positivity_certificate(T, u=None, t_max: float | None = None, t_samples=None,
                                   t_min: float = 1e-4) -> PositivityCertificate:
    """Certify ``M(t) >= eps <u, .> u`` on the sampled tail ``[tau, t_max]``.

    ``u`` defaults to the Perron vector and ``t_max`` to ten mixing times
    ``10 / gap``.  A failed search returns a FAIL certificate with
    ``tau = inf`` and the full trace.
    """
    ev = _evaluator(T)
    space = ev.space
    spb = ev.spectral_bound()
    if not math.isfinite(spb):
        raise ValueError("spectral bound is not finite")
    uu = perron_vector(ev) if u is None else lattice.weight_vector(u)
    if t_samples is None:
        t_max = default_t_max(ev) if t_max is None else float(t_max)
        ts = default_samples(t_max, t_min)
    else:
        ts = np.sort(np.asarray(t_samples, float))
        t_max = float(ts[-1])
    w = space.weights
    stars = [eps_star(normalized(ev, t, spb), uu, w) for t in ts]
    i0 = persistent_tail(stars)
    gap = spectral_gap(ev)
    if i0 is None:
        return PositivityCertificate(uu.tolist(), spb, gap, math.inf, 0.0, t_max, ts.tolist(),
                                     stars, [])
    eps = float(min(stars[i0:]))
    margins = [s - eps for s in stars[i0:]]
    return PositivityCertificate(uu.tolist(), spb, gap, float(ts[i0]), eps, t_max, ts.tolist(),
                                 stars, margins)


@dataclass
class IndividualPositivity:
    t_samples: list[float]
    ratios: list[list[float]]
    taus: list[float]

    def to_dict(self) -> dict:
        return {"t_samples": self.t_samples, "ratios": self.ratios, "taus": self.taus}


def individual_positivity_time(T, u, test_vectors, t_max: float | None = None, t_samples=None,
                               t_min: float = 1e-4) -> IndividualPositivity:
    """For each positive ``x``, the first sample after which ``M(t) x`` dominates a multiple of ``u``."""
    ev = _evaluator(T)
    uu = lattice.weight_vector(u)
    xs = [np.asarray(x, float) for x in test_vectors]
    for x in xs:
        if np.any(x < 0) or not np.any(x > 0):
            raise ValueError("test vectors must be positive and nonzero")
    if t_samples is None:
        ts = default_samples(default_t_max(ev) if t_max is None else t_max, t_min)
    else:
        ts = np.sort(np.asarray(t_samples, float))
    spb = ev.spectral_bound()
    mats = [normalized(ev, t, spb) for t in ts]
    ratios, taus = [], []
    for x in xs:
        r = [lattice.min_ratio(m @ x, uu) for m in mats]
        i0 = persistent_tail(r)
        ratios.append(r)
        taus.append(math.inf if i0 is None else float(ts[i0]))
    return IndividualPositivity(ts.tolist(), ratios, taus)


@dataclass(frozen=True)
class NegativeEntry:
    t: float
    i: int
    j: int
    value: float
    relative: float

    def to_dict(self) -> dict:
        return {"t": self.t, "i": self.i, "j": self.j, "value": self.value,
                "relative": self.relative}


def detect_nonpositivity(T, t_probe_grid) -> NegativeEntry | None:
    """First probe time with an entry below ``-1e-12 ||T(t)||_{2->2}``."""
    ev = _evaluator(T)
    for t in sorted(float(x) for x in t_probe_grid):
        m = ev.evaluate(t)
        scale = lattice.op_norm(m, ev.space, "L2", "L2")
        i, j = np.unravel_index(int(np.argmin(m)), m.shape)
        if m[i, j] < -NEGATIVE_TOL * scale:
            return NegativeEntry(t, int(i), int(j), float(m[i, j]), float(m[i, j] / scale))
    return None


@dataclass
class SweepResult:
    kappas: list[float]
    certificates: list[PositivityCertificate]
    delta_empirical: float

    @property
    def verdicts(self) -> list[str]:
        return [c.verdict for c in self.certificates]

    def to_dict(self) -> dict:
        return {"kappas": self.kappas, "delta_empirical": self.delta_empirical,
                "certificates": [c.to_dict() for c in self.certificates]}


def perturbed_positivity_sweep(family: PerturbationFamily, u=None, kappa_grid=(0.0,),
                               t_max: float | None = None, t_min: float = 1e-4) -> SweepResult:
    """Uniform certificates for ``A + kappa B`` across ``kappa_grid``.

    ``B`` must be real and symmetric in L2.  ``u`` defaults to the Perron
    vector at ``kappa = 0``.  The empirical ``delta`` is the largest
    symmetric grid prefix of passing certificates (``-1`` when none).
    """
    b: DiscreteOperator = family.direction
    if not (b.is_real and b.is_symmetric_L2):
        raise ValueError("the perturbation must be real and symmetric in L2")
    base = perturbed_evaluator(family, 0.0)
    uu = perron_vector(base) if u is None else lattice.weight_vector(u)
    kappas = [float(k) for k in kappa_grid]
    certs = [uniform_positivity_certificate(perturbed_evaluator(family, k), uu, t_max, t_min=t_min)
             for k in kappas]
    delta = symmetric_prefix(kappas, [c.passed for c in certs])
    return SweepResult(kappas, certs, delta)
