"""Acceptance criteria, one test each, at their stated tolerances.

The terminal summary prints one PASS/FAIL line per criterion with the
measured values.
"""

import math
import time

import numpy as np
import pytest

from perturblab import estimates, lattice, numkernel, positivity, report, runner, spectral
from perturblab.cli import main, resolve_config
from perturblab.operators import (
    DiscreteOperator,
    PerturbationFamily,
    build_clamped_bilaplacian,
    build_robin_laplacian,
    make_space,
)
from perturblab.semigroup import SemigroupEvaluator, dyson_phillips, variation_residual

from oracles import CONVOLUTION_EXPONENTS

criterion = pytest.mark.criterion


def experiment(name):
    return runner.build(resolve_config(name))


@criterion("01 ultracontractivity exponent")
def test_ultracontractivity_exponent(record_property):
    t0 = time.perf_counter()
    heat = SemigroupEvaluator(build_robin_laplacian(make_space(400)).generator())
    fit = estimates.fit_ultracontractivity(heat, (1e-3, 1e-1))
    secs = time.perf_counter() - t0
    record_property("detail", f"alpha={fit.alpha_hat:.4f} r2={fit.r2:.6f} {secs:.1f}s")
    assert 0.20 <= fit.alpha_hat <= 0.30
    assert fit.r2 >= 0.98
    assert secs <= 60


@criterion("02 higher-order exponent")
def test_higher_order_exponent(record_property):
    t0 = time.perf_counter()
    beam = SemigroupEvaluator(build_clamped_bilaplacian(make_space(300, closed=False)).generator())
    fit = estimates.fit_ultracontractivity(beam, (1e-4, 1e-2))
    secs = time.perf_counter() - t0
    record_property("detail", f"alpha={fit.alpha_hat:.4f} +- {fit.alpha_ci95:.2e} (95%) {secs:.1f}s")
    assert 0.045 <= fit.alpha_hat <= 0.205
    assert math.isfinite(fit.alpha_ci95) and fit.alpha_ci95 > 0
    assert secs <= 120


@criterion("03 preserved ultracontractivity")
def test_preserved_ultracontractivity(record_property, delta_family, heat200):
    base = estimates.fit_ultracontractivity(heat200, (1e-3, 1e-1))
    rep = estimates.check_theorem_preserved_ultra(delta_family, 0.25, base)
    record_property("detail", f"alpha0={base.alpha_hat:.4f} alpha={rep.fit.alpha_hat:.4f} "
                              f"ratio={rep.ratio:.3f}")
    assert abs(rep.alpha_shift) <= 0.05
    assert rep.ratio <= 10


@criterion("04 Dyson-Phillips oracle equivalence")
def test_dyson_phillips(record_property, neumann200, delta200):
    a, b = neumann200.generator(), delta200.scaled(0.25)
    dp = dyson_phillips(a, b, 0.5)
    dys = [dyson_phillips(a, b, 0.5, panels=p, order=3).oracle_error for p in (4, 8, 16, 32)]
    var = [variation_residual(a, b, 0.5, p) for p in (32, 64, 128, 256)]
    floor = max(1e-11, 8 * np.finfo(float).eps * lattice.op_norm(a.matrix, a.space, "L2", "L2") * 0.5)
    record_property("detail", f"K={dp.K} ratio_k={dp.ratio_k} error={dp.oracle_error:.2e} "
                              f"variation@256={var[-1]:.2e} doubling dyson={dys} variation={var}")
    assert dp.oracle_error <= 1e-6 and dp.ratios()[-1] < 0.1
    assert var[-1] <= 1e-7
    assert runner.monotone_to_floor(dys, floor)
    assert runner.monotone_to_floor(var, floor)


@criterion("05 Mittag-Leffler certificate")
@pytest.mark.parametrize("demo", ["delta-potential", "fractional-power"])
def test_mittag_leffler(record_property, demo):
    ex = experiment(demo)
    cfg = ex.cfg
    T = ex.evaluator()
    kb = ex.direction.scaled(cfg.kappa)
    compat = estimates.fit_compat_beta(kb, T, (cfg.compat_t_lo, cfg.compat_t_hi), u=ex.u)
    ultra = estimates.fit_ultracontractivity(T, (cfg.ultra_t_lo, cfg.ultra_t_hi))
    ts = np.geomspace(1e-3, 1.0, 20)
    C = estimates.lemma_constant(ultra, T, compat, ts, u=ex.u)
    rep = estimates.check_lemma_mittag_leffler(ex.family, cfg.kappa, C, compat.beta_hat, ts, u=ex.u)
    record_property("detail", f"{demo}: C={C:.3f} beta={compat.beta_hat:.3f} "
                              f"worst margin={rep.worst_margin:.3e} violations={rep.violations}")
    assert len(rep.t_samples) == 20 and 0 < min(ts) and max(ts) <= 1
    assert rep.violations == 0


@criterion("06 convolution identity")
def test_convolution_identity(record_property):
    worst = 0.0
    for a in CONVOLUTION_EXPONENTS:
        for b in CONVOLUTION_EXPONENTS:
            v = numkernel.singular_quadrature(lambda s, c: c ** (a - 1) * s ** (b - 1), 1.5,
                                              max(1 - b, 0.0), beta_right=max(1 - a, 0.0),
                                              complement=True)
            exact = 1.5 ** (a + b - 1) * math.gamma(a) * math.gamma(b) / math.gamma(a + b)
            worst = max(worst, abs(v - exact) / exact)
    xs = np.linspace(0.0, 5.0, 501)
    e1 = max(abs(numkernel.mittag_leffler(1.0, x) - math.exp(x)) / math.exp(x) for x in xs)
    record_property("detail", f"grid worst={worst:.2e} E1 worst={e1:.2e}")
    assert worst <= 1e-8
    assert e1 <= 1e-12


@criterion("07 fractional-power estimate")
def test_fractional_power(record_property):
    ex = experiment("fractional-power")
    fit = estimates.fit_compat_beta(ex.direction, ex.evaluator(), (1e-3, 1e-1), norm="L2")
    record_property("detail", f"slope={-fit.beta_raw:.4f} r2={fit.r2:.6f}")
    assert abs(-fit.beta_raw + 0.5) <= 0.05


@criterion("08 spectral tracking")
def test_spectral_tracking(record_property):
    ex = experiment("robin-heat")
    fam = ex.family
    assert ex.direction.is_symmetric_L2
    v0 = positivity.perron_vector(ex.generator)
    grid = ex.cfg.kappa_grid()
    tr = spectral.track_eigenpair(fam, 0.0, ex.cfg.contour_radius, grid, v0, ex.u)
    dense = [np.max(np.linalg.eigvals(fam.assemble(k)).real) for k in grid]
    err = max(abs(z.real - d) for z, d in zip(tr.lam, dense))
    record_property("detail", f"{len(grid)} kappas rank={set(tr.ranks)} imag={tr.max_imag:.1e} "
                              f"dense error={err:.1e} delta={tr.delta_empirical}")
    assert tr.all_simple
    assert tr.max_imag <= 1e-10
    assert err <= 1e-8
    assert tr.delta_empirical > 0
    prefix = [mr for k, mr in zip(grid, tr.min_ratio_to_u) if abs(k) <= tr.delta_empirical]
    assert prefix and min(prefix) >= 0.5 * tr.c


@criterion("09 analyticity in the gauge norm")
def test_analyticity(record_property):
    ex = experiment("robin-heat")
    cfg = ex.cfg
    rep = spectral.analyticity_test(ex.family, 0.0, cfg.contour_radius, cfg.analyticity_rho,
                                    cfg.analyticity_m, ex.u, kmax=10)
    zero = DiscreteOperator(np.zeros((ex.space.n,) * 2), ex.space, "zero", True, True)
    const = spectral.analyticity_test(PerturbationFamily(ex.generator, zero), 0.0,
                                      cfg.contour_radius, cfg.analyticity_rho, cfg.analyticity_m,
                                      ex.u, kmax=10)
    worst_const = max(const.taylor_norms[1:])
    record_property("detail", f"decay ratio={rep.decay_ratio:.4f} constant family max={worst_const:.1e}")
    assert rep.decay_ratio < 0.9 and all(np.isfinite(rep.taylor_norms))
    assert worst_const <= 1e-12


@criterion("10 gap suite")
def test_gap_suite(record_property):
    rng = np.random.default_rng(2024)
    gap_viol = sum(spectral.graph_gap(a, b).gap > np.linalg.norm(b, 2) * (1 + 1e-12)
                   for a, b in runner.random_gap_instances(rng, 100, 12))
    neu_viol = sum(spectral.neumann_resolvent_check(a, b, lam).verdict != "PASS"
                   for a, b, lam in runner.random_neumann_instances(rng, 100, 12))
    ex = experiment("robin-heat")
    seq = [0.04 * 2.0 ** (-j) for j in range(10)]
    st = spectral.projection_stability(ex.family, 0.0, ex.cfg.contour_radius, seq)
    record_property("detail", f"graph gap violations={gap_viol} neumann violations={neu_viol} "
                              f"spearman={st.spearman:.3f}")
    assert gap_viol == 0
    assert neu_viol == 0
    assert st.spearman >= 0.9


def eventual_positivity(T, u=None):
    neg = positivity.detect_nonpositivity(T, np.geomspace(1e-4, 1e-2, 15))
    cert = positivity.uniform_positivity_certificate(T, u)
    return neg, cert


@criterion("11(i) eventual positivity: clamped bi-Laplacian")
def test_eventual_positivity_beam(record_property, beam200):
    neg, cert = eventual_positivity(beam200)
    record_property("detail", f"negative entry={None if neg is None else (neg.t, neg.value)} "
                              f"tau={cert.tau:.3g} eps={cert.epsilon:.3g}")
    assert neg is not None and neg.t <= 0.01
    assert cert.verdict == "PASS" and math.isfinite(cert.tau) and cert.epsilon > 0


@criterion("11(ii) eventual positivity: nonlocal Robin")
def test_eventual_positivity_nonlocal(record_property):
    ex = experiment("nonlocal-robin")
    neg, cert = eventual_positivity(ex.evaluator(), ex.u)
    record_property("detail", f"negative entry={None if neg is None else (neg.t, neg.value)} "
                              f"tau={cert.tau:.3g} eps={cert.epsilon:.3g}")
    assert cert.verdict == "PASS" and math.isfinite(cert.tau) and cert.epsilon > 0
    assert neg is not None and neg.t <= 0.01


@criterion("11(iii) eventual positivity: perturbed sweep")
def test_eventual_positivity_sweep(record_property):
    ex = experiment("nonlocal-robin")
    b = ex.direction
    norm = lattice.op_norm(b.matrix, ex.space, "L2", "L2")
    kernel = b.matrix
    t0 = time.perf_counter()
    sweep = positivity.perturbed_positivity_sweep(ex.family, ex.u, ex.cfg.sweep_grid())
    secs = time.perf_counter() - t0
    record_property("detail", f"||B||={norm:.3f} verdicts={sweep.verdicts} "
                              f"delta={sweep.delta_empirical} {secs:.1f}s")
    assert norm <= 0.05 + 1e-12 and kernel.min() < 0 < kernel.max()
    assert sweep.delta_empirical > 0
    assert all(c.passed for k, c in zip(sweep.kappas, sweep.certificates)
               if abs(k) <= sweep.delta_empirical)
    assert secs <= 300


@criterion("12 determinism")
def test_determinism(record_property, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["all", "--config", "robin-heat", "--out", str(o), "--seed", "5",
                   "--format", "csv", "--no-figures", "--quiet"]) for o in outs]
    a = sorted(outs[0].glob("*.csv"))
    b = sorted(outs[1].glob("*.csv"))
    same = [p.read_bytes() == q.read_bytes() for p, q in zip(a, b)]
    record_property("detail", f"{len(a)} CSVs, identical={all(same)}, exit codes={codes}")
    assert a and [p.name for p in a] == [q.name for q in b]
    assert all(same)
    assert report.FORMATS
