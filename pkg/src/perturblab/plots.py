"""Figures for the report tables.

Uses the object-oriented Agg API (no pyplot state), so figures may be built
from any thread.  Each builder takes a stage's tables and returns
``(stem, Figure)`` pairs; tables a builder does not find are skipped.
"""

from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .runner import StageResult, Table


def _figure(title: str):
    fig = Figure(figsize=(6.0, 4.0))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot()
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _col(table: Table, name: str) -> np.ndarray:
    j = table.header.index(name)
    return np.array([np.nan if r[j] is None else r[j] for r in table.rows], dtype=float)


def _positive(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.nan)


def ultra_figures(tables):
    if "ultra" not in tables:
        return []
    t = tables["ultra"]
    fig, ax = _figure("Smoothing bound")
    ts = _col(t, "t")
    ax.loglog(ts, _col(t, "norm_base"), "o", label="unperturbed")
    ax.loglog(ts, _col(t, "norm_perturbed"), "x", label="perturbed")
    ax.loglog(ts, _col(t, "envelope"), "-", label="fitted envelope")
    ax.set_xlabel("t")
    ax.set_ylabel("norm 2 -> sup")
    ax.legend()
    return [("ultra", fig)]


def dyson_figures(tables):
    out = []
    if "dyson" in tables:
        t = tables["dyson"]
        fig, ax = _figure("Dyson-Phillips terms")
        k = _col(t, "k")
        ax.semilogy(k, _positive(_col(t, "term_norm_gauge")), "o", label="term norm (gauge)")
        ax.semilogy(k, _positive(_col(t, "term_bound")), "-", label="term bound")
        ax.semilogy(k, _positive(_col(t, "partial_error")), "s", label="partial sum error")
        ax.set_xlabel("k")
        ax.legend()
        out.append(("dyson", fig))
    if "doubling" in tables:
        t = tables["doubling"]
        fig, ax = _figure("Panel doubling")
        ax.loglog(_col(t, "panels_dyson"), _positive(_col(t, "error_dyson")), "o-", label="series error")
        ax.loglog(_col(t, "panels_variation"), _positive(_col(t, "residual_variation")), "s-",
                  label="variation residual")
        ax.set_xlabel("panels")
        ax.legend()
        out.append(("doubling", fig))
    if "mittag_leffler" in tables:
        t = tables["mittag_leffler"]
        fig, ax = _figure("Mittag-Leffler envelope")
        ts = _col(t, "t")
        ax.loglog(ts, _col(t, "measured"), "o", label="measured")
        ax.loglog(ts, _col(t, "bound"), "-", label="bound")
        ax.set_xlabel("t")
        ax.legend()
        out.append(("mittag_leffler", fig))
    return out


def spectrum_figures(tables):
    out = []
    if "track" in tables and tables["track"].rows:
        t = tables["track"]
        fig, ax = _figure("Tracked eigenvalue")
        k = _col(t, "kappa")
        ax.plot(k, _col(t, "re_lambda"), "o-", label="Re lambda")
        ax.set_xlabel("kappa")
        ax2 = ax.twinx()
        ax2.plot(k, _col(t, "min_ratio"), "s--", color="tab:orange", label="min ratio")
        ax.legend(loc="upper left")
        ax2.legend(loc="upper right")
        out.append(("track", fig))
    if "taylor" in tables:
        t = tables["taylor"]
        fig, ax = _figure("Taylor coefficients of the projection")
        ax.semilogy(_col(t, "k"), _positive(_col(t, "scaled_norm")), "o-")
        ax.set_xlabel("k")
        ax.set_ylabel("norm * rho^k")
        out.append(("taylor", fig))
    return out


def positivity_figures(tables):
    out = []
    if "positivity" in tables:
        t = tables["positivity"]
        fig, ax = _figure("Rank-one lower bound")
        ax.plot(_col(t, "t"), _col(t, "eps_star"), "o-", markersize=3)
        ax.set_xscale("log")
        ax.set_yscale("symlog", linthresh=1e-6)
        ax.set_xlabel("t")
        ax.set_ylabel("eps*(t)")
        out.append(("positivity", fig))
    if "sweep" in tables and tables["sweep"].rows:
        t = tables["sweep"]
        fig, ax = _figure("Perturbed positivity sweep")
        eps = _col(t, "epsilon")
        ax.plot(_col(t, "kappa"), np.where(np.isfinite(eps), eps, np.nan), "o-")
        ax.set_xlabel("kappa")
        ax.set_ylabel("epsilon")
        out.append(("sweep", fig))
    return out


def gap_figures(tables):
    out = []
    if "graph_gap" in tables:
        t = tables["graph_gap"]
        fig, ax = _figure("Graph gap against perturbation size")
        nb = _col(t, "norm_b")
        ax.loglog(nb, _col(t, "gap"), "o", markersize=3, label="gap")
        lim = np.array([np.nanmin(nb), np.nanmax(nb)])
        ax.loglog(lim, lim, "-", label="norm of B")
        ax.set_xlabel("norm of B")
        ax.legend()
        out.append(("graph_gap", fig))
    if "stability" in tables:
        t = tables["stability"]
        fig, ax = _figure("Projection stability")
        ax.loglog(_col(t, "beta_kappa"), _positive(_col(t, "projection_change")), "o-")
        ax.set_xlabel("beta")
        ax.set_ylabel("projection change")
        out.append(("stability", fig))
    return out


BUILDERS = {"ultra": ultra_figures, "dyson": dyson_figures, "spectrum": spectrum_figures,
            "positivity": positivity_figures, "gap": gap_figures}


def stage_figures(stage: StageResult):
    return BUILDERS[stage.name](stage.tables)
