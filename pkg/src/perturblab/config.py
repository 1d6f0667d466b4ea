"""Experiment configuration: a flat, typed ``key = value`` file in TOML syntax."""

from __future__ import annotations

import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli


class ConfigError(ValueError):
    """Invalid configuration; the message carries a line number when known."""


OPERATORS = ("robin_laplacian", "nonlocal_robin", "clamped_bilaplacian", "dirichlet_laplacian")
PERTURBATIONS = ("none", "delta", "kernel", "power")
WEIGHTS = ("perron", "ones")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    # operator
    operator: str = "robin_laplacian"
    n: int = 200
    beta_left: float = 0.0
    beta_right: float = 0.0
    v_left: float = 1.0
    v_right: float = -1.0
    # perturbation
    perturbation: str = "none"
    delta_x0: float = 0.0
    delta_sign: float = -1.0
    kernel: str = "mixed"
    kernel_norm: float = 0.0
    power_s: float = 0.5
    power_shift: float = 0.0
    kappa: float = 0.25
    # weight vector u
    weight: str = "perron"
    # ultracontractivity
    ultra_t_lo: float = 1e-3
    ultra_t_hi: float = 1e-1
    ultra_samples: int = 20
    alpha_tolerance: float = 0.05
    interp_theta: float = 0.5
    # compatibility, admissibility, Mittag-Leffler bound
    compat_t_lo: float = 1e-3
    compat_t_hi: float = 1e-1
    admissibility_t0: float = 0.1
    ml_t_min: float = 1e-3
    ml_samples: int = 20
    # Dyson-Phillips
    dyson_t: float = 0.5
    dyson_K: int = 12
    dyson_panels: int = 32
    dyson_order: int = 8
    variation_panels: int = 256
    quadrature_floor: float = 1e-11
    # spectrum
    kappa_min: float = -0.04
    kappa_max: float = 0.04
    kappa_count: int = 41
    contour_center: float | None = None
    contour_radius: float | None = None
    contour_m: int = 64
    analyticity_rho: float | None = None
    analyticity_m: int = 32
    # positivity
    positivity_t_min: float = 1e-4
    positivity_t_max: float | None = None
    probe_t_max: float = 1e-2
    expect_nonpositive: bool = False
    sweep_kappa_max: float = 1.0
    sweep_count: int = 9
    # gap suite
    gap_instances: int = 100
    gap_dim: int = 12
    stability_points: int = 10
    # run
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.operator in OPERATORS, f"operator must be one of {OPERATORS}")
        need(self.perturbation in PERTURBATIONS, f"perturbation must be one of {PERTURBATIONS}")
        need(self.weight in WEIGHTS, f"weight must be one of {WEIGHTS}")
        need(self.n >= 8, "n must be at least 8")
        need(0 < self.ultra_t_lo < self.ultra_t_hi, "need 0 < ultra_t_lo < ultra_t_hi")
        need(0 < self.compat_t_lo < self.compat_t_hi, "need 0 < compat_t_lo < compat_t_hi")
        need(0 < self.ml_t_min < 1, "ml_t_min must lie in (0, 1)")
        need(0 < self.dyson_t <= 1, "dyson_t must lie in (0, 1]")
        need(self.dyson_K >= 1 and self.dyson_panels >= 1 and self.dyson_order >= 1,
             "dyson_K, dyson_panels and dyson_order must be positive")
        need(self.kappa_min <= self.kappa_max, "kappa_min must not exceed kappa_max")
        need(self.kappa_count >= 0, "kappa_count must be nonnegative")
        need(0 <= self.interp_theta <= 1, "interp_theta must lie in [0, 1]")
        need(0 < self.power_s <= 1, "power_s must lie in (0, 1]")
        need(self.delta_sign in (-1.0, 1.0), "delta_sign must be +1 or -1")
        need(abs(self.kappa) <= 1, "|kappa| must be at most 1")
        need(self.contour_radius is None or self.contour_radius > 0, "contour_radius must be positive")
        need(self.threads >= 1, "threads must be at least 1")
        need(self.gap_instances >= 1 and self.gap_dim >= 2, "gap suite sizes too small")
        need(self.stability_points >= 3, "stability_points must be at least 3")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                need(math.isfinite(v), f"{f.name} must be finite")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def kappa_grid(self) -> list[float]:
        if self.kappa_count == 0:
            return []
        if self.kappa_count == 1:
            return [self.kappa_min]
        step = (self.kappa_max - self.kappa_min) / (self.kappa_count - 1)
        # exact zero when the grid is symmetric
        return [round(self.kappa_min + i * step, 15) + 0.0 for i in range(self.kappa_count)]

    def sweep_grid(self) -> list[float]:
        if self.sweep_count == 1:
            return [0.0]
        k = self.sweep_kappa_max
        step = 2 * k / (self.sweep_count - 1)
        return [round(-k + i * step, 15) + 0.0 for i in range(self.sweep_count)]

    def digest(self) -> str:
        """Short SHA-256 of the canonical rendering (run-local keys excluded)."""
        canon = render(self.replace(output_dir="", threads=1))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:10]


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _expected_type(name: str):
    ann = str(_FIELDS[name].type)
    if ann.startswith("bool"):
        return bool
    if ann.startswith("int"):
        return int
    if ann.startswith("float"):
        return float
    return str


def _line_of(text: str, key: str) -> int | None:
    m = re.search(rf"^\s*{re.escape(key)}\s*=", text, re.MULTILINE)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse(text: str) -> ExperimentConfig:
    """Parse configuration text; unknown keys and type mismatches are errors."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    values = {}
    for key, val in raw.items():
        where = _line_of(text, key)
        loc = f"line {where}: " if where else ""
        if key not in _FIELDS:
            raise ConfigError(f"{loc}unknown key {key!r}")
        want = _expected_type(key)
        if isinstance(val, dict):
            raise ConfigError(f"{loc}{key}: tables are not supported (flat keys only)")
        if want is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if (want is int and isinstance(val, bool)) or not isinstance(val, want):
            raise ConfigError(f"{loc}{key}: expected {want.__name__}, got {type(val).__name__}")
        values[key] = val
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None


def load(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc.strerror}") from None
    return parse(text)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render(cfg: ExperimentConfig) -> str:
    """Canonical text; keys whose value is unset (``None``) are omitted."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is not None:
            lines.append(f"{f.name} = {_format(v)}")
    return "\n".join(lines) + "\n"


def as_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)
