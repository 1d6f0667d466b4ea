import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturblab import config
from perturblab.cli import demo_names, resolve_config
from perturblab.config import ConfigError, ExperimentConfig


def test_defaults_resolve():
    cfg = ExperimentConfig()
    assert config.parse("") == cfg
    assert config.parse(config.render(cfg)) == cfg


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(
    name=st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=20),
    n=st.integers(8, 5000),
    beta=st.floats(0, 10),
    kappa=st.floats(-1, 1),
    lo=st.floats(1e-8, 1e-2),
    radius=st.none() | st.floats(1e-6, 10),
    flag=st.booleans(),
    x0=finite,
)
def test_round_trip(name, n, beta, kappa, lo, radius, flag, x0):
    cfg = ExperimentConfig(name=name, n=n, beta_left=beta, kappa=kappa, ultra_t_lo=lo,
                           contour_radius=radius, expect_nonpositive=flag, delta_x0=x0)
    assert config.parse(config.render(cfg)) == cfg


def test_render_is_canonical():
    text = config.render(ExperimentConfig(n=64))
    assert text.endswith("\n") and "contour_center" not in text
    assert "n = 64\n" in text


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'colour'"):
        config.parse('name = "x"\nn = 100\ncolour = "red"\n')


def test_type_mismatch_reports_line():
    with pytest.raises(ConfigError, match=r"line 2: n: expected int, got str"):
        config.parse('kappa = 0.1\nn = "many"\n')
    with pytest.raises(ConfigError, match=r"expected int, got bool"):
        config.parse("n = true\n")
    with pytest.raises(ConfigError, match=r"expected bool"):
        config.parse("expect_nonpositive = 1\n")


def test_int_promotes_to_float():
    assert config.parse("kappa = 0\n").kappa == 0.0


def test_syntax_error():
    with pytest.raises(ConfigError, match="syntax error"):
        config.parse("n = = 3\n")


def test_tables_rejected():
    with pytest.raises(ConfigError, match="flat keys only"):
        config.parse("[operator]\nn = 3\n")


@pytest.mark.parametrize("text", [
    'operator = "wave"', "n = 4", "ultra_t_lo = 0.5\nultra_t_hi = 0.1", "dyson_t = 2.0",
    "kappa_min = 1.0\nkappa_max = -1.0", "delta_sign = 0.5", "kappa = 3.0", "threads = 0",
    "contour_radius = -1.0", "kappa = nan",
])
def test_invalid_values(text):
    with pytest.raises(ConfigError):
        config.parse(text + "\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "nope.toml")


def test_kappa_grid():
    cfg = ExperimentConfig(kappa_min=-0.1, kappa_max=0.1, kappa_count=5)
    assert cfg.kappa_grid() == [-0.1, -0.05, 0.0, 0.05, 0.1]
    assert ExperimentConfig(kappa_count=0).kappa_grid() == []
    assert ExperimentConfig(sweep_kappa_max=1.0, sweep_count=3).sweep_grid() == [-1.0, 0.0, 1.0]


def test_digest_ignores_run_local_keys():
    a = ExperimentConfig()
    assert a.digest() == a.replace(output_dir="elsewhere", threads=4).digest()
    assert a.digest() != a.replace(seed=1).digest()
    assert len(a.digest()) == 10


def test_config_is_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        ExperimentConfig().n = 3


def test_demos_parse():
    names = demo_names()
    assert names == sorted(["robin-heat", "clamped-bilaplacian", "delta-potential",
                            "fractional-power", "nonlocal-robin"])
    for name in names:
        cfg = resolve_config(name)
        assert cfg.name == name
        assert config.parse(config.render(cfg)) == cfg


def test_resolve_path(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('name = "mine"\n', encoding="utf-8")
    assert resolve_config(str(p)).name == "mine"
    assert resolve_config(None) == ExperimentConfig()
