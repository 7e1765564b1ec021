import pytest

from meanaction.config import default_config, load_config


def test_load_config(tmp_path):
    config_path = tmp_path / "config.toml"
    config_path.write_text(
        """
[quadrature]
rule = "gauss-legendre"
area_nx = 64
area_ny = 32
tol = 1e-10

[search]
q_max = 3
seed_nx = 8
seed_ny = 4
newton_tol = 1e-12

[ech]
guard_eps = 1e-10
precision = "mpmath"
digits = 40

[run]
threads = 2
format = "csv"
        """,
        encoding="utf-8",
    )

    config = load_config(str(config_path))

    assert config.quadrature.rule == "gauss-legendre"
    assert config.quadrature.area_grid == (64, 32)
    assert config.quadrature.tol == 1e-10
    assert config.quadrature.line_order == 32
    assert config.search.q_max == 3
    assert config.search.seed_grid == (8, 4)
    assert config.search.newton.tol == 1e-12
    assert config.search.newton.max_iter == 50
    assert config.ech.precision == "mpmath"
    assert config.ech.digits == 40
    assert config.run.threads == 2
    assert config.run.output_format == "csv"
    assert config.integrator.step == 0.01


def test_missing_file_gives_defaults(tmp_path):
    config = load_config(str(tmp_path / "absent.toml"))

    assert config == default_config()
    assert config.quadrature.area_grid == (512, 512)
    assert config.ech.guard_eps == 1e-9


def test_environment_overrides(tmp_path, monkeypatch):
    config_path = tmp_path / "config.toml"
    config_path.write_text('[run]\nthreads = 2\nseed = 1\n', encoding="utf-8")
    monkeypatch.setenv("MEANACTION_THREADS", "5")
    monkeypatch.setenv("MEANACTION_SEED", "7")
    monkeypatch.setenv("MEANACTION_GUARD_EPS", "1e-8")
    monkeypatch.setenv("MEANACTION_FORMAT", "table")

    config = load_config(str(config_path))

    assert config.run.threads == 5
    assert config.run.seed == 7
    assert config.run.output_format == "table"
    assert config.ech.guard_eps == 1e-8


def test_invalid_values_rejected(tmp_path):
    config_path = tmp_path / "config.toml"
    config_path.write_text('[quadrature]\nrule = "trapezoid"\n', encoding="utf-8")

    with pytest.raises(ValueError):
        load_config(str(config_path))


def test_with_quadrature_keeps_other_sections():
    config = default_config().with_quadrature(area_grid=(128, 16))

    assert config.quadrature.area_grid == (128, 16)
    assert config.quadrature.tol == 1e-9
    assert config.search == default_config().search
