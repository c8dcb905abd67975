from pathlib import Path

import pytest

from frontlab.config import (
    DirichletSection,
    ExperimentConfig,
    FrontSection,
    GridSection,
    HeatSection,
    ScenarioSection,
    load_config,
    parse_config,
)
from frontlab.errors import ConfigError
from frontlab.kpp2d import YBoundary
from frontlab.numerics import Frame, Grid2D
from frontlab.records import config_hash
from frontlab.scenarios import ScenarioKind

RUN1D = """\
pipeline = "run1d"
name = "bramson"

[solver]
dt = 0.01
t_end = 100

[front]
fit_window = [10, 100]
"""

# (text, key, line)
BAD_CONFIGS = [
    ('pipeline = "run1d"\n[solver]\ndtt = 0.01\n', "solver.dtt", 3),
    ('pipeline = "run1d"\n[solverr]\ndt = 0.01\n', "solverr", 2),
    ('pipeline = "run1d"\n\n[solver]\ndt = -1.0\n', "solver.dt", 4),
    ('pipeline = "run1d"\n[solver]\ndt = "fast"\n', "solver.dt", 3),
    ('pipeline = "run1d"\n[solver]\ndt = true\n', "solver.dt", 3),
    ('pipeline = "run1d"\n[solver]\nstartup_steps = 2.5\n', "solver.startup_steps", 3),
    ('pipeline = "run1d"\n[front]\nfit_window = 50\n', "front.fit_window", 3),
    ('pipeline = "run1d"\n[front]\nlevel = 0.99\n', "front.level", 3),
    ('pipeline = "verify"\n', "pipeline", 1),
    ('pipeline = "run1d"\nseed = 3\n', "seed", 2),
    ('pipeline = "run1d"\n[scenario]\nkind = "two_limit"\n', "scenario.kind", 3),
    ('pipeline = "run2d"\n[scenario]\nkind = "heaviside"\n', "scenario.kind", 3),
    ('pipeline = "run1d"\n[grid]\nhx = 0.01\n[solver]\ndt = 0.02\n', "solver.dt", 5),
    ('pipeline = "run1d"\n[scenario]\nkind = "wavy"\n', "scenario.kind", 3),
    ('pipeline = "suite"\n', "suite.members", None),
]


def test_defaults_hold_every_physical_setting():
    config = parse_config('pipeline = "wave"\n')
    assert config.pipeline == "wave"
    assert config.solver.dt == 0.02
    assert config.solver.t_end == 2000.0
    assert config.solver.checkpoints_per_decade == 32
    assert config.wave.half_width == 40.0
    assert config.front.fit_window == (50.0, 2000.0)
    assert config.heat.h == 0.05
    assert config.heat.dt == 0.01
    assert config.dirichlet.epsilons == (0.05, 0.1, 0.2)
    assert config.gates.slope_min == -1.65
    assert config.gates.slope_max == -1.35
    assert config.source is None


def test_overrides_are_coerced():
    config = parse_config(RUN1D, "bramson.toml")
    assert config.name == "bramson"
    assert config.solver.dt == 0.01
    assert config.solver.t_end == 100.0
    assert isinstance(config.solver.t_end, float)
    assert config.front.fit_window == (10.0, 100.0)
    assert config.solver.frame == "moving"
    assert config.source == "bramson.toml"


@pytest.mark.parametrize(("text", "key", "line"), BAD_CONFIGS)
def test_bad_configs_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as caught:
        parse_config(text, "bad.toml")
    err = caught.value
    assert err.key == key, f"\nconfig:\n{text}\nmessage: {err}"
    assert err.line == line, f"\nconfig:\n{text}\nmessage: {err}"
    assert err.source == "bad.toml"
    assert key in str(err)


def test_error_message_format():
    with pytest.raises(ConfigError) as caught:
        parse_config('pipeline = "run1d"\n[solver]\ndtt = 0.01\n', "bad.toml")
    assert str(caught.value).startswith("bad.toml:3: solver.dtt: ")


def test_config_error_is_a_value_error():
    with pytest.raises(ValueError):
        parse_config('pipeline = "run1d"\n[solver]\ndt = 0\n')


def test_malformed_toml_reports_its_line():
    with pytest.raises(ConfigError) as caught:
        parse_config('pipeline = "run1d"\n[solver\ndt = 0.01\n')
    assert caught.value.line == 2


def test_missing_pipeline():
    with pytest.raises(ConfigError) as caught:
        parse_config("[solver]\ndt = 0.01\n")
    assert caught.value.key == "pipeline"


def test_load_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(RUN1D)
    config = load_config(path)
    assert config.source == str(path)
    assert config == parse_config(RUN1D)
    with pytest.raises(ConfigError) as caught:
        load_config(tmp_path / "missing.toml")
    assert caught.value.source == str(tmp_path / "missing.toml")


def test_config_hash_follows_the_settings():
    a = parse_config(RUN1D, "a.toml")
    b = parse_config(RUN1D, "b.toml")
    c = parse_config(RUN1D.replace("dt = 0.01", "dt = 0.02"))
    assert config_hash(a.snapshot()) == config_hash(b.snapshot())
    assert config_hash(a.snapshot()) != config_hash(c.snapshot())
    assert "source" not in a.snapshot()


def test_with_threads():
    config = parse_config(RUN1D).with_threads(4)
    assert config.solver.threads == 4
    assert config.solver.dt == 0.01


def test_solver_settings():
    config = parse_config(RUN1D)
    grid = config.grid.x_grid(config.solver.t_end)
    cfg = config.solver.solver_1d(grid)
    assert cfg.frame is Frame.MOVING
    assert cfg.dt == 0.01
    assert cfg.startup_steps == 50


def test_default_x_grid_grows_with_the_horizon():
    grid = GridSection().x_grid(2500.0)
    assert grid.x_min == -60.0
    assert grid.x_max >= 260.0 - 0.05
    assert grid.h == pytest.approx(0.05)


def test_y_grid_defaults_to_the_scenario_extent():
    grid = GridSection(hy=0.5).y_grid((0.0, 40.0))
    assert (grid.x_min, grid.x_max) == (0.0, 40.0)
    assert grid.n == 80
    override = GridSection(y_min=-10.0, y_max=10.0).y_grid((0.0, 40.0))
    assert (override.x_min, override.x_max) == (-10.0, 10.0)


def test_two_limit_scenario():
    section = ScenarioSection(kind="two_limit", plus=(2.0, 2.0), minus=(1.0, -1.0))
    plus, minus = section.limit_data()
    assert (plus.x1, plus.x2) == (2.0, 2.0)
    assert (minus.x1, minus.x2) == (1.0, -1.0)
    scenario = section.build()
    assert scenario.kind is ScenarioKind.TWO_LIMIT
    assert (scenario.x1, scenario.x2) == (2.0, -1.0)


def test_periodic_scenario():
    scenario = ScenarioSection(kind="periodic_y", amplitude=1.0, period=10.0).build()
    assert scenario.kind is ScenarioKind.PERIODIC_Y
    assert scenario.y_extent == (0.0, 20.0)


def test_oscillating_scenario():
    scenario = ScenarioSection(kind="oscillating").build()
    assert scenario.kind is ScenarioKind.OSCILLATING
    assert scenario.y_extent == (0.0, 72.0)
    wider = ScenarioSection(kind="oscillating", y_extent=(0.0, 100.0)).build()
    assert wider.y_extent == (0.0, 100.0)


def test_oscillation_sequence_choices():
    desk = ScenarioSection().oscillation_sequence()
    assert desk.label == "desk"
    assert desk.xs.tolist() == [1.0, 6.0, 36.0]
    fact = ScenarioSection(sequence="factorial", factorial_n=6).oscillation_sequence()
    assert fact.label == "factorial"
    assert fact.xs.size == 6
    scaled = ScenarioSection(lambda_amp=0.1).oscillation_sequence()
    assert scaled.lambda_amp == 0.1


def test_datum_1d():
    assert ScenarioSection(kind="heaviside", x1=1.5).datum_1d().x1 == 1.5
    step = ScenarioSection(kind="exp_step", x1=2.0, x2=-1.0).datum_1d()
    assert (step.x1, step.x2) == (2.0, -1.0)


def test_heat_section():
    section = HeatSection()
    assert section.datum()(0.0) == 2.0
    assert section.grid().h == pytest.approx(0.05)
    with pytest.raises(ConfigError):
        HeatSection(values=(1.0, 2.0))
    with pytest.raises(ConfigError):
        HeatSection(t_end=1.0)


def test_dirichlet_section():
    options = DirichletSection().options()
    assert options.xi_max == 12.0
    assert options.y_grid.h == pytest.approx(0.25)
    with pytest.raises(ConfigError) as caught:
        DirichletSection(epsilons=(0.1, 0.3))
    assert caught.value.key == "dirichlet.epsilons"
    assert DirichletSection().options(0.05).y_grid.h == pytest.approx(0.05)
    with pytest.raises(ConfigError) as caught:
        DirichletSection(heat_epsilon=0.5)
    assert caught.value.key == "dirichlet.heat_epsilon"
    with pytest.raises(ConfigError):
        DirichletSection(y_min=1.0)


def test_periodic_boundary_override():
    config = parse_config('pipeline = "run2d"\n[scenario]\nkind = "periodic_y"\n')
    scenario = config.scenario.build()
    grid = config.grid.x_grid(10.0)
    cfg = config.solver.solver_2d(Grid2D(grid, config.grid.y_grid(scenario.y_extent)), "periodic")
    assert cfg.y_bc is YBoundary.PERIODIC


def test_suite_members_resolve_next_to_the_file(tmp_path):
    path = tmp_path / "suite.toml"
    path.write_text('pipeline = "suite"\n[suite]\nmembers = ["wave.toml", "sub/heat.toml"]\n')
    config = load_config(path)
    assert config.member_paths() == [tmp_path / "wave.toml", tmp_path / "sub" / "heat.toml"]


def test_experiment_config_checks_the_pipeline():
    with pytest.raises(ConfigError):
        ExperimentConfig("plot")


SHIPPED = sorted((Path(__file__).parent.parent / "configs").glob("*.toml"))


@pytest.mark.parametrize("path", SHIPPED, ids=[p.stem for p in SHIPPED])
def test_shipped_configs_validate(path):
    config = load_config(path)
    assert config.name
    for member in config.member_paths():
        assert member.exists(), f"\n{path.name} lists missing member {member}"


@pytest.mark.parametrize("name", ["two_limit", "periodic"])
def test_shipped_2d_configs_reach_t_2000(name):
    config = load_config(Path(__file__).parent.parent / "configs" / f"{name}.toml")
    assert config.solver.t_end == 2000.0
    assert config.grid.hy == 0.25
    assert config.front.periodic_times == (1000.0, 2000.0)
    if name == "two_limit":
        assert config.scenario.build().y_extent == (-200.0, 200.0)


def test_periodic_times_must_increase():
    with pytest.raises(ConfigError) as caught:
        FrontSection(periodic_times=(2000.0, 1000.0))
    assert caught.value.key == "front.periodic_times"
