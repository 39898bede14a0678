import pytest
from hypothesis import given
from hypothesis import strategies as st

from eitqnd.config import ExperimentConfig, GridSpec, parse_config
from eitqnd.errors import ConfigError
from eitqnd.experiments import SolverOptions
from eitqnd.model import SystemParams


def test_defaults_are_figure_defaults():
    cfg = parse_config("")
    assert cfg.params == SystemParams()
    p = cfg.params
    assert (p.omega_p, p.omega_c, p.delta_p, p.delta_c) == (0.02, 0.2, -1.0, -1.0)
    assert (p.gamma_ea, p.gamma_eb, p.gamma_deph, p.kappa, p.g_disp) == (1.0, 1.0, 0.1, 0.3, 0.03)
    assert cfg.output_format == "csv"


def test_full_config_parses():
    cfg = parse_config("""
[run]
experiment = sweep
seed = 7
jobs = 2
[params]
kappa = 0.5
[grid]
g_list = 0.08, 0.03
n_list = 0, 1, 2
[solver]
method = rk4
n_max = auto
[output]
format = json
dir = out
[herald]
alpha = 0.5+0.5j
shots = 100
[transmission]
length = 1e-3
wavelength = 7.8e-7
""")
    assert cfg.experiment == "sweep" and cfg.seed == 7 and cfg.jobs == 2
    assert cfg.params.kappa == 0.5
    assert cfg.grid == GridSpec(g_list=(0.08, 0.03), n_list=(0, 1, 2))
    assert cfg.solver.method == "rk4" and cfg.solver.n_max is None
    assert cfg.herald.alpha == 0.5 + 0.5j
    assert cfg.transmission.wavelength == 7.8e-7


@pytest.mark.parametrize("text, line", [
    ("[params]\nkappa = 0.3\nkapa = 0.3\n", 3),
    ("[solver]\n\nmethod = euler\n", 3),
    ("[params]\nomega_p = abc\n", 2),
    ("[grid]\nn_list = 0, -1\n", 2),
    ("[output]\nformat = xml\n", 2),
    ("[run]\nexperiment = fig9\n", 2),
    ("[params]\nkappa = 0.3\nkappa = 0.4\n", 3),
    ("[herald]\nnoise_sigma = 0.1\nnoise_gap_fraction = 0.2\n", 3),
    ("[run]\njobs = 0\n", 2),
    ("[params]\n# comment\ngamma_eb = -1\n", 3),
    ("[solver]\nsample_dt = 100\n", 2),
    ("[bogus]\nx = 1\n", 1),
    ("kappa = 1\n", 1),
])
def test_strict_errors_with_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_column_reported():
    with pytest.raises(ConfigError) as info:
        parse_config("[params]\n   kapa = 1\n")
    assert info.value.column == 4


finite = st.floats(min_value=-3, max_value=3, allow_nan=False)
positive = st.floats(min_value=0, max_value=3, allow_nan=False)


@given(
    st.builds(SystemParams, omega_p=finite, omega_c=finite, delta_p=finite, delta_c=finite,
              gamma_eb=positive, gamma_deph=positive, kappa=positive, g_disp=finite,
              dispersive_sign=st.sampled_from((-1, 1))),
    st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=4).map(tuple),
    st.integers(0, 2**32),
    st.sampled_from(["rk45", "rk4"]),
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
)
def test_resolved_ini_round_trip(params, g_list, seed, method, alpha):
    from eitqnd.config import HeraldOptions
    cfg = ExperimentConfig(experiment="fig3", params=params, grid=GridSpec(g_list=g_list),
                           solver=SolverOptions(method=method), herald=HeraldOptions(alpha=alpha), seed=seed)
    assert parse_config(cfg.to_ini()) == cfg


def test_shipped_configs_parse():
    from pathlib import Path
    from eitqnd.config import load_config
    root = Path(__file__).resolve().parents[1] / "configs"
    default = load_config(root / "default.ini")
    assert default.params == SystemParams() and default.solver == SolverOptions()
    for path in root.glob("*.ini"):
        load_config(path)
