"""Strict INI experiment configuration.

Sections and keys (all optional; defaults reproduce the G-sweep figure setup)::

    [run]        experiment, seed, jobs
    [params]     omega_p, omega_c, delta_p, delta_c, gamma_ea, gamma_eb,
                 gamma_deph, kappa, g_disp, suscept_prefactor, dispersive_sign
    [grid]       g_list, kappa_list, delta_list, n_list   (comma separated)
    [solver]     method, sample_dt, step_dt, rtol, atol, n_max, t_end, fock_blocks
    [output]     format, dir
    [herald]     alpha, shots, noise_sigma, noise_gap_fraction, mode, target
    [transmission] length, wavelength

Unknown sections or keys and out-of-range values raise :class:`ConfigError`
with the offending line before any computation starts.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, EITError
from .evolve import METHODS
from .experiments import SolverOptions
from .model import SystemParams

EXPERIMENTS = ("fig2", "fig3", "fig4", "fig5", "steady", "herald", "sweep")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class GridSpec:
    g_list: tuple | None = None
    kappa_list: tuple | None = None
    delta_list: tuple | None = None
    n_list: tuple | None = None


@dataclass(frozen=True)
class HeraldOptions:
    alpha: complex = 1.0
    shots: int = 10000
    noise_sigma: float = 0.0
    noise_gap_fraction: float | None = None
    mode: str = "table"
    target: int = 1


@dataclass(frozen=True)
class TransmissionOptions:
    length: float
    wavelength: float


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str | None = None
    params: SystemParams = SystemParams()
    grid: GridSpec = GridSpec()
    solver: SolverOptions = SolverOptions()
    herald: HeraldOptions = HeraldOptions()
    transmission: TransmissionOptions | None = None
    output_format: str = "csv"
    output_dir: str = "."
    seed: int = 0
    jobs: int = 1
    source: str | None = field(default=None, compare=False)

    def to_ini(self) -> str:
        """Serialize every resolved value; loading the text back gives an equal config."""
        out = ["[run]"]
        if self.experiment:
            out.append(f"experiment = {self.experiment}")
        out += [f"seed = {self.seed}", f"jobs = {self.jobs}", "", "[params]"]
        out += [f"{k} = {_fmt(v)}" for k, v in asdict(self.params).items()]
        out += ["", "[grid]"]
        out += [f"{k} = {_fmt(v)}" for k, v in asdict(self.grid).items() if v is not None]
        out += ["", "[solver]"]
        out += [f"{k} = {_fmt(v)}" for k, v in asdict(self.solver).items() if v is not None]
        out += ["", "[output]", f"format = {self.output_format}", f"dir = {self.output_dir}", "", "[herald]"]
        out += [f"{k} = {_fmt(v)}" for k, v in asdict(self.herald).items() if v is not None]
        if self.transmission is not None:
            out += ["", "[transmission]"]
            out += [f"{k} = {_fmt(v)}" for k, v in asdict(self.transmission).items()]
        return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, complex):
        return repr(v) if v.imag else repr(v.real)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int(text):
    return int(text.strip())


def _parse_float(text):
    return float(text.strip())


def _parse_complex(text):
    return complex(text.strip().replace(" ", ""))


def _float_list(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


_SCHEMA = {
    "run": {"experiment": str.strip, "seed": _parse_int, "jobs": _parse_int},
    "params": {f.name: (_parse_int if f.name == "dispersive_sign" else _parse_float) for f in fields(SystemParams)},
    "grid": {"g_list": _float_list, "kappa_list": _float_list, "delta_list": _float_list, "n_list": _int_list},
    "solver": {
        "method": str.strip, "sample_dt": _parse_float, "step_dt": _parse_float, "rtol": _parse_float,
        "atol": _parse_float, "n_max": _optional_int, "t_end": _parse_float, "fock_blocks": _parse_bool,
    },
    "output": {"format": str.strip, "dir": str.strip},
    "herald": {
        "alpha": _parse_complex, "shots": _parse_int, "noise_sigma": _parse_float,
        "noise_gap_fraction": _parse_float, "mode": str.strip, "target": _parse_int,
    },
    "transmission": {"length": _parse_float, "wavelength": _parse_float},
}


def _locate(lines, section, key=None):
    current = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return i, 1
            continue
        if current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return i, raw.index(name) + 1
    return None, None


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"malformed config: {exc.message.splitlines()[0]}", line) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None

    lines = text.splitlines()
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(_SCHEMA)}",
                              *_locate(lines, section))
        for key, raw in parser.items(section):
            where = _locate(lines, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]; expected one of {sorted(_SCHEMA[section])}",
                                  *where)
            try:
                values[(section, key)] = _SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}", *where) from None

    def take(section):
        return {k: v for (s, k), v in values.items() if s == section}

    def guarded(section, build):
        try:
            return build()
        except (EITError, TypeError, ValueError) as exc:
            named = [k for k in _SCHEMA[section] if k in str(exc)]
            key = max(named, key=len) if named else None
            raise ConfigError(f"invalid [{section}]: {exc}", *_locate(lines, section, key)) from None

    run = take("run")
    experiment = run.get("experiment")
    if experiment is not None and experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}",
                          *_locate(lines, "run", "experiment"))
    params = guarded("params", lambda: SystemParams(**take("params")))
    grid = GridSpec(**take("grid"))
    for key in ("n_list",):
        if grid.n_list is not None and (not grid.n_list or min(grid.n_list) < 0):
            raise ConfigError("n_list must hold non-negative photon numbers", *_locate(lines, "grid", key))
    for key in ("g_list", "kappa_list", "delta_list"):
        v = getattr(grid, key)
        if v is not None and not v:
            raise ConfigError(f"{key} is empty", *_locate(lines, "grid", key))
    if grid.kappa_list is not None and min(grid.kappa_list) < 0:
        raise ConfigError("kappa_list values must be >= 0", *_locate(lines, "grid", "kappa_list"))
    solver_kw = take("solver")
    if solver_kw.get("method", "rk45") not in METHODS:
        raise ConfigError(f"solver.method must be one of {METHODS}", *_locate(lines, "solver", "method"))
    solver = SolverOptions(**solver_kw)
    guarded("solver", solver.propagation)
    if solver.n_max is not None and solver.n_max < 0:
        raise ConfigError("solver.n_max must be >= 0", *_locate(lines, "solver", "n_max"))
    herald = HeraldOptions(**take("herald"))
    if herald.shots < 1:
        raise ConfigError("herald.shots must be >= 1", *_locate(lines, "herald", "shots"))
    if herald.noise_sigma < 0:
        raise ConfigError("herald.noise_sigma must be >= 0", *_locate(lines, "herald", "noise_sigma"))
    if herald.noise_gap_fraction is not None and herald.noise_gap_fraction < 0:
        raise ConfigError("herald.noise_gap_fraction must be >= 0", *_locate(lines, "herald", "noise_gap_fraction"))
    if "noise_sigma" in take("herald") and herald.noise_gap_fraction is not None:
        raise ConfigError("set either herald.noise_sigma or herald.noise_gap_fraction, not both",
                          *_locate(lines, "herald", "noise_gap_fraction"))
    if herald.mode not in ("table", "exact"):
        raise ConfigError("herald.mode must be 'table' or 'exact'", *_locate(lines, "herald", "mode"))
    trans_kw = take("transmission")
    transmission = None
    if trans_kw:
        if set(trans_kw) != {"length", "wavelength"}:
            raise ConfigError("[transmission] needs both length and wavelength", *_locate(lines, "transmission"))
        if trans_kw["length"] <= 0 or trans_kw["wavelength"] <= 0:
            raise ConfigError("transmission length and wavelength must be positive", *_locate(lines, "transmission"))
        transmission = TransmissionOptions(**trans_kw)
    output = take("output")
    fmt = output.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}", *_locate(lines, "output", "format"))
    jobs = run.get("jobs", 1)
    if jobs < 1:
        raise ConfigError("run.jobs must be >= 1", *_locate(lines, "run", "jobs"))
    return ExperimentConfig(
        experiment=experiment, params=params, grid=grid, solver=solver, herald=herald,
        transmission=transmission, output_format=fmt, output_dir=output.get("dir", "."),
        seed=run.get("seed", 0), jobs=jobs, source=source,
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))
