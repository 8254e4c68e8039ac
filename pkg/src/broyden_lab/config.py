"""Experiment configuration: an INI-style ``key = value`` file with sections.

Example::

    [problem]
    kind = quadratic
    n = 10
    mu = 1
    L = 10
    profile = log-uniform
    seed = 0

    [start]
    x0 = zero

    [solver]
    phi = bfgs; dfp; 0.5
    max_iter = 1000
    tol = 1e-12

    [compare]
    greedy = false

    [output]
    dir = out

Several schedules separated by ``;`` give one run each. Every parse error is
a :class:`ConfigError` whose message starts with ``section.key``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .problems import PROFILES
from .schedule import parse_schedule

__all__ = [
    "ConfigError",
    "ProblemConfig",
    "StartConfig",
    "SolverConfig",
    "CompareConfig",
    "OutputConfig",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize_config",
]

PROBLEM_KINDS = ("quadratic", "logsumexp")
START_RULES = ("zero", "random", "explicit", "local")
RESIDUAL_MODES = ("recurrence", "direct")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    kind: str = "quadratic"
    n: int = 10
    mu: float = 1.0
    L: float | None = None
    profile: str = "log-uniform"
    eigenvalues: tuple[float, ...] = ()
    seed: int = 0
    m: int = 20
    scale: float = 1.0
    M: float | None = None


@dataclass(frozen=True)
class StartConfig:
    x0: str = "zero"
    seed: int | None = None
    values: tuple[float, ...] = ()
    radius: float = 1.0


@dataclass(frozen=True)
class SolverConfig:
    phi: tuple[str, ...] = ("bfgs",)
    max_iter: int = 1000
    tol: float = 1e-12
    diagnostics: bool = False
    quad_order: int = 16
    residual: str = "recurrence"


@dataclass(frozen=True)
class CompareConfig:
    greedy: bool = False
    Q: float | None = None
    kmax: int = 10_000


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    prefix: str = "run"


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    start: StartConfig = field(default_factory=StartConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, section: str, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


_SECTIONS = {
    "problem": ProblemConfig,
    "start": StartConfig,
    "solver": SolverConfig,
    "compare": CompareConfig,
    "output": OutputConfig,
}


# --- scalar conversions -----------------------------------------------------

def _int(text: str) -> int:
    return int(text.strip())


def _float(text: str) -> float:
    return float(text.strip())


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else _float(text)


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else _int(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


def _schedules(text: str) -> tuple[str, ...]:
    items = tuple(p.strip() for p in text.split(";") if p.strip())
    if not items:
        raise ValueError("no schedule given")
    for item in items:
        parse_schedule(item)
    return items


_CONVERTERS = {
    ("problem", "kind"): str.strip,
    ("problem", "n"): _int,
    ("problem", "mu"): _float,
    ("problem", "L"): _opt_float,
    ("problem", "profile"): str.strip,
    ("problem", "eigenvalues"): _floats,
    ("problem", "seed"): _int,
    ("problem", "m"): _int,
    ("problem", "scale"): _float,
    ("problem", "M"): _opt_float,
    ("start", "x0"): str.strip,
    ("start", "seed"): _opt_int,
    ("start", "values"): _floats,
    ("start", "radius"): _float,
    ("solver", "phi"): _schedules,
    ("solver", "max_iter"): _int,
    ("solver", "tol"): _float,
    ("solver", "diagnostics"): _bool,
    ("solver", "quad_order"): _int,
    ("solver", "residual"): str.strip,
    ("compare", "greedy"): _bool,
    ("compare", "Q"): _opt_float,
    ("compare", "kmax"): _int,
    ("output", "dir"): str.strip,
    ("output", "prefix"): str.strip,
}


def _validate(cfg: ExperimentConfig) -> None:
    p, s, st, c = cfg.problem, cfg.solver, cfg.start, cfg.compare

    def need(ok: bool, where: str, msg: str):
        if not ok:
            raise ConfigError(f"{where}: {msg}")

    need(p.kind in PROBLEM_KINDS, "problem.kind", f"expected one of {PROBLEM_KINDS}, got {p.kind!r}")
    need(p.n >= 1, "problem.n", "must be at least 1")
    need(p.mu > 0, "problem.mu", "must be positive")
    if p.kind == "quadratic":
        need(p.profile in PROFILES, "problem.profile", f"expected one of {PROFILES}, got {p.profile!r}")
        if p.profile != "explicit":
            need(p.L is not None and p.L >= p.mu, "problem.L", "must be given and at least mu")
        else:
            need(len(p.eigenvalues) == p.n, "problem.eigenvalues", f"need {p.n} values")
    else:
        need(p.m >= 1, "problem.m", "must be at least 1")
        need(p.scale > 0, "problem.scale", "must be positive")
        need(p.L is None or p.L >= p.mu, "problem.L", "must be at least mu")
        need(p.M is None or p.M >= 0, "problem.M", "must be non-negative")
    need(st.x0 in START_RULES, "start.x0", f"expected one of {START_RULES}, got {st.x0!r}")
    if st.x0 == "explicit":
        need(len(st.values) == p.n, "start.values", f"need {p.n} values")
    need(st.x0 != "local" or p.kind == "logsumexp", "start.x0", "'local' applies to logsumexp problems")
    need(st.radius > 0, "start.radius", "must be positive")
    need(s.max_iter >= 0, "solver.max_iter", "must be non-negative")
    need(s.tol >= 0, "solver.tol", "must be non-negative")
    need(s.quad_order >= 1, "solver.quad_order", "must be at least 1")
    need(s.residual in RESIDUAL_MODES, "solver.residual", f"expected one of {RESIDUAL_MODES}")
    need(c.Q is None or c.Q >= 1, "compare.Q", "must be at least 1")
    need(c.kmax >= 1, "compare.kmax", "must be at least 1")
    need(bool(cfg.output.prefix), "output.prefix", "must not be empty")


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax: {exc}") from None
    sections = {}
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section")
        known = {f.name for f in dataclasses.fields(_SECTIONS[name])}
        values = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"{name}.{key}: unknown key")
            try:
                values[key] = _CONVERTERS[(name, key)](raw)
            except ValueError as exc:
                raise ConfigError(f"{name}.{key}: {exc}") from None
        sections[name] = _SECTIONS[name](**values)
    cfg = ExperimentConfig(**sections)
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _format(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if all(isinstance(v, str) for v in value) and value:
            return "; ".join(value)
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Text form that :func:`parse_config` maps back to an equal config."""
    lines = []
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        section = getattr(cfg, name)
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)
