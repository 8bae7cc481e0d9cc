"""Experiment specification and its flat ``key = value`` config format.

Example::

    # Fig. 1 setup, MCP only, with Monte Carlo
    model.kind = MCP
    model.lambda_b = 0.001
    model.r = 10
    engine = both
    mc.trials = 100000

Lines starting with ``#`` and blank lines are ignored.  Every key is
optional; the defaults below reproduce the Fig. 1 setup for both models.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .coverage import ROLES, SCHEMES, LaplaceVariant, RankingScheme, UserRole
from .spatial import ConfigError, ModelConfig, ModelKind

OUTPUT_DIR_ENV = "NOMA_COVERAGE_OUTPUT_DIR"


class Engine(str, enum.Enum):
    ANALYTIC = "Analytic"
    MC = "MC"
    BOTH = "Both"

    @classmethod
    def parse(cls, value) -> "Engine":
        for e in cls:
            if str(value).strip().lower() == e.value.lower():
                return e
        raise ValueError(f"expected one of analytic, mc, both; got {value!r}")

    def engines(self) -> tuple["Engine", ...]:
        return (Engine.ANALYTIC, Engine.MC) if self is Engine.BOTH else (self,)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return n


def _seed(v: str) -> int:
    n = int(v)
    if not 0 <= n < 2**64:
        raise ValueError("seed must be in [0, 2^64)")
    return n


def _kinds(v: str) -> tuple[ModelKind, ...]:
    s = v.strip().upper()
    if s == "BOTH":
        return (ModelKind.PPP, ModelKind.MCP)
    return tuple(ModelKind.parse(p) for p in s.split(","))


def _schemes(v: str) -> tuple[RankingScheme, ...]:
    names = {s.value.lower(): s for s in SCHEMES}
    names["msp-ad"] = RankingScheme.MSP_AD
    picked = {names[p.strip().lower()] for p in v.split(",")}
    return tuple(s for s in SCHEMES if s in picked)


def _roles(v: str) -> tuple[UserRole, ...]:
    picked = {UserRole(p.strip().lower()) for p in v.split(",")}
    return tuple(r for r in ROLES if r in picked)


def _variant(v: str) -> LaplaceVariant:
    return LaplaceVariant(v.strip().lower())


# key -> (parser, default); defaults mirror the Fig. 1 caption
SCHEMA = {
    "model.kind": (_kinds, (ModelKind.PPP, ModelKind.MCP)),
    "model.lambda_b": (float, 0.001),
    "model.r": (float, 10.0),
    "model.alpha": (float, 4.0),
    "model.lambda_u": (float, None),
    "sweep.t_db_min": (float, -10.0),
    "sweep.t_db_max": (float, 20.0),
    "sweep.t_db_step": (float, 1.0),
    "sweep.schemes": (_schemes, SCHEMES),
    "sweep.roles": (_roles, ROLES),
    "engine": (Engine.parse, Engine.ANALYTIC),
    "laplace_variant": (_variant, LaplaceVariant.AUTO),
    "analytic.tol": (float, 1e-4),
    "mc.trials": (_positive_int, 100_000),
    "mc.seed": (_seed, 1),
    "mc.workers": (_positive_int, 1),
    "mc.window": (float, None),
    "output": (str, "coverage.csv"),
    "output.timing": (_bool, True),
}


def t_grid(t_min: float, t_max: float, step: float) -> tuple[float, ...]:
    """Inclusive dB grid ``t_min, t_min + step, ..., t_max``."""
    if not step > 0:
        raise ConfigError("sweep.t_db_step: step must be > 0")
    if not t_max >= t_min:
        raise ConfigError("sweep.t_db_max: must be >= sweep.t_db_min")
    n = int(math.floor((t_max - t_min) / step + 1e-9)) + 1
    return tuple(float(v) for v in np.round(t_min + step * np.arange(n), 10))


@dataclass(frozen=True)
class ExperimentSpec:
    models: tuple[ModelConfig, ...]
    schemes: tuple[RankingScheme, ...] = SCHEMES
    roles: tuple[UserRole, ...] = ROLES
    t_grid_db: tuple[float, ...] = t_grid(-10.0, 20.0, 1.0)
    engine: Engine = Engine.ANALYTIC
    mc: dict = field(default_factory=lambda: {"trials": 100_000, "seed": 1, "workers": 1,
                                              "window": None})
    laplace_variant: LaplaceVariant = LaplaceVariant.AUTO
    output_path: Path = Path("coverage.csv")
    analytic_tol: float = 1e-4
    timing: bool = True

    def __post_init__(self):
        t = self.t_grid_db
        if not t or any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("t_grid_db must be nonempty and strictly increasing")
        if not self.schemes or not self.roles or not self.models:
            raise ConfigError("need at least one model, scheme and role")

    @property
    def t_linear(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.t_grid_db) / 10.0)


def _split_line(line: str, lineno: int):
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    if "=" not in text:
        raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
    key, value = (p.strip() for p in text.split("=", 1))
    return key.lower(), value


def build_spec(values: dict) -> ExperimentSpec:
    """ExperimentSpec from raw string values (unknown keys rejected)."""
    parsed = {}
    for key, raw in values.items():
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        parser, _ = SCHEMA[key]
        try:
            parsed[key] = parser(raw) if isinstance(raw, str) else raw
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{key}: invalid value {raw!r} ({exc})") from None
    get = lambda k: parsed.get(k, SCHEMA[k][1])

    models = []
    for kind in get("model.kind"):
        try:
            if kind is ModelKind.PPP:
                models.append(ModelConfig.ppp(get("model.lambda_b"), get("model.alpha"),
                                              get("model.lambda_u")))
            else:
                models.append(ModelConfig.mcp(get("model.lambda_b"), get("model.r"),
                                              get("model.alpha")))
        except ConfigError as exc:
            msg = str(exc)
            key = next((k for k in ("alpha", "lambda_b", "lambda_u") if msg.startswith(k)),
                       "r" if "radius" in msg else "kind")
            raise ConfigError(f"model.{key}: {msg}") from None

    grid = t_grid(get("sweep.t_db_min"), get("sweep.t_db_max"), get("sweep.t_db_step"))
    output = Path(get("output"))
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        output = Path(env_dir) / output.name
    tol = get("analytic.tol")
    if not tol > 0:
        raise ConfigError("analytic.tol: must be > 0")
    window = get("mc.window")
    if window is not None and not window > 0:
        raise ConfigError("mc.window: must be > 0")
    if window is not None:
        floor = 10.0 / math.sqrt(math.pi * get("model.lambda_b"))
        if window < floor:
            raise ConfigError(f"mc.window: {window} is below the minimum {floor:.6g}")
    return ExperimentSpec(
        models=tuple(models),
        schemes=get("sweep.schemes"),
        roles=get("sweep.roles"),
        t_grid_db=grid,
        engine=get("engine"),
        mc={"trials": get("mc.trials"), "seed": get("mc.seed"),
            "workers": get("mc.workers"), "window": window},
        laplace_variant=get("laplace_variant"),
        output_path=output,
        analytic_tol=tol,
        timing=get("output.timing"),
    )


def read_config(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            kv = _split_line(line, lineno)
            if kv is None:
                continue
            key, value = kv
            if key not in SCHEMA:
                raise ConfigError(f"{key}: unknown key (line {lineno})")
            values[key] = value
    return values


def parse_config(path=None, overrides: dict | None = None) -> ExperimentSpec:
    """Read a config file (optional) and apply ``overrides`` on top."""
    values = read_config(path) if path is not None else {}
    values.update(overrides or {})
    return build_spec(values)


def with_output(spec: ExperimentSpec, path) -> ExperimentSpec:
    return replace(spec, output_path=Path(path))
