"""Coverage sweeps over (model, scheme, role, threshold, engine) and CSV output."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass

import numpy as np

from .config import Engine, ExperimentSpec
from .coverage import ROLES, SCHEMES, coverage_table, resolve_variant
from .simulation import SimConfig, simulate

SCHEMA_TOKEN = "# schema: noma-coverage-csv/1"
COLUMNS = ("model", "scheme", "role", "t_db", "t_linear", "coverage", "ci_halfwidth",
           "trials", "seed", "engine", "laplace_variant", "wall_ms")


@dataclass(frozen=True)
class Row:
    model: str
    scheme: str
    role: str
    t_db: float
    t_linear: float
    coverage: float
    ci_halfwidth: float
    trials: int
    seed: int | str
    engine: str
    laplace_variant: str
    wall_ms: float

    def cells(self) -> list[str]:
        return [self.model, self.scheme, self.role, _num(self.t_db), _num(self.t_linear),
                _num(self.coverage), _num(self.ci_halfwidth), str(self.trials),
                str(self.seed), self.engine, self.laplace_variant, f"{self.wall_ms:.3f}"]


def _num(x: float) -> str:
    # shortest round-trip repr, stable across runs
    return repr(float(x))


def sim_config(spec: ExperimentSpec, model) -> SimConfig:
    mc = spec.mc
    return SimConfig(model, trials=mc["trials"], master_seed=mc["seed"],
                     t_grid=tuple(spec.t_linear), window_radius=mc.get("window"),
                     workers=mc.get("workers", 1))


def run_sweep(spec: ExperimentSpec) -> list[Row]:
    """All requested rows, ordered by model, scheme, role, threshold, engine."""
    T = spec.t_linear
    rows = []
    for model in spec.models:
        tables = {}
        for engine in spec.engine.engines():
            t0 = time.perf_counter()
            if engine is Engine.ANALYTIC:
                values, _ = coverage_table(model, T, tol=spec.analytic_tol,
                                           variant=spec.laplace_variant)
                half = np.zeros_like(values)
                trials, seed = 0, ""
                variant = resolve_variant(model, spec.laplace_variant).value
            else:
                res = simulate(sim_config(spec, model))
                values = res.values
                half = 1.96 * res.standard_errors
                trials, seed = res.trials, res.seed
                variant = "none"
            wall = 1e3 * (time.perf_counter() - t0) if spec.timing else 0.0
            tables[engine] = (values, half, trials, seed, variant, wall)
        for scheme in spec.schemes:
            i = SCHEMES.index(scheme)
            for role in spec.roles:
                j = ROLES.index(role)
                for k, t_db in enumerate(spec.t_grid_db):
                    for engine in spec.engine.engines():
                        values, half, trials, seed, variant, wall = tables[engine]
                        rows.append(Row(model.kind.value, scheme.value, role.value, t_db,
                                        float(T[k]), float(values[i, j, k]),
                                        float(half[i, j, k]), trials, seed, engine.value,
                                        variant, wall))
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_TOKEN + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_csv(rows))


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_TOKEN:
            raise ValueError(f"unsupported CSV schema line {first!r}")
        return list(csv.DictReader(fh))
