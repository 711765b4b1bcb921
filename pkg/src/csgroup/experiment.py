"""Batch harness: JSON manifests in, deterministic CSV and JSON files out.

Manifest keys::

    {
      "problems": [{"function_id": 1, "dimension": 100, "seed": 0}, ...],
      "methods": ["csg", "dg", "rdg_like", "ddg", "random"],
      "decomposition_config": {"eps2_scale": 0.4, ...},
      "optimization": {"budget": 200000, "runs": 10, "checkpoints": [120000]},
      "output_dir": "results",
      "seed": 0
    }

``random`` (random equal-size grouping) is only meaningful for optimization.
Problems may also be given as ``[function_id, dimension, seed]`` triples.
"""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import ddg_decompose, dg_pairwise, rdg_like
from .bms import build_bms
from .cc import SansdeConfig, cc_optimize, partition_separables, random_grouping
from .csg import CsgConfig, csg_decompose
from .metrics import AccuracyReport
from .problem import BudgetExhausted, GroupingResult, ObjectiveProblem

DECOMPOSERS = ("csg", "dg", "rdg_like", "ddg")
OPT_METHODS = DECOMPOSERS + ("random",)

DECOMP_HEADER = [
    "method", "function_id", "dimension", "seed", "sa", "na",
    "fe_additive", "fe_msvd", "fe_gss", "fe_gsvd", "fe_nvg", "fe_total",
]
OPT_HEADER = ["method", "function_id", "dimension", "run", "checkpoint_fe", "best_fitness"]
AGG_HEADER = ["method", "function_id", "dimension", "checkpoint_fe", "runs", "mean", "median", "std"]


class ManifestError(ValueError):
    pass


def fmt(v) -> str:
    """Stable CSV float: 6 significant digits in scientific notation."""
    return "" if v is None else f"{float(v):.5e}"


@dataclass
class OptimizationSettings:
    budget: int
    runs: int = 1
    checkpoints: list[int] = field(default_factory=list)
    group_cap: int = 50
    random_group_size: int = 50
    pop_size: int = 50

    def __post_init__(self):
        if self.budget <= 0 or self.runs <= 0:
            raise ManifestError("optimization budget and runs must be positive")
        c = [int(x) for x in self.checkpoints]
        if any(b <= a for a, b in zip(c, c[1:])):
            raise ManifestError("checkpoints must be strictly increasing")
        if c and c[-1] > self.budget:
            raise ManifestError("checkpoints must not exceed the budget")
        if c and c[0] <= 0:
            raise ManifestError("checkpoints must be positive")
        self.checkpoints = c


@dataclass
class ExperimentManifest:
    problems: list[tuple[int, int, int]]
    methods: list[str]
    decomposition_config: dict = field(default_factory=dict)
    optimization: OptimizationSettings | None = None
    output_dir: str = "results"
    seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ManifestError("methods must not be empty")
        bad = [m for m in self.methods if m not in OPT_METHODS]
        if bad:
            raise ManifestError(f"unknown methods {bad}; choose from {list(OPT_METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ManifestError("duplicate methods")
        if not self.problems:
            raise ManifestError("problems must not be empty")
        try:
            CsgConfig.from_dict(self.decomposition_config)
        except (TypeError, ValueError) as e:
            raise ManifestError(f"bad decomposition_config: {e}") from e

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        unknown = set(d) - {"problems", "methods", "decomposition_config", "optimization", "output_dir", "seed"}
        if unknown:
            raise ManifestError(f"unknown manifest keys {sorted(unknown)}")
        problems = []
        for p in d.get("problems", []):
            if isinstance(p, dict):
                p = (p["function_id"], p["dimension"], p.get("seed", 0))
            if len(p) != 3:
                raise ManifestError(f"bad problem entry {p!r}")
            problems.append(tuple(int(v) for v in p))
        opt = d.get("optimization")
        if opt is not None:
            try:
                opt = OptimizationSettings(**opt)
            except TypeError as e:
                raise ManifestError(f"bad optimization block: {e}") from e
        return cls(
            problems,
            list(d.get("methods", [])),
            dict(d.get("decomposition_config", {})),
            opt,
            str(d.get("output_dir", "results")),
            int(d.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def decompose(method: str, problem: ObjectiveProblem, config: dict | None = None) -> GroupingResult:
    """Run one decomposer; FEs are charged to ``problem.ledger``."""
    if method == "csg":
        return csg_decompose(problem, CsgConfig.from_dict(config or {}))[0]
    if method == "dg":
        return dg_pairwise(problem)[1]
    if method == "rdg_like":
        return rdg_like(problem)
    if method == "ddg":
        return ddg_decompose(problem)
    raise ValueError(f"{method!r} is not a decomposition method")


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _failure(cell: dict, exc: Exception) -> dict:
    return {**cell, "error": type(exc).__name__, "message": str(exc)}


# ---------------------------------------------------------------------------
# decomposition


def _decomp_cell(args):
    method, (fid, D, seed), cfg = args
    cell = {"method": method, "function_id": fid, "dimension": D, "seed": seed}
    try:
        inst = build_bms(fid, D, seed)
        problem = inst.fresh_problem()
        g = decompose(method, problem, cfg)
        g.validate(D)
        rep = AccuracyReport.build(inst.ground_truth, g, problem.ledger)
        return cell, rep, g, None
    except Exception as e:  # failures are reported, not raised
        return cell, None, None, _failure(cell, e)


def run_decomposition_suite(manifest: ExperimentManifest, out_dir=None, threads: int = 1) -> dict:
    """Write decomposition.csv, decomposition.json and decomposition_failures.json."""
    out = Path(out_dir or manifest.output_dir)
    methods = [m for m in manifest.methods if m in DECOMPOSERS]
    if not methods:
        raise ManifestError("no decomposition methods in manifest")
    cells = [(m, p, manifest.decomposition_config) for m in methods for p in manifest.problems]
    results = _pmap(_decomp_cell, cells, threads)

    rows, sidecar, failures = [], [], []
    for cell, rep, g, fail in results:
        if fail is not None:
            failures.append(fail)
            continue
        st = rep.fe_by_stage
        rows.append([
            cell["method"], cell["function_id"], cell["dimension"], cell["seed"],
            fmt(rep.sa), fmt(rep.na),
            st["additive_stage"], st["msvd_stage"], st["gss_stage"], st["gsvd_stage"], st["nvg_stage"],
            rep.fe_total,
        ])
        sidecar.append({**cell, **rep.to_json(), "grouping": g.to_json()})
    paths = {
        "csv": out / "decomposition.csv",
        "json": out / "decomposition.json",
        "failures": out / "decomposition_failures.json",
    }
    _write_csv(paths["csv"], DECOMP_HEADER, rows)
    _write_json(paths["json"], sidecar)
    _write_json(paths["failures"], failures)
    return paths


# ---------------------------------------------------------------------------
# optimization


def run_seed(base_seed: int, fid: int, D: int, pseed: int, run: int) -> int:
    return int(np.random.SeedSequence([base_seed, fid, D, pseed, run]).generate_state(1)[0])


def _opt_cell(args):
    method, (fid, D, pseed), run, opt, cfg, base_seed = args
    cell = {"method": method, "function_id": fid, "dimension": D, "seed": pseed, "run": run}
    seed = run_seed(base_seed, fid, D, pseed, run)
    try:
        inst = build_bms(fid, D, pseed)
        problem = inst.fresh_problem(opt.budget)
        if method == "random":
            subs = random_grouping(D, opt.random_group_size, seed)
        else:
            subs = partition_separables(decompose(method, problem, cfg), opt.group_cap)
        decomp_fe = problem.ledger.total
        state = cc_optimize(
            problem, subs, opt.budget, seed, opt.checkpoints, SansdeConfig(pop_size=opt.pop_size)
        )
        points = dict(state.checkpoints)
        points[opt.budget] = state.best_fitness
        info = {
            **cell,
            "run_seed": seed,
            "decomposition_fe": decomp_fe,
            "ledger": problem.ledger.as_dict(),
            "subcomponents": len(subs),
            "best_fitness": state.best_fitness,
        }
        return cell, sorted(points.items()), state, info, None
    except (BudgetExhausted, ValueError) as e:
        return cell, None, None, None, _failure(cell, e)


def run_optimization_suite(
    manifest: ExperimentManifest, out_dir=None, threads: int = 1, seed: int | None = None
) -> dict:
    """Per-run checkpoint CSV, aggregate CSV, per-run traces and JSON sidecars.

    Decomposition FEs are charged to the same budget as the optimizer.
    """
    opt = manifest.optimization
    if opt is None:
        raise ManifestError("manifest has no optimization block")
    out = Path(out_dir or manifest.output_dir)
    base = manifest.seed if seed is None else seed
    cells = [
        (m, p, r, opt, manifest.decomposition_config, base)
        for m in manifest.methods
        for p in manifest.problems
        for r in range(opt.runs)
    ]
    results = _pmap(_opt_cell, cells, threads)

    rows, sidecar, failures = [], [], []
    per_point: dict[tuple, list[float]] = {}
    for cell, points, state, info, fail in results:
        if fail is not None:
            failures.append(fail)
            continue
        key = (cell["method"], cell["function_id"], cell["dimension"])
        for fe, best in points:
            rows.append([*key, cell["run"], fe, fmt(best)])
            # aggregate what the per-run file holds, so it can be recomputed exactly
            per_point.setdefault((*key, fe), []).append(float(fmt(best)))
        name = f"{cell['method']}_f{cell['function_id']}_d{cell['dimension']}_s{cell['seed']}_r{cell['run']}.csv"
        (out / "traces").mkdir(parents=True, exist_ok=True)
        with open(out / "traces" / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(state.trace_csv())
        sidecar.append(info)

    agg = []
    for (m, fid, D, fe), vals in per_point.items():
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        agg.append([m, fid, D, fe, len(vals), fmt(statistics.fmean(vals)), fmt(statistics.median(vals)), fmt(std)])
    paths = {
        "csv": out / "optimization.csv",
        "aggregate": out / "optimization_aggregate.csv",
        "json": out / "optimization.json",
        "failures": out / "optimization_failures.json",
        "traces": out / "traces",
    }
    _write_csv(paths["csv"], OPT_HEADER, rows)
    _write_csv(paths["aggregate"], AGG_HEADER, agg)
    _write_json(paths["json"], sidecar)
    _write_json(paths["failures"], failures)
    return paths
