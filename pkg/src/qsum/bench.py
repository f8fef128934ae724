"""Configuration-driven multi-trial experiments.

A config names one problem family, one or more solvers and a run budget.
Every trial draws one instance from ``SeedSequence([master_seed, trial])``
and runs all solvers on that same instance.  Results go to ``trials.csv``
(one row per trial and solver), ``summary.json`` and, optionally, one
trajectory CSV per run.

For the Cobb-Douglas family the reported ``f_opt`` is the best efficiency
``sum_i R_i`` seen along the trajectory (a maximum, positive), whichever of
the two formulations the solver was fed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError, QsumError
from .problems import (
    default_start,
    default_targets,
    estimate_hoelder_constants,
    example3_adversarial_selector,
    generate_mcdpe,
    make_example3,
    make_example4,
    random_feasibility_problem,
    sor_direct_problem,
    sor_to_sum_problem,
    total_ratio,
)
from .solvers import (
    RunResult,
    StopCriteria,
    canonical_selector,
    classical_run,
    incsgm_run,
    randsgm_run,
    sgpm_run,
)
from .stepsize import StepsizeRule, rule_from_dict

TRIALS_HEADER = ["trial", "seed", "algorithm", "stepsize", "f_opt", "iterations", "subgrad_evals", "wall_time_s", "status"]
TRAJECTORY_HEADER = ["k", "f_value", "stepsize", "dist", "evals"]

PROBLEM_TYPES = ("mcdpe", "feasibility", "example3", "example4")
ALGORITHMS = ("incsgm", "randsgm", "sgpm", "classical")
REORDERS = ("fixed", "shuffle", "shift")
SELECTORS = ("canonical", "adversarial")
MAX_DIMS = {"m": 100, "n": 1000, "s": 1000}


# -- configuration ----------------------------------------------------------


def _get(d: dict, key: str, kind, default, path: str):
    if key not in d or d[key] is None:
        return default
    value = d[key]
    ok = isinstance(value, kind) and not (kind is not bool and isinstance(value, bool))
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value, ok = float(value), True
    if not ok:
        raise ConfigurationError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", f"{path}.{key}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigurationError("must be finite", f"{path}.{key}")
    return value


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigurationError("must be an object", path)
    for key in d:
        if key not in allowed:
            raise ConfigurationError("unknown field", f"{path}.{key}")


def _choice(value, options, path):
    if value not in options:
        raise ConfigurationError(f"must be one of {list(options)}, got {value!r}", path)
    return value


@dataclass(frozen=True)
class ProblemSpec:
    type: str = "mcdpe"
    m: int = 10
    n: int = 100
    s: int = 100
    master_seed: int = 0
    hoelder_samples: int = 200
    target_budget: int = 200

    @classmethod
    def from_dict(cls, d: dict, path: str = "problem") -> "ProblemSpec":
        _check_keys(d, {f for f in cls.__dataclass_fields__}, path)
        kind = _choice(_get(d, "type", str, None, path), PROBLEM_TYPES, f"{path}.type")
        out = {"type": kind}
        for key in ("m", "n", "s", "master_seed", "hoelder_samples", "target_budget"):
            value = _get(d, key, int, getattr(cls, key), path)
            low = 0 if key == "master_seed" else 1
            if value < low:
                raise ConfigurationError(f"must be >= {low}", f"{path}.{key}")
            if key in MAX_DIMS and value > MAX_DIMS[key]:
                raise ConfigurationError(f"must be <= {MAX_DIMS[key]}", f"{path}.{key}")
            out[key] = value
        return cls(**out)


@dataclass(frozen=True)
class SolverSpec:
    """One solver configuration.  ``name`` defaults to ``algorithm`` and must be unique."""

    algorithm: str
    stepsize: Optional[StepsizeRule] = None
    tol_opt: float = 1e-9
    reorder: str = "fixed"
    gamma: float = 1.0
    selector: str = "canonical"
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.algorithm

    def stepsize_label(self) -> str:
        if self.algorithm == "sgpm":
            return f"sgpm(gamma={self.gamma!r})"
        return self.stepsize.label()

    @classmethod
    def from_dict(cls, d: dict, path: str = "solvers[0]") -> "SolverSpec":
        _check_keys(d, {f for f in cls.__dataclass_fields__}, path)
        algorithm = _choice(_get(d, "algorithm", str, None, path), ALGORITHMS, f"{path}.algorithm")
        rule = None
        if algorithm != "sgpm":
            raw = d.get("stepsize", {"rule": "constant", "v": 1.5})
            rule = rule_from_dict(raw, f"{path}.stepsize")
        elif d.get("stepsize") is not None:
            raise ConfigurationError("sgpm takes gamma, not a stepsize rule", f"{path}.stepsize")
        tol = _get(d, "tol_opt", float, 1e-9, path)
        if tol < 0:
            raise ConfigurationError("must be nonnegative", f"{path}.tol_opt")
        gamma = _get(d, "gamma", float, 1.0, path)
        if not 0 < gamma < 2:
            raise ConfigurationError("must lie in (0, 2)", f"{path}.gamma")
        return cls(
            algorithm=algorithm,
            stepsize=rule,
            tol_opt=tol,
            reorder=_choice(_get(d, "reorder", str, "fixed", path), REORDERS, f"{path}.reorder"),
            gamma=gamma,
            selector=_choice(_get(d, "selector", str, "canonical", path), SELECTORS, f"{path}.selector"),
            name=_get(d, "name", str, "", path),
        )


@dataclass(frozen=True)
class RunSpec:
    max_iterations: int = 200
    target_gap: float = 0.0
    trials: int = 50
    parallel_trials: bool = False
    x0: Optional[tuple] = None

    @classmethod
    def from_dict(cls, d: dict, path: str = "run") -> "RunSpec":
        _check_keys(d, {f for f in cls.__dataclass_fields__}, path)
        max_it = _get(d, "max_iterations", int, cls.max_iterations, path)
        if max_it < 1:
            raise ConfigurationError("must be >= 1", f"{path}.max_iterations")
        trials = _get(d, "trials", int, cls.trials, path)
        if trials < 1:
            raise ConfigurationError("must be >= 1", f"{path}.trials")
        gap = _get(d, "target_gap", float, 0.0, path)
        if gap < 0:
            raise ConfigurationError("must be nonnegative", f"{path}.target_gap")
        x0 = d.get("x0")
        if x0 is not None:
            if not isinstance(x0, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0):
                raise ConfigurationError("must be a list of numbers", f"{path}.x0")
            x0 = tuple(float(v) for v in x0)
        return cls(max_it, gap, trials, _get(d, "parallel_trials", bool, False, path), x0)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "results"
    emit_trajectories: bool = False

    @classmethod
    def from_dict(cls, d: dict, path: str = "output") -> "OutputSpec":
        _check_keys(d, {"directory", "emit_trajectories"}, path)
        return cls(_get(d, "directory", str, "results", path), _get(d, "emit_trajectories", bool, False, path))


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    solvers: tuple
    run: RunSpec = RunSpec()
    output: OutputSpec = OutputSpec()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys(d, {"problem", "solvers", "solver", "run", "output"}, "config")
        if "problem" not in d:
            raise ConfigurationError("missing field", "problem")
        problem = ProblemSpec.from_dict(d["problem"])
        if "solvers" in d and "solver" in d:
            raise ConfigurationError("give either solver or solvers", "solvers")
        if "solver" in d:
            raw, key = [d["solver"]], "solver"
        else:
            raw, key = d.get("solvers"), "solvers"
        if not isinstance(raw, list) or not raw:
            raise ConfigurationError("must be a nonempty list", key)
        solvers = tuple(
            SolverSpec.from_dict(s, key if key == "solver" else f"{key}[{i}]") for i, s in enumerate(raw)
        )
        labels = [s.label for s in solvers]
        if len(set(labels)) != len(labels):
            raise ConfigurationError(f"solver names must be unique, got {labels}", key)
        for i, s in enumerate(solvers):
            if s.algorithm == "sgpm" and problem.type not in ("mcdpe", "feasibility", "example3"):
                raise ConfigurationError(f"sgpm cannot run on {problem.type}", f"{key}[{i}].algorithm")
        return cls(
            problem=problem,
            solvers=solvers,
            run=RunSpec.from_dict(d.get("run", {})),
            output=OutputSpec.from_dict(d.get("output", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON: {exc}", "config") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# -- trials -----------------------------------------------------------------


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed for one trial, independent of how trials are scheduled."""
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialSummary:
    trial_index: int
    seed: int
    algorithm: str
    stepsize: str
    f_opt: float
    iterations: int
    subgradient_evals: int
    wall_time_s: float
    status: str
    trajectory: Optional[tuple] = field(default=None, compare=False, repr=False)

    def row(self) -> list:
        return [
            self.trial_index,
            self.seed,
            self.algorithm,
            self.stepsize,
            _fmt(self.f_opt),
            self.iterations,
            self.subgradient_evals,
            f"{self.wall_time_s:.6f}",
            self.status,
        ]


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


@dataclass
class _Instance:
    """Everything the solvers of one trial share."""

    kind: str
    problem: object
    x0: np.ndarray
    mcdpe: object = None
    feasibility_form: object = None


def build_instance(spec: ProblemSpec, seed: int, needs_feasibility_form: bool = False, x0=None) -> _Instance:
    if spec.type == "example3":
        problem, start = make_example3(), np.array([5.0])
    elif spec.type == "example4":
        problem, start = make_example4(), np.array([0.0])
    elif spec.type == "feasibility":
        problem = random_feasibility_problem(n=spec.n, m=spec.m, seed=seed)
        start = np.zeros(spec.n)
    else:
        inst = generate_mcdpe(spec.m, spec.n, spec.s, seed)
        L = estimate_hoelder_constants(inst, seed, samples=spec.hoelder_samples)
        problem = sor_direct_problem(inst, L)
        start = default_start(inst, problem.projector)
        feas = None
        if needs_feasibility_form:
            targets = default_targets(inst, spec.target_budget, projector=problem.projector)
            feas = sor_to_sum_problem(inst, targets, L, projector=problem.projector)
        out = _Instance("mcdpe", problem, start, inst, feas)
        if x0 is not None:
            out.x0 = problem.projector.project(np.asarray(x0, dtype=float))
        return out
    if x0 is not None:
        start = np.asarray(x0, dtype=float)
        if start.shape != (problem.dim,):
            raise ConfigurationError(f"x0 must have {problem.dim} entries", "run.x0")
    feas = problem if all(c.feasibility for c in problem.components) else None
    return _Instance(spec.type, problem, start, None, feas)


def _solve(inst: _Instance, solver: SolverSpec, stop: StopCriteria, seed: int) -> RunResult:
    if solver.algorithm == "sgpm":
        if inst.feasibility_form is None:
            raise ConfigurationError(f"sgpm needs a feasibility form of {inst.kind}")
        return sgpm_run(inst.feasibility_form, inst.x0, solver.gamma, stop, solver.tol_opt)
    if solver.algorithm == "incsgm":
        return incsgm_run(inst.problem, inst.x0, solver.stepsize, stop, solver.tol_opt, solver.reorder, rng_seed=seed)
    if solver.algorithm == "randsgm":
        return randsgm_run(inst.problem, inst.x0, solver.stepsize, stop, solver.tol_opt, rng_seed=seed)
    selector = example3_adversarial_selector if solver.selector == "adversarial" else canonical_selector
    return classical_run(inst.problem, inst.x0, solver.stepsize, stop, selector)


def _reported_values(inst: _Instance, result: RunResult) -> np.ndarray:
    """Per-iterate objective in report units: efficiency for MCDPE, f otherwise."""
    if inst.kind == "mcdpe":
        return np.array([total_ratio(inst.mcdpe, r.x) for r in result.trajectory])
    return result.f_values()


def maximizes(problem_type: str) -> bool:
    return problem_type == "mcdpe"


def run_trial(config: ExperimentConfig, trial: int) -> List[TrialSummary]:
    """Generate the instance for ``trial`` and run every configured solver on it."""
    seed = trial_seed(config.problem.master_seed, trial)
    needs_feas = any(s.algorithm == "sgpm" for s in config.solvers)
    inst = build_instance(config.problem, seed, needs_feas, config.run.x0)
    stop = StopCriteria(max_iterations=config.run.max_iterations, target_gap=config.run.target_gap)
    out = []
    for solver in config.solvers:
        try:
            result = _solve(inst, solver, stop, seed)
        except QsumError as exc:
            out.append(
                TrialSummary(trial, seed, solver.label, solver.stepsize_label(), math.nan, 0, 0, 0.0, f"error:{type(exc).__name__}")
            )
            continue
        values = _reported_values(inst, result)
        f_opt = float(values.max()) if maximizes(inst.kind) else float(result.best_value)
        traj = tuple(
            (r.k, float(values[j]), r.stepsize_used, r.dist_to_known_solution, r.subgradient_evals)
            for j, r in enumerate(result.trajectory)
        )
        out.append(
            TrialSummary(
                trial_index=trial,
                seed=seed,
                algorithm=solver.label,
                stepsize=solver.stepsize_label(),
                f_opt=f_opt,
                iterations=result.iterations,
                subgradient_evals=result.subgradient_evals,
                wall_time_s=result.wall_time,
                status=result.status.value,
                trajectory=traj,
            )
        )
    return out


def thread_cap(default: Optional[int] = None) -> int:
    """Worker count from ``QSUM_THREADS`` (falls back to the CPU count)."""
    raw = os.environ.get("QSUM_THREADS")
    if raw is None or raw.strip() == "":
        return default or os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"must be a positive integer, got {raw!r}", "QSUM_THREADS") from None
    if n < 1:
        raise ConfigurationError(f"must be a positive integer, got {raw!r}", "QSUM_THREADS")
    return n


def run_trials(config: ExperimentConfig) -> List[TrialSummary]:
    """All trial rows, sorted by ``(trial, algorithm)`` whatever the schedule."""
    trials = range(config.run.trials)
    workers = min(thread_cap(), config.run.trials) if config.run.parallel_trials else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda t: run_trial(config, t), trials))
    else:
        chunks = [run_trial(config, t) for t in trials]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: (r.trial_index, r.algorithm))


# -- aggregation ------------------------------------------------------------


def _stats(values: Sequence[float]) -> dict:
    a = np.asarray(values, dtype=float)
    std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return {"mean": float(np.mean(a)), "std": std, "min": float(np.min(a)), "max": float(np.max(a))}


def summarize_trials(trials: Sequence[TrialSummary]) -> dict:
    """Mean, sample std (``n - 1``), min and max of ``f_opt`` and wall time.

    Failed runs (NaN ``f_opt``) are left out of the ``f_opt`` statistics and
    counted under ``failed``.
    """
    if not trials:
        raise InvalidArgumentError("summarize_trials needs at least one trial")
    ok = [t for t in trials if not math.isnan(t.f_opt)]
    out = {
        "count": len(trials),
        "failed": len(trials) - len(ok),
        "wall_time_s": _stats([t.wall_time_s for t in trials]),
    }
    out["f_opt"] = _stats([t.f_opt for t in ok]) if ok else None
    return out


@dataclass
class Comparison:
    """Paired per-trial results; ``wins[a][b]`` counts trials where ``a`` beat ``b``."""

    algorithms: List[str]
    maximize: bool
    per_trial: Dict[int, Dict[str, float]]
    wins: Dict[str, Dict[str, int]]
    ties: Dict[str, Dict[str, int]]
    mean_f_opt: Dict[str, float]
    mean_wall_time: Dict[str, float]
    mean_time_per_iteration: Dict[str, float]

    def to_dict(self) -> dict:
        return {
            "algorithms": self.algorithms,
            "sense": "max" if self.maximize else "min",
            "wins": self.wins,
            "ties": self.ties,
            "mean_f_opt": self.mean_f_opt,
            "mean_wall_time_s": self.mean_wall_time,
            "mean_time_per_iteration_s": self.mean_time_per_iteration,
        }

    def table(self) -> str:
        width = max(len(a) for a in self.algorithms)
        lines = [f"{'algorithm':<{width}}  {'mean f_opt':>14}  {'mean time (s)':>13}  {'s / iter':>10}  wins"]
        for a in self.algorithms:
            wins = sum(self.wins[a].values())
            lines.append(
                f"{a:<{width}}  {self.mean_f_opt[a]:>14.6g}  {self.mean_wall_time[a]:>13.4g}  "
                f"{self.mean_time_per_iteration[a]:>10.3g}  {wins}"
            )
        return "\n".join(lines)


def compare_rows(rows: Sequence[TrialSummary], maximize: bool) -> Comparison:
    algorithms = sorted({r.algorithm for r in rows})
    if len(algorithms) < 2:
        raise ConfigurationError("comparison needs at least two algorithms", "solvers")
    per_trial: Dict[int, Dict[str, float]] = {}
    for r in rows:
        per_trial.setdefault(r.trial_index, {})[r.algorithm] = r.f_opt
    wins = {a: {b: 0 for b in algorithms if b != a} for a in algorithms}
    ties = {a: {b: 0 for b in algorithms if b != a} for a in algorithms}
    for results in per_trial.values():
        for a in algorithms:
            for b in algorithms:
                if a == b:
                    continue
                fa, fb = results.get(a, math.nan), results.get(b, math.nan)
                if math.isnan(fa):
                    continue
                if fa == fb:
                    ties[a][b] += 1
                elif math.isnan(fb) or (fa > fb if maximize else fa < fb):
                    wins[a][b] += 1

    def mean_of(a, key):
        vals = [key(r) for r in rows if r.algorithm == a and not math.isnan(r.f_opt)]
        return float(np.mean(vals)) if vals else math.nan

    return Comparison(
        algorithms=algorithms,
        maximize=maximize,
        per_trial=per_trial,
        wins=wins,
        ties=ties,
        mean_f_opt={a: mean_of(a, lambda r: r.f_opt) for a in algorithms},
        mean_wall_time={a: mean_of(a, lambda r: r.wall_time_s) for a in algorithms},
        mean_time_per_iteration={a: mean_of(a, lambda r: r.wall_time_s / max(r.iterations, 1)) for a in algorithms},
    )


# -- output -----------------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trials_csv(rows: Sequence[TrialSummary]) -> str:
    return _csv_text(TRIALS_HEADER, [r.row() for r in rows])


def trajectory_csv(summary: TrialSummary) -> str:
    rows = [[k, _fmt(f), _fmt(v), _fmt(d), e] for k, f, v, d, e in summary.trajectory or ()]
    return _csv_text(TRAJECTORY_HEADER, rows)


def _config_dict(config: ExperimentConfig) -> dict:
    solvers = []
    for s in config.solvers:
        d = asdict(s)
        d["stepsize"] = s.stepsize_label()
        solvers.append(d)
    return {
        "problem": asdict(config.problem),
        "solvers": solvers,
        "run": asdict(config.run),
        "output": asdict(config.output),
    }


def _mode(problem_type: str, solver: SolverSpec) -> str:
    if problem_type != "mcdpe":
        return "native"
    return "feasibility" if solver.algorithm == "sgpm" else "direct"


@dataclass
class ExperimentReport:
    rows: List[TrialSummary]
    summary: dict
    directory: Path


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all trials and write ``trials.csv``, ``summary.json`` and trajectories."""
    rows = run_trials(config)
    out = Path(config.output.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory: {exc}", "output.directory") from None
    (out / "trials.csv").write_text(trials_csv(rows), encoding="utf-8", newline="\n")
    if config.output.emit_trajectories:
        traj_dir = out / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for r in rows:
            if r.trajectory is not None:
                name = f"trial{r.trial_index:04d}_{r.algorithm}.csv"
                (traj_dir / name).write_text(trajectory_csv(r), encoding="utf-8", newline="\n")
    summary = {
        "config": _config_dict(config),
        "f_opt_sense": "max" if maximizes(config.problem.type) else "min",
        "algorithms": {},
    }
    for s in config.solvers:
        mine = [r for r in rows if r.algorithm == s.label]
        block = summarize_trials(mine)
        block["mode"] = _mode(config.problem.type, s)
        block["statuses"] = {st: sum(r.status == st for r in mine) for st in sorted({r.status for r in mine})}
        summary["algorithms"][s.label] = block
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return ExperimentReport(rows, summary, out)


def compare_algorithms(config: ExperimentConfig, write: bool = True) -> Comparison:
    """Paired comparison of all configured solvers on identical instances."""
    if len(config.solvers) < 2:
        raise ConfigurationError("comparison needs at least two algorithms", "solvers")
    if write:
        rows = run_experiment(config).rows
    else:
        rows = run_trials(config)
    comparison = compare_rows(rows, maximizes(config.problem.type))
    if write:
        path = Path(config.output.directory) / "comparison.json"
        path.write_text(json.dumps(comparison.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return comparison


def randsgm_stability(problem, x0, rule: StepsizeRule, stop: StopCriteria, seeds: Sequence[int], report=None) -> dict:
    """Best values of RandSGM over repeated seeds on one fixed instance.

    ``report`` maps a :class:`RunResult` to the reported value; the default is
    ``best_value``.
    """
    if not seeds:
        raise InvalidArgumentError("need at least one seed")
    values = []
    for seed in seeds:
        result = randsgm_run(problem, x0, rule, stop, rng_seed=int(seed), record_points=report is not None)
        values.append(result.best_value if report is None else report(result))
    out = _stats(values)
    out["values"] = [float(v) for v in values]
    out["seeds"] = [int(s) for s in seeds]
    return out


__all__ = [
    "ExperimentConfig",
    "ProblemSpec",
    "SolverSpec",
    "RunSpec",
    "OutputSpec",
    "TrialSummary",
    "Comparison",
    "ExperimentReport",
    "trial_seed",
    "build_instance",
    "run_trial",
    "run_trials",
    "run_experiment",
    "summarize_trials",
    "compare_rows",
    "compare_algorithms",
    "randsgm_stability",
    "trials_csv",
    "trajectory_csv",
    "thread_cap",
    "TRIALS_HEADER",
    "TRAJECTORY_HEADER",
]
