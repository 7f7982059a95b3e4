"""Experiment harness: executes run configurations, writes convergence-trace
CSVs and summary JSON, merges runs for comparison, and checks the convergence
bounds on instances with closed-form optima."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List

import numpy as np

from . import problems as pb
from . import regularizers as rg
from . import solvers as sv
from .config import BoundsConfig, ConfigError, GenDataConfig, RunConfig
from .core import RngStream, TraceRecord
from .smoothing import smoothed

THREADS_ENV = "COMPOSITE_SGD_THREADS"

# Substream ids hung off each seed: the dataset, the solver's sample sequence,
# and the acsa pilot draws. Every solver sees the same dataset and the same
# sample stream for a given seed.
STREAM_DATA = 1
STREAM_SOLVER = 2
STREAM_PILOT = 3


def thread_cap() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ProblemSetup:
    oracle: object
    smooth_objective: Callable
    reg: rg.Regularizer
    L: float
    p: int


def build_problem(cfg: RunConfig, seed: int) -> ProblemSetup:
    data_rng = RngStream(seed).split(STREAM_DATA)

    if cfg.regularizer == "l1":
        reg = rg.l1(cfg.lam, cfg.p)
    elif cfg.regularizer == "hierarchical":
        reg = rg.group_norm(cfg.lam, rg.build_hierarchical(cfg.n))
    else:
        if not Path(cfg.structure_file).is_file():
            raise ConfigError("structure_file", f"file not found: {cfg.structure_file}")
        structure = rg.load_group_structure(cfg.structure_file, p=cfg.p)
        reg = rg.group_norm(cfg.lam, structure)

    if cfg.problem == "linear-discrete":
        dataset = pb.gen_linear_dataset(cfg.K, cfg.p, data_rng)
        L = cfg.lipschitz_override
        if L is None:
            L = pb.lipschitz_linear(dataset, cfg.lipschitz_convention)
        objective = lambda b: pb.exact_objective_linear(dataset, b)
        if cfg.batch_size is None:
            oracle = pb.ExactOracle(lambda b: pb.exact_gradient_linear(dataset, b), cfg.p)
        else:
            oracle = pb.MinibatchLinearOracle(dataset, cfg.batch_size)
    elif cfg.problem == "linear-continuous":
        beta_hat = pb.ground_truth("linear", cfg.p)
        L = cfg.lipschitz_override if cfg.lipschitz_override is not None else 1.0
        objective = lambda b: pb.continuous_objective(b, beta_hat)
        if cfg.batch_size is None:
            oracle = pb.ExactOracle(lambda b: pb.continuous_gradient(b, beta_hat), cfg.p)
        else:
            oracle = pb.ContinuousLinearOracle(beta_hat, cfg.batch_size)
    else:  # logistic
        dataset = pb.gen_logistic_dataset(cfg.K, cfg.p, data_rng)
        L = cfg.lipschitz_override if cfg.lipschitz_override is not None else 1.0
        objective = lambda b: pb.exact_objective_logistic(dataset, b)
        if cfg.batch_size is None:
            oracle = pb.ExactOracle(lambda b: pb.exact_gradient_logistic(dataset, b), cfg.p)
        else:
            oracle = pb.MinibatchLogisticOracle(dataset, cfg.batch_size)

    return ProblemSetup(oracle, objective, reg, float(L), cfg.p)


def trace_filename(solver: str, seed: int) -> str:
    return f"trace_{solver}_{seed}.csv"


def write_trace_csv(path, rows: List[TraceRecord]) -> None:
    """Header iteration,elapsed_seconds,objective[,gap]; 17 significant digits, LF."""
    with_gap = any(r.gap is not None for r in rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["iteration", "elapsed_seconds", "objective"]
        if with_gap:
            header.append("gap")
        writer.writerow(header)
        for r in rows:
            row = [str(r.iteration), f"{r.elapsed_seconds:.17g}", f"{r.objective:.17g}"]
            if with_gap:
                row.append("" if r.gap is None else f"{r.gap:.17g}")
            writer.writerow(row)


def read_trace_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def run_job(cfg: RunConfig, solver: str, seed: int, out_dir: str) -> dict:
    """Execute one (solver, seed) job and write its trace; returns the summary."""
    setup = build_problem(cfg, seed)
    solver_rng = RngStream(seed).split(STREAM_SOLVER)
    pilot_rng = RngStream(seed).split(STREAM_PILOT)

    if cfg.acsa_sigma_sq is not None:
        sigma_sq = cfg.acsa_sigma_sq
    elif cfg.batch_size is None:
        sigma_sq = 0.0  # exact oracle
    else:
        sigma_sq = sv.pilot_sigma_sq(setup.oracle, np.zeros(setup.p), pilot_rng)

    started = time.perf_counter()
    if solver == "sg":
        x, trace = sv.run_sg(setup.oracle, setup.reg, setup.L, cfg.N, solver_rng,
                             setup.smooth_objective, trace_every=cfg.trace_every)
    elif solver == "ssg":
        sreg = smoothed(setup.reg, mu=cfg.mu_override, N=cfg.N)
        x, trace = sv.run_ssg(setup.oracle, sreg, setup.L, cfg.N, solver_rng,
                              setup.smooth_objective, trace_every=cfg.trace_every)
    else:
        params = sv.resolve_acsa_params(
            setup.oracle, setup.L, cfg.N, pilot_rng.split(0),
            sigma_sq=sigma_sq, D=cfg.acsa_d,
        )
        x, trace = sv.run_acsa(setup.oracle, setup.reg, setup.L, cfg.N, params,
                               solver_rng, setup.smooth_objective,
                               trace_every=cfg.trace_every)
    wall = time.perf_counter() - started

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / trace_filename(solver, seed)
    write_trace_csv(trace_path, trace)

    sreg_info = smoothed(setup.reg, mu=cfg.mu_override, N=cfg.N)
    sigma = float(np.sqrt(sigma_sq))
    final_objective = setup.smooth_objective(x) + rg.evaluate(setup.reg, x)
    return {
        "config": cfg.echo(),
        "final_objective": float(final_objective),
        "wall_clock_seconds": wall,
        "sigma_sq_pilot": float(sigma_sq),
        "theorem_bound": sv.theorem_bound(cfg.acsa_d, sigma, setup.L, cfg.N),
        "theorem_bound_smoothed": sv.theorem_bound_smoothed(
            cfg.acsa_d, sigma, setup.L, sreg_info.A_norm, sreg_info.M, sreg_info.c, cfg.N
        ),
        "trace_file": str(trace_path),
    }


def _job_worker(args):
    cfg, solver, seed, out_dir = args
    return run_job(cfg, solver, seed, out_dir)


def execute_run(cfg: RunConfig, out_dir: str) -> list[dict]:
    """All (solver, seed) jobs of a config, fanned out over a process pool when
    more than one job is requested; summaries come back in job order."""
    jobs = [(cfg, solver, seed, out_dir) for solver in cfg.solvers for seed in cfg.seeds]
    workers = min(len(jobs), thread_cap())
    if workers <= 1 or len(jobs) == 1:
        summaries = [_job_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_job_worker, jobs))
    write_summary(Path(out_dir) / "summary.json", summaries)
    return summaries


def write_summary(path, summaries: list[dict]) -> None:
    payload = summaries[0] if len(summaries) == 1 else {"runs": summaries}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def merge_compare(job_traces: dict[str, list[TraceRecord]]) -> tuple[list[str], list[list[str]]]:
    """Inner-join traces on iteration; one objective column per job plus a gap
    column against the best final objective across jobs (empirical best)."""
    names = list(job_traces)
    iter_sets = [set(r.iteration for r in rows) for rows in job_traces.values()]
    common = sorted(set.intersection(*iter_sets))
    best_final = min(rows[-1].objective for rows in job_traces.values())
    by_iter = {
        name: {r.iteration: r.objective for r in rows}
        for name, rows in job_traces.items()
    }
    header = ["iteration"]
    header += [f"objective_{n}" for n in names]
    header += [f"gap_vs_empirical_best_{n}" for n in names]
    table = []
    for it in common:
        row = [str(it)]
        row += [f"{by_iter[n][it]:.17g}" for n in names]
        row += [f"{by_iter[n][it] - best_final:.17g}" for n in names]
        table.append(row)
    return header, table


@dataclass
class BoundsReport:
    mean_gap: float
    bound: float
    gaps: list[float]
    passed: bool
    detail: dict


def verify_bounds(cfg: BoundsConfig) -> BoundsReport:
    """Run R seeded repetitions on an instance with a known optimum and compare
    the seed-mean final gap against the matching convergence bound."""
    lam = cfg.lam if cfg.lam is not None else 0.0

    if cfg.problem == "quadratic":
        target = np.zeros(cfg.p)
        target[0] = cfg.D
        reg = rg.l1(0.0, cfg.p)
        L = 1.0
        objective = lambda x: 0.5 * float((x - target) @ (x - target))
        grad = lambda x: x - target
        x_star = target
        D = cfg.D
    else:
        data_rng = RngStream(cfg.seed).split(STREAM_DATA)
        dataset, x_star = pb.ortho_lasso_instance(cfg.p, lam, data_rng)
        reg = rg.l1(lam, cfg.p)
        L = pb.lipschitz_linear(dataset, "scaled")
        objective = lambda x: pb.exact_objective_linear(dataset, x)
        grad = lambda x: pb.exact_gradient_linear(dataset, x)
        D = float(np.linalg.norm(x_star))

    phi = lambda x: objective(x) + rg.evaluate(reg, x)
    phi_star = phi(x_star)

    gaps = []
    for r in range(cfg.R):
        rng = RngStream(cfg.seed + r).split(STREAM_SOLVER)
        oracle = pb.ExactOracle(grad, cfg.p)
        if cfg.sigma > 0:
            oracle = pb.GaussianNoiseOracle(oracle, cfg.sigma)
        if cfg.solver == "sg":
            x, _ = sv.run_sg(oracle, reg, L, cfg.N, rng, objective, trace_every=0)
        else:
            sreg = smoothed(reg, N=cfg.N)
            x, _ = sv.run_ssg(oracle, sreg, L, cfg.N, rng, objective, trace_every=0)
        gaps.append(phi(x) - phi_star)

    mean_gap = float(np.mean(gaps))
    if cfg.solver == "ssg" and lam > 0:
        sreg = smoothed(reg, N=cfg.N)
        bound = sv.theorem_bound_smoothed(D, cfg.sigma, L, sreg.A_norm, sreg.M,
                                          sreg.c, cfg.N)
    else:
        bound = sv.theorem_bound(D, cfg.sigma, L, cfg.N)

    return BoundsReport(
        mean_gap=mean_gap,
        bound=float(bound),
        gaps=[float(g) for g in gaps],
        passed=mean_gap <= bound,
        detail={"D": D, "L": L, "sigma": cfg.sigma, "N": cfg.N,
                "solver": cfg.solver, "problem": cfg.problem, "R": cfg.R},
    )


def generate_dataset(cfg: GenDataConfig, out_path) -> pb.Dataset:
    rng = RngStream(cfg.seed).split(STREAM_DATA)
    if cfg.problem == "linear-discrete":
        dataset = pb.gen_linear_dataset(cfg.K, cfg.p, rng)
    else:
        dataset = pb.gen_logistic_dataset(cfg.K, cfg.p, rng)
    pb.save_dataset_csv(dataset, out_path)
    return dataset
