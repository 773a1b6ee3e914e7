"""Command-line interface: generate, screen, solve, eval.

Every command that writes files also writes a manifest recording the
full argument vector, so an output directory can be reproduced from its
manifest alone.  Exit codes: 0 success, 1 parameter error, 2 data
error, 3 numerical failure.
"""

import json
import os
import sys

import click
import numpy as np

from . import io as fio
from .admm import AdmmConfig, admm_solve
from .core import (PenaltyParams, PrecisionSet, objective,
                   validate_covariances)
from .datagen import (GroundTruth, edge_accuracy, gen_block_model,
                      gen_drift_model, sample_gaussian, stable_edges,
                      support_sets)
from .errors import DataError, NumericalError, ParameterError
from .newton import SolverConfig, solve_fmgl, solve_with_screening
from .screening import (assemble_solution, build_adjacency,
                        connected_components, extract_block)
from .subproblem import NspgConfig


@click.group()
def cli():
    """Joint estimation of multiple fused sparse precision matrices."""


def _histogram(sizes):
    hist = {}
    for s in sizes:
        hist[str(s)] = hist.get(str(s), 0) + 1
    return hist


def _partition_payload(lambda1, lambda2, partition):
    return {
        "lambda1": lambda1,
        "lambda2": lambda2,
        "block_count": len(partition.blocks),
        "blocks": [list(b) for b in partition.blocks],
        "sizes": partition.sizes(),
        "histogram": _histogram(partition.sizes()),
    }


@cli.command()
@click.option("--kind", type=click.Choice(["block", "drift"]), required=True)
@click.option("--p", type=int, required=True, help="feature count")
@click.option("--k", type=int, default=2, show_default=True,
              help="number of graphs")
@click.option("--l", "n_blocks", type=int, default=5, show_default=True,
              help="blocks (block model)")
@click.option("--edges", type=int, default=200, show_default=True,
              help="edges in the first graph (drift model)")
@click.option("--flips", type=int, default=25, show_default=True,
              help="edges added and deleted per step (drift model)")
@click.option("--n", "n_samples", type=int, default=None,
              help="samples per graph [default: 5p]")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def generate(kind, p, k, n_blocks, edges, flips, n_samples, seed, out_dir):
    """Generate a synthetic instance: ground truth plus sampled covariances."""
    if n_samples is None:
        n_samples = 5 * p
    if kind == "block":
        truth = gen_block_model(p, k, n_blocks, seed)
    else:
        truth = gen_drift_model(p, edges, flips, k, seed)
    covs = sample_gaussian(truth.theta_true, n_samples, seed + 1)
    os.makedirs(out_dir, exist_ok=True)
    outputs = fio.save_precisions(truth.theta_true, out_dir,
                                  pattern=fio.TRUTH_PATTERN)
    outputs += fio.save_covariances(covs, out_dir)
    argv = ["generate", "--kind", kind, "--p", str(p), "--k", str(k),
            "--l", str(n_blocks), "--edges", str(edges),
            "--flips", str(flips), "--n", str(n_samples),
            "--seed", str(seed), "--out", out_dir]
    fio.write_manifest(
        out_dir, "generate", argv,
        parameters={"kind": kind, "p": p, "k": k, "l": n_blocks,
                    "edges": edges, "flips": flips, "n": n_samples,
                    "seed": seed},
        outputs=outputs)
    click.echo("wrote %d files to %s" % (len(outputs) + 1, out_dir))


@cli.command()
@click.option("--cov", "cov_files", multiple=True, required=True,
              type=click.Path())
@click.option("--lambda1", type=float, default=None)
@click.option("--lambda1-grid", type=str, default=None,
              help="comma-separated lambda1 sweep")
@click.option("--lambda2", type=float, required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def screen(cov_files, lambda1, lambda1_grid, lambda2, out_path):
    """Report the block decomposition induced by the screening rule."""
    if (lambda1 is None) == (lambda1_grid is None):
        raise ParameterError("give exactly one of --lambda1, --lambda1-grid")
    s = validate_covariances(fio.load_covariances(cov_files))
    if lambda1_grid is not None:
        grid = [float(v) for v in lambda1_grid.split(",") if v.strip()]
        if not grid:
            raise ParameterError("empty --lambda1-grid")
        sweep = []
        for lam1 in grid:
            part = connected_components(
                build_adjacency(s, PenaltyParams(lam1, lambda2)))
            sweep.append(_partition_payload(lam1, lambda2, part))
        payload = {"schema_version": fio.SCHEMA_VERSION, "lambda2": lambda2,
                   "sweep": sweep}
    else:
        part = connected_components(
            build_adjacency(s, PenaltyParams(lambda1, lambda2)))
        payload = {"schema_version": fio.SCHEMA_VERSION}
        payload.update(_partition_payload(lambda1, lambda2, part))
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if out_path:
        fio.write_json(out_path, payload)


def _threads_default(threads):
    if threads is not None:
        return threads
    env = os.environ.get("FMGL_THREADS")
    return int(env) if env else 1


def _admm_screened(s, params, config):
    """ADMM on each screening block independently, then reassemble."""
    partition = connected_components(build_adjacency(s, params))
    sols = []
    reports = []
    for block in partition.blocks:
        sub = extract_block(s, block)
        if sub.p == 1:
            sols.append((1.0 / sub.matrices[:, 0, 0]).reshape(-1, 1, 1))
            continue
        sol, rep = admm_solve(sub, params, config)
        sols.append(sol)
        reports.append(rep)
    solution = assemble_solution(sols, partition)
    iters = max((r.outer_iterations for r in reports), default=0)
    return solution, partition, iters


@cli.command()
@click.option("--cov", "cov_files", multiple=True, type=click.Path())
@click.option("--data", "data_files", multiple=True, type=click.Path(),
              help="raw sample CSVs (rows = samples) instead of --cov")
@click.option("--center", is_flag=True, default=False,
              help="subtract column means from raw data")
@click.option("--lambda1", type=float, required=True)
@click.option("--lambda2", type=float, required=True)
@click.option("--solver", type=click.Choice(["fmgl", "admm"]),
              default="fmgl", show_default=True)
@click.option("--screen/--no-screen", "use_screening", default=True,
              show_default=True)
@click.option("--tol-outer", type=float, default=1e-5, show_default=True)
@click.option("--tol-inner", type=float, default=1e-6, show_default=True)
@click.option("--max-iters", type=int, default=None,
              help="outer iteration cap (solver-specific default)")
@click.option("--rho", type=float, default=1.0, show_default=True,
              help="ADMM penalty parameter")
@click.option("--target-objective", type=float, default=None,
              help="ADMM stops at or below this objective")
@click.option("--threads", type=int, default=None,
              help="parallel block solves [default: FMGL_THREADS or 1]")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def solve(cov_files, data_files, center, lambda1, lambda2, solver,
          use_screening, tol_outer, tol_inner, max_iters, rho,
          target_objective, threads, out_dir):
    """Estimate the precision matrices and write them with a report."""
    if bool(cov_files) == bool(data_files):
        raise ParameterError("give exactly one of --cov, --data")
    if cov_files:
        s = fio.load_covariances(cov_files)
    else:
        s = fio.load_raw_data(data_files, center=center)
    s = validate_covariances(s)
    params = PenaltyParams(lambda1, lambda2)
    threads = _threads_default(threads)
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    try:
        if solver == "fmgl":
            config = SolverConfig(
                outer_tol=tol_outer,
                max_newton_iters=max_iters or 100,
                inner=NspgConfig(tol=tol_inner))
            if use_screening:
                solution, report = solve_with_screening(
                    s, params, config, threads=threads)
            else:
                solution, report = solve_fmgl(s, params, config)
            payload = report.to_dict()
        else:
            config = AdmmConfig(rho=rho, max_iters=max_iters or 2000,
                                target_objective=target_objective)
            if use_screening:
                solution, partition, iters = _admm_screened(s, params, config)
                payload = {
                    "solver": "admm",
                    "outer_iterations": iters,
                    "block_count": len(partition.blocks),
                    "block_sizes": partition.sizes(),
                    "objective_trace": [objective(solution, s, params)],
                }
            else:
                solution, report = admm_solve(s, params, config)
                payload = report.to_dict()
    except NumericalError as exc:
        partial = {"schema_version": fio.SCHEMA_VERSION, "error": str(exc),
                   "objective_trace": list(getattr(exc, "trace", []))}
        fio.write_json(report_path, partial)
        raise
    payload["schema_version"] = fio.SCHEMA_VERSION
    payload["lambda1"] = lambda1
    payload["lambda2"] = lambda2
    payload["final_objective"] = objective(solution, s, params)
    outputs = fio.save_precisions(solution, out_dir)
    fio.write_json(report_path, payload)
    argv = ["solve"]
    for f in cov_files:
        argv += ["--cov", f]
    for f in data_files:
        argv += ["--data", f]
    if center:
        argv.append("--center")
    argv += ["--lambda1", repr(lambda1), "--lambda2", repr(lambda2),
             "--solver", solver,
             "--screen" if use_screening else "--no-screen",
             "--tol-outer", repr(tol_outer), "--tol-inner", repr(tol_inner),
             "--rho", repr(rho), "--threads", str(threads),
             "--out", out_dir]
    if max_iters is not None:
        argv += ["--max-iters", str(max_iters)]
    if target_objective is not None:
        argv += ["--target-objective", repr(target_objective)]
    fio.write_manifest(
        out_dir, "solve", argv,
        parameters={"lambda1": lambda1, "lambda2": lambda2,
                    "solver": solver, "screen": use_screening,
                    "tol_outer": tol_outer, "tol_inner": tol_inner,
                    "rho": rho, "target_objective": target_objective,
                    "threads": threads},
        inputs=list(cov_files) + list(data_files),
        outputs=outputs + [report_path])
    click.echo("solution written to %s (objective %.10g)"
               % (out_dir, payload["final_objective"]))


def _load_solution_dir(directory):
    return fio.load_precisions(
        fio.matrix_paths(directory, fio.PRECISION_PATTERN))


def _load_truth_dir(directory):
    stack = fio.load_precisions(
        fio.matrix_paths(directory, fio.TRUTH_PATTERN))
    return GroundTruth(PrecisionSet(stack),
                       tuple(support_sets(stack)))


@cli.command("eval")
@click.option("--mode", type=click.Choice(["accuracy", "stable", "diff"]),
              required=True)
@click.option("--estimate", "estimate_dir", type=click.Path(), default=None)
@click.option("--truth", "truth_dir", type=click.Path(), default=None)
@click.option("--a", "dir_a", type=click.Path(), default=None)
@click.option("--b", "dir_b", type=click.Path(), default=None)
@click.option("--estimates", "estimate_dirs", multiple=True,
              type=click.Path(), help="replication directories (stable mode)")
@click.option("--threshold", type=float, default=0.85, show_default=True)
@click.option("--zero-tol", type=float, default=1e-8, show_default=True)
@click.option("--cov", "cov_files", multiple=True, type=click.Path(),
              help="covariances for the objective gap (diff mode)")
@click.option("--lambda1", type=float, default=None)
@click.option("--lambda2", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_cmd(mode, estimate_dir, truth_dir, dir_a, dir_b, estimate_dirs,
             threshold, zero_tol, cov_files, lambda1, lambda2, out_path):
    """Evaluate solutions: edge accuracy, stable edges, or a pairwise diff."""
    if mode == "accuracy":
        if not estimate_dir or not truth_dir:
            raise ParameterError("accuracy mode needs --estimate and --truth")
        est = _load_solution_dir(estimate_dir)
        truth = _load_truth_dir(truth_dir)
        payload = {"mode": "accuracy",
                   "accuracy": edge_accuracy(est, truth, zero_tol)}
    elif mode == "diff":
        if not dir_a or not dir_b:
            raise ParameterError("diff mode needs --a and --b")
        a = _load_solution_dir(dir_a)
        b = _load_solution_dir(dir_b)
        if a.shape != b.shape:
            raise DataError("solutions have different shapes")
        payload = {"mode": "diff",
                   "max_entrywise_gap": float(np.abs(a - b).max())}
        if cov_files and lambda1 is not None and lambda2 is not None:
            s = validate_covariances(fio.load_covariances(cov_files))
            params = PenaltyParams(lambda1, lambda2)
            fa = objective(a, s, params)
            fb = objective(b, s, params)
            payload["objective_a"] = fa
            payload["objective_b"] = fb
            payload["objective_gap"] = abs(fa - fb)
    else:
        if not estimate_dirs:
            raise ParameterError("stable mode needs --estimates")
        stacks = [_load_solution_dir(d) for d in estimate_dirs]
        stable = stable_edges(stacks, threshold, zero_tol)
        payload = {"mode": "stable",
                   "replications": len(stacks),
                   "threshold": threshold,
                   "stable_counts": [len(s) for s in stable],
                   "stable_edges": [sorted([list(e) for e in s])
                                    for s in stable]}
    payload["schema_version"] = fio.SCHEMA_VERSION
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if out_path:
        fio.write_json(out_path, payload)


def main(argv=None):
    """Entry point with exit-code discipline.

    0 success, 1 parameter error, 2 data error, 3 numerical failure.
    """
    try:
        cli.main(args=argv, standalone_mode=False)
    except (ParameterError, click.UsageError, click.Abort) as exc:
        click.echo("parameter error: %s" % exc, err=True)
        return 1
    except click.ClickException as exc:
        click.echo("parameter error: %s" % exc, err=True)
        return 1
    except (DataError, OSError) as exc:
        click.echo("data error: %s" % exc, err=True)
        return 2
    except NumericalError as exc:
        click.echo("numerical failure: %s" % exc, err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
