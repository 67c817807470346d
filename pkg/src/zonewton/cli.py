"""Command-line front end.

Subcommands: ``run`` and ``fedrun`` execute solver runs and write CSV
traces; the ``verify-*`` subcommands and ``compare-sampling`` run the
empirical verification experiments and signal pass/fail through the exit
code; ``costs`` prints the deterministic finite-difference evaluation
counts. Exit codes: 0 success/pass, 1 verification failure, 2 usage error.

A flat ``key = value`` config file (with ``#`` comments) can seed the run
configuration; explicit flags override file values. Unknown keys are
rejected by name. All randomness is controlled by --seed; no environment
variables are consulted, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import experiments
from .fedsim import ClientNode, FederationConfig, federated_run, partition_dataset
from .oracle import Oracle, deterministic_fd_costs
from .problems import (
    load_libsvm,
    make_cubic_box,
    make_logistic,
    make_quadratic,
    make_synthetic_dataset,
    random_spd,
)
from .sampling import RngStream
from .solver import AdaptiveDirections, FixedDirections, SolverConfig, run
from .traceio import write_trace_csv

__all__ = ["main", "parse_config_file", "ExperimentConfig"]

_CONFIG_KEYS = {
    "problem": str,
    "dataset_path": str,
    "d": int,
    "mu": float,
    "r": int,
    "r_policy": str,
    "r_max": int,
    "delta": float,
    "alpha": float,
    "lambda_min": float,
    "lambda_max": float,
    "max_iters": int,
    "budget": int,
    "seed": int,
    "n_clients": int,
    "out_path": str,
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "quadratic"
    dataset_path: Optional[str] = None
    d: int = 10
    mu: float = 1e-5
    r: Optional[int] = None
    r_policy: str = "fixed"
    r_max: Optional[int] = None
    delta: float = 0.1
    alpha: Optional[float] = None
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None
    max_iters: int = 200
    budget: Optional[int] = None
    seed: int = 0
    n_clients: int = 1
    out_path: Optional[str] = None


def parse_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment. Unknown keys
    are rejected with the offending name."""
    values = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(
                    f"{path}:{lineno}: cannot parse value {value!r} for key '{key}'"
                ) from None
    return values


def _merge_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config is not None:
        for key, value in parse_config_file(args.config).items():
            setattr(cfg, key, value)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, flag)
    _validate_positive(cfg)
    return cfg


def _validate_positive(cfg: ExperimentConfig):
    for name in ("d", "max_iters", "n_clients"):
        if getattr(cfg, name) < 1:
            raise UsageError(f"config key '{name}' must be positive")
    if cfg.mu <= 0:
        raise UsageError("config key 'mu' must be positive")
    for name in ("r", "r_max", "budget"):
        value = getattr(cfg, name)
        if value is not None and value < 1:
            raise UsageError(f"config key '{name}' must be positive")
    for name in ("alpha", "lambda_min", "lambda_max"):
        value = getattr(cfg, name)
        if value is not None and value <= 0:
            raise UsageError(f"config key '{name}' must be positive")
    if cfg.problem not in ("quadratic", "cubic", "logistic"):
        raise UsageError(f"unknown problem '{cfg.problem}'")
    if cfg.r_policy not in ("fixed", "adaptive"):
        raise UsageError(f"unknown r_policy '{cfg.r_policy}'")


def _build_problem(cfg: ExperimentConfig):
    """Deterministic problem construction; the problem draws come from
    seed + 1 so they never collide with the solver's stream at seed."""
    stream = RngStream(cfg.seed + 1)
    if cfg.problem == "quadratic":
        a = random_spd(cfg.d, cond=100.0, rng=stream)
        stream.next_draw()
        b = stream.generator.standard_normal(cfg.d)
        problem = make_quadratic(a, b)
        stream.next_draw()
        v = stream.generator.standard_normal(cfg.d)
        x0 = problem.known.x_star + v / np.linalg.norm(v)
    elif cfg.problem == "cubic":
        problem = make_cubic_box(cfg.d, box_radius=0.4)
        x0 = 0.3 * np.ones(cfg.d)
    else:
        if cfg.dataset_path is not None:
            data = load_libsvm(cfg.dataset_path)
        else:
            data = make_synthetic_dataset(200, cfg.d, stream)
        problem = make_logistic(data, ridge=0.1)
        x0 = np.zeros(problem.dimension)
    return problem, x0


def _solver_config(cfg: ExperimentConfig, problem) -> SolverConfig:
    known = problem.known
    d = problem.dimension
    if cfg.r_policy == "adaptive":
        policy = AdaptiveDirections(
            r_max=cfg.r_max if cfg.r_max is not None else 10 * d,
            delta=cfg.delta)
    else:
        policy = FixedDirections(cfg.r if cfg.r is not None else d)
    lambda_min = cfg.lambda_min
    lambda_max = cfg.lambda_max
    if lambda_min is None:
        lambda_min = known.m if (known and known.m) else 1e-6
    if lambda_max is None:
        lambda_max = known.L1 if (known and known.L1) else 1e6
    return SolverConfig(
        mu=cfg.mu, r_policy=policy, alpha=cfg.alpha,
        lambda_min=lambda_min, lambda_max=lambda_max,
        max_iterations=cfg.max_iters,
        L1=known.L1 if known else None,
        L2=known.L2 if known else None,
        m=known.m if known else None)


def _cmd_run(args) -> int:
    cfg = _merge_config(args)
    problem, x0 = _build_problem(cfg)
    config = _solver_config(cfg, problem)
    known = problem.known
    oracle = problem.make_oracle(budget=cfg.budget)
    trace = run(x0, oracle, config, RngStream(cfg.seed),
                x_star=known.x_star if known else None,
                f_star=known.f_star if known else None,
                hessian_fn=known.hessian if known else None)
    out_path = cfg.out_path or "run_trace.csv"
    write_trace_csv(trace, out_path)
    _print_run_summary(trace, out_path)
    return 0


def _cmd_fedrun(args) -> int:
    cfg = _merge_config(args)
    if cfg.problem == "cubic":
        raise UsageError("fedrun supports quadratic and logistic problems")
    problem, x0 = _build_problem(cfg)
    known = problem.known
    clients = _build_clients(cfg, problem)
    config = _solver_config(cfg, problem)
    trace = federated_run(x0, clients, config, RngStream(cfg.seed),
                          x_star=known.x_star if known else None,
                          f_star=known.f_star if known else None,
                          hessian_fn=known.hessian if known else None)
    out_path = cfg.out_path or "fedrun_trace.csv"
    write_trace_csv(trace, out_path)
    _print_run_summary(trace, out_path)
    return 0


def _build_clients(cfg: ExperimentConfig, problem):
    """Clients whose mean objective equals the centralized problem."""
    stream = RngStream(cfg.seed + 2)
    n = cfg.n_clients
    d = problem.dimension
    if cfg.problem == "quadratic":
        # Perturb A and b with zero-sum symmetric noise so the client mean
        # reproduces the centralized quadratic exactly.
        a = problem.known.hessian(np.zeros(d))
        b = a @ problem.known.x_star
        stream.next_draw()
        gen = stream.generator
        noise = [gen.standard_normal((d, d)) for _ in range(n)]
        noise = [0.05 * (e + e.T) for e in noise]
        mean_noise = sum(noise) / n
        shifts = [gen.standard_normal(d) for _ in range(n)]
        mean_shift = sum(shifts) / n
        clients = []
        for i in range(n):
            a_i = a + noise[i] - mean_noise
            b_i = b + shifts[i] - mean_shift

            def fn(x, a_i=a_i, b_i=b_i):
                return 0.5 * float(x @ a_i @ x) - float(b_i @ x)

            clients.append(ClientNode(i, Oracle(fn, d)))
        return clients
    if cfg.dataset_path is not None:
        data = load_libsvm(cfg.dataset_path)
    else:
        data = make_synthetic_dataset(200, cfg.d, RngStream(cfg.seed + 1))
    fed_config = FederationConfig(n_clients=n, partition="iid-shuffle")
    return partition_dataset(data, fed_config, stream, ridge=0.1)


def _print_run_summary(trace, out_path):
    if not trace.records:
        print(f"status={trace.status} evals=0 trace={out_path}")
        return
    last = trace.records[-1]
    if last.f_gap is not None:
        headline = f"final f_gap={last.f_gap:.6e}"
    else:
        headline = f"final f_value={last.f_value:.6e}"
    print(f"{headline} status={trace.status} iters={len(trace.records)} "
          f"evals={last.evals} trace={out_path}")


def _report_exit(report) -> int:
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _cmd_verify_rate(args) -> int:
    code = 0
    for d in args.dims:
        report = experiments.rate_verification(
            d=d, trials=args.trials, seed=args.seed, mu=args.mu)
        code = max(code, _report_exit(report))
    return code


def _cmd_verify_lemma1(args) -> int:
    report = experiments.gradient_bound_verification(
        seed=args.seed, d=args.d, n_points=args.points)
    return _report_exit(report)


def _cmd_verify_linear(args) -> int:
    report = experiments.linear_rate_verification(
        seed=args.seed, d=args.d, cond=args.cond, mu=args.mu)
    return _report_exit(report)


def _cmd_verify_quadratic(args) -> int:
    report = experiments.quadratic_rate_verification(seed=args.seed)
    return _report_exit(report)


def _cmd_compare_sampling(args) -> int:
    report = experiments.sampling_comparison(
        d=args.d, r=args.r, trials=args.trials, seed=args.seed, mu=args.mu)
    return _report_exit(report)


def _cmd_costs(args) -> int:
    forward, symmetric = deterministic_fd_costs(args.d)
    print(f"forward={forward} symmetric={symmetric}")
    return 0


def _add_run_flags(parser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--problem", choices=["quadratic", "cubic", "logistic"])
    parser.add_argument("--dataset-path", dest="dataset_path")
    parser.add_argument("--d", type=int)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--r", type=int)
    parser.add_argument("--r-policy", dest="r_policy",
                        choices=["fixed", "adaptive"])
    parser.add_argument("--r-max", dest="r_max", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--lambda-min", dest="lambda_min", type=float)
    parser.add_argument("--lambda-max", dest="lambda_max", type=float)
    parser.add_argument("--max-iters", dest="max_iters", type=int)
    parser.add_argument("--budget", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n-clients", dest="n_clients", type=int)
    parser.add_argument("--out", dest="out_path")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zonewton",
        description="Derivative-free Newton-type optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single-process solver run, CSV trace out")
    _add_run_flags(p)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("fedrun", help="federated solver run over simulated clients")
    _add_run_flags(p)
    p.set_defaults(handler=_cmd_fedrun)

    p = sub.add_parser("verify-rate",
                       help="per-update contraction rate of the Hessian estimator")
    p.add_argument("--d", dest="dims", type=int, action="append",
                   help="dimension; repeat for several (default: 5)")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--mu", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_verify_rate)

    p = sub.add_parser("verify-lemma1",
                       help="deterministic gradient-error bound on the cubic box")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_verify_lemma1)

    p = sub.add_parser("verify-linear",
                       help="global linear f-gap contraction on a quadratic")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--cond", type=float, default=100.0)
    p.add_argument("--mu", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_verify_linear)

    p = sub.add_parser("verify-quadratic",
                       help="local quadratic rate on regularized logistic regression")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_verify_quadratic)

    p = sub.add_parser("compare-sampling",
                       help="Stiefel frames vs normalized Gaussian directions")
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--mu", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_compare_sampling)

    p = sub.add_parser("costs",
                       help="deterministic finite-difference Hessian costs")
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(handler=_cmd_costs)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "dims", "absent") is None:
        args.dims = [5]
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
