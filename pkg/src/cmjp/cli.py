"""Command-line interface.

Subcommands: simulate, fit, select, asymptotics, verify.  Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import secrets
import sys

import numpy as np

from . import io
from .em import FitConfig, fit, select_model
from .exceptions import CmjpError, EstimationError, NumericalError, ValidationError
from .inference import (
    cramer_rao,
    monte_carlo_study,
    observed_fisher,
    standard_errors,
)
from .model import param_names, path_stats, to_vector
from .simulate import simulate_paths


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _seed_or_entropy(seed: int | None) -> int:
    if seed is not None:
        return seed
    seed = secrets.randbits(48)
    print(f"seed drawn from entropy: {seed}")
    return seed


def _cmd_simulate(args) -> int:
    model = io.read_model(args.model)
    seed = _seed_or_entropy(args.seed)
    sims = simulate_paths(model, args.paths, args.horizon, seed, mode=args.mode)
    io.write_paths(sims, args.out)
    print(f"wrote {len(sims)} paths to {args.out}")
    return 0


def _fit_config(args, M: int) -> FitConfig:
    return FitConfig(
        M=M,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=_seed_or_entropy(args.seed),
        restarts=args.restarts,
    )


def _se_table(stats, theta):
    names = param_names(theta.p, theta.M)
    vec = to_vector(theta)
    J = observed_fisher(stats, theta)
    ses = dict(zip(J.params, standard_errors(J)))
    table = []
    for name, value in zip(names, vec):
        if name in ses:
            table.append({"name": name, "estimate": value, "se": ses[name], "fixed_at_zero": False})
        else:
            table.append({"name": name, "estimate": value, "se": None, "fixed_at_zero": True})
    return table


def _cmd_fit(args) -> int:
    paths = io.read_paths(args.paths)
    config = _fit_config(args, args.regimes)
    result = fit(paths, config)
    theta = result.theta_hat
    stats = [path_stats(path, theta.p) for path in paths]
    doc = {
        "model": io.model_to_dict(theta),
        "loglik": result.loglik,
        "iterations": result.iterations,
        "converged": result.converged,
        "aic": result.aic,
        "standard_errors": _se_table(stats, theta),
        "posteriors": result.posteriors,
    }
    io.write_report(doc, args.out)
    print(
        f"fitted M={args.regimes} model: loglik={result.loglik:.4f} "
        f"aic={result.aic:.4f} iterations={result.iterations} converged={result.converged}"
    )
    return 0


def _cmd_select(args) -> int:
    paths = io.read_paths(args.paths)
    config = _fit_config(args, 1)
    rows = select_model(paths, list(range(1, args.max_regimes + 1)), config)
    table = [
        {"M": r["M"], "loglik": r["loglik"], "aic": r["aic"], "error": r["error"], "best": r.get("best", False)}
        for r in rows
    ]
    if not any(r["aic"] is not None for r in table):
        raise EstimationError("every candidate regime count failed to fit")
    best = next(r["M"] for r in table if r["best"])
    io.write_report({"results": table, "best_M": best}, args.out)
    for r in table:
        flag = " *" if r["best"] else ""
        if r["error"]:
            print(f"M={r['M']}: failed ({r['error']})")
        else:
            print(f"M={r['M']}: loglik={r['loglik']:.4f} aic={r['aic']:.4f}{flag}")
    return 0


def _cmd_asymptotics(args) -> int:
    model = io.read_model(args.model)
    report = cramer_rao(model, args.horizon)
    doc = {
        "params": report["params"],
        "expected_complete_fisher": report["expected_complete_fisher"],
        "asymptotic_covariance": report["covariance"],
        "cramer_rao_inverse": report["inverse_bound"],
        "phi_loewner_min_eigenvalue": report["phi_loewner_min_eigenvalue"],
        "q_block_max_abs_diff": report["q_block_max_abs_diff"],
        "superefficient_phi": report["superefficient_phi"],
    }
    io.write_report(doc, args.out)
    print(
        f"phi Loewner min eigenvalue: {report['phi_loewner_min_eigenvalue']:.3e}; "
        f"q-block max |bound - covariance|: {report['q_block_max_abs_diff']:.3e}"
    )
    return 0


def _verify_config(doc: dict):
    errors = []
    if "model" not in doc and "model_file" not in doc:
        errors.append("missing 'model' (inline document) or 'model_file'")
    for key in ("replications", "paths", "horizon"):
        if key not in doc:
            errors.append(f"missing '{key}'")
    if "paths" in doc and not isinstance(doc["paths"], list):
        errors.append("'paths' must be a list of sample sizes")
    if errors:
        raise ValidationError("invalid study config: " + "; ".join(errors))
    model = io.model_from_dict(doc["model"]) if "model" in doc else io.read_model(doc["model_file"])
    return model, doc


def _cmd_verify(args) -> int:
    import json

    with open(args.config) as fh:
        doc = json.load(fh)
    model, doc = _verify_config(doc)
    seed = _seed_or_entropy(doc.get("seed", args.seed))
    config = FitConfig(
        M=model.M,
        tol=doc.get("tol", 1e-5),
        max_iter=doc.get("max_iter", 2000),
        seed=seed,
        restarts=doc.get("restarts", 1),
    )
    studies = []
    medians = {"K": [], "median_abs_bias": [], "median_rmse": []}
    for i, K in enumerate(doc["paths"]):
        report = monte_carlo_study(
            model,
            n_replications=int(doc["replications"]),
            paths_per_replication=int(K),
            horizon=float(doc["horizon"]),
            config=config,
            seed=seed + i,
        )
        rows = [vars(rec) for rec in report.parameters]
        studies.append(
            {
                "paths_per_replication": K,
                "replications": report.n_replications,
                "failed_replications": report.failed_replications,
                "parameters": rows,
            }
        )
        medians["K"].append(K)
        medians["median_abs_bias"].append(float(np.median([abs(r["bias"]) for r in rows])))
        medians["median_rmse"].append(float(np.median([r["rmse"] for r in rows])))
        print(
            f"K={K}: median |bias|={medians['median_abs_bias'][-1]:.5f} "
            f"median RMSE={medians['median_rmse'][-1]:.5f} "
            f"failures={report.failed_replications}"
        )
    io.write_report(
        {"metadata": {"seed": seed, "replications": doc["replications"], "horizon": doc["horizon"]},
         "studies": studies,
         "bias_vs_paths": medians},
        args.out,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmjp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate sample paths")
    sim.add_argument("--model", required=True, help="model JSON file")
    sim.add_argument("--paths", type=int, required=True, help="number of paths K")
    sim.add_argument("--horizon", type=float, required=True, help="censoring time T")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--mode", choices=["conditional", "mixture"], default="conditional")
    sim.add_argument("--out", required=True, help="output paths file (one JSON record per line)")
    sim.set_defaults(func=_cmd_simulate)

    def add_fit_options(p):
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-iter", type=int, default=2000)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--restarts", type=int, default=1)

    fit_p = sub.add_parser("fit", help="EM estimation for a fixed regime count")
    fit_p.add_argument("--paths", required=True, help="paths file")
    fit_p.add_argument("--regimes", type=int, required=True, help="regime count M")
    add_fit_options(fit_p)
    fit_p.add_argument("--out", required=True)
    fit_p.set_defaults(func=_cmd_fit)

    sel = sub.add_parser("select", help="AIC model selection over regime counts")
    sel.add_argument("--paths", required=True)
    sel.add_argument("--max-regimes", type=int, required=True)
    add_fit_options(sel)
    sel.add_argument("--out", required=True)
    sel.set_defaults(func=_cmd_select)

    asym = sub.add_parser("asymptotics", help="closed-form information and covariance matrices")
    asym.add_argument("--model", required=True)
    asym.add_argument("--horizon", type=float, required=True)
    asym.add_argument("--out", required=True)
    asym.set_defaults(func=_cmd_asymptotics)

    ver = sub.add_parser("verify", help="Monte Carlo bias/RMSE/SE study from a config document")
    ver.add_argument("--config", required=True, help="study config JSON")
    ver.add_argument("--seed", type=int, default=None, help="fallback seed if absent from config")
    ver.add_argument("--out", required=True)
    ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, EstimationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CmjpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
