"""Command-line front end.

Subcommands: decompose, fit, infer, structtest, robust-tau, simulate.
All outputs are JSON with sorted keys; every report echoes its resolved
configuration so runs are reproducible from the artifact alone.  Exit codes:
0 success, 1 numerical/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .estimators import fit_gmdr, fit_kpr, loocv_rmse
from .exceptions import GmdkitError
from .inference import run_gmdi
from .io import load_with_sidecar
from .kernels import krv, mirkat
from .linalg import TwoWayDataset, center_hq, gmd
from .robust import estimate_tau, run_robust_gmdi
from .simulate import KNOWN_METHODS, SettingSpec, run_experiment


def _resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("GMDKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise GmdkitError(f"GMDKIT_THREADS is not an integer: {env!r}")
    return os.cpu_count() or 1


def _apply_threads(k: int) -> None:
    # BLAS pools are sized at import; threadpoolctl can still cap them.
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=k)
    except ImportError:
        pass


def _emit(payload: dict, args: argparse.Namespace) -> None:
    indent = 2 if args.pretty else None
    text = json.dumps(payload, sort_keys=True, indent=indent)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _config_echo(args: argparse.Namespace, threads: int) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["threads"] = threads
    return cfg


def _load_dataset(args: argparse.Namespace, need_y: bool) -> TwoWayDataset:
    X = load_with_sidecar(args.x)
    H = load_with_sidecar(args.h)
    Q = load_with_sidecar(args.q)
    y = None
    if getattr(args, "y", None):
        y = load_with_sidecar(args.y).ravel()
    elif need_y:
        raise GmdkitError("this command requires --y")
    return TwoWayDataset(X=X, H=H, Q=Q, y=y)


def _parse_eta(text: str):
    if text == "cv":
        return "cv"
    try:
        return float(text)
    except ValueError:
        raise GmdkitError(f"--eta must be 'cv' or a number, got {text!r}")


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_decompose(args, threads):
    data = _load_dataset(args, need_y=False)
    factors = gmd(data, rank_request=args.rank)
    return {
        "sigma": factors.s.tolist(),
        "rank": int(factors.K),
        "shape": [int(data.n), int(data.p)],
        "config": _config_echo(args, threads),
    }


def _cmd_fit(args, threads):
    data = _load_dataset(args, need_y=True)
    work = center_hq(data)
    if args.estimator == "gmdr":
        est = fit_gmdr(work, min_var_frac=args.min_var_frac,
                       selector=args.selector)
    else:
        est = fit_kpr(work, eta=_parse_eta(args.eta), folds=args.folds,
                      seed=args.seed)
    rmse = None
    if args.loocv:
        rmse = loocv_rmse(data, method=args.estimator,
                          selector=args.selector,
                          eta=_parse_eta(args.eta),
                          min_var_frac=args.min_var_frac)
    else:
        resid = work.y - est.fitted
        denom = float(work.y @ work.y)
        if denom > 0:
            rmse = float(resid @ resid) / denom
    return {
        "beta": est.beta.tolist(),
        "weights": est.weight.weights.tolist(),
        "weight_kind": est.weight.kind,
        "eta": est.weight.eta,
        "selected": None if est.weight.selected is None
        else np.asarray(est.weight.selected).tolist(),
        "vi_scores": est.vi_scores.tolist(),
        "gcv_path": None if est.gcv is None else {
            "order": est.gcv.order.tolist(),
            "gcv": est.gcv.gcv.tolist(),
            "k_opt": int(est.gcv.k_opt),
        },
        "rmse": rmse,
        "config": _config_echo(args, threads),
    }


def _cmd_infer(args, threads):
    data = _load_dataset(args, need_y=True)
    kwargs = dict(
        estimator=args.estimator, h=args.h_shrink, r=args.r,
        lam=args.lam, eta=_parse_eta(args.eta), seed=args.seed,
        min_var_frac=args.min_var_frac,
        with_qvalues=args.fdr is not None,
    )
    if args.robust:
        report = run_robust_gmdi(data, **kwargs)
    else:
        report = run_gmdi(data, **kwargs)
    payload = report.to_dict()
    payload["alpha"] = args.alpha
    payload["significant"] = (
        np.asarray(report.p_value) <= args.alpha
    ).astype(int).tolist()
    if args.fdr is not None:
        payload["fdr_level"] = args.fdr
        payload["discoveries"] = (
            np.asarray(report.q_value) <= args.fdr
        ).astype(int).tolist()
    payload["config"] = _config_echo(args, threads)
    return payload


def _cmd_structtest(args, threads):
    struct = load_with_sidecar(args.structure)
    if args.test == "krv":
        if args.kernel:
            Kx = load_with_sidecar(args.kernel)
        elif args.x:
            X = load_with_sidecar(args.x)
            Kx = X @ X.T if struct.shape[0] == X.shape[0] else X.T @ X
        else:
            raise GmdkitError("krv needs --kernel or --x")
        res = krv(Kx, struct, B=args.b, seed=args.seed)
    else:
        if not args.y:
            raise GmdkitError("mirkat needs --y")
        y = load_with_sidecar(args.y).ravel()
        res = mirkat(y, struct, B=args.b, seed=args.seed)
    payload = res.to_dict()
    payload["test"] = args.test
    payload["config"] = _config_echo(args, threads)
    return payload


def _cmd_robust_tau(args, threads):
    data = _load_dataset(args, need_y=True)
    weights = estimate_tau(data)
    payload = weights.to_dict()
    payload["config"] = _config_echo(args, threads)
    return payload


def _cmd_simulate(args, threads):
    spec = SettingSpec(
        setting=args.setting, n=args.n, p=args.p, r_squared=args.r2,
        delta=args.delta, theta=args.theta, q_variant=args.q_variant,
        h_variant=args.h_variant, replicates=args.reps, seed=args.seed,
    )
    methods = args.methods.split(",") if args.methods else ["gmdi-d"]
    report = run_experiment(spec, methods, alpha=args.alpha,
                            b_permutations=args.b)
    payload = report.to_dict()
    payload["schema_version"] = 1
    payload["config"] = _config_echo(args, threads)
    if args.csv:
        _write_replicate_csv(args.csv, report)
    return payload


def _write_replicate_csv(path: str, report) -> None:
    with open(path, "w") as fh:
        fh.write("method,metric,replicate,value\n")
        for method, per in sorted(report.metrics.items()):
            for metric, vals in sorted(per.items()):
                for i, v in enumerate(vals):
                    fh.write(f"{method},{metric},{i},{v:.17g}\n")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sp, with_out=True):
    sp.add_argument("--pretty", action="store_true",
                    help="indent the JSON output")
    sp.add_argument("--threads", type=int, default=None,
                    help="cap worker threads (default: GMDKIT_THREADS or all cores)")
    if with_out:
        sp.add_argument("--out", default=None, help="write JSON here instead of stdout")


def _add_matrix_args(sp, need_y):
    sp.add_argument("--x", required=True, help="predictor matrix CSV")
    sp.add_argument("--h", required=True, help="row structure CSV")
    sp.add_argument("--q", required=True, help="column structure CSV")
    sp.add_argument("--y", required=need_y, help="response vector CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmdkit",
        description="Structured two-way regression, inference, and kernel screens.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("decompose", help="two-way matrix decomposition")
    _add_matrix_args(sp, need_y=False)
    sp.add_argument("--rank", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(func=_cmd_decompose)

    sp = sub.add_parser("fit", help="fit a structured regression")
    sp.add_argument("estimator", choices=["gmdr", "kpr"])
    _add_matrix_args(sp, need_y=True)
    sp.add_argument("--selector", choices=["vi", "top"], default="vi")
    sp.add_argument("--min-var-frac", type=float, default=0.001)
    sp.add_argument("--eta", default="cv", help="'cv' or a ridge level")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--loocv", action="store_true",
                    help="report leave-one-out relative error (slow)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("infer", help="bias-corrected coefficient tests")
    _add_matrix_args(sp, need_y=True)
    sp.add_argument("--estimator", choices=["gmdr", "kpr"], default="gmdr")
    sp.add_argument("--robust", action="store_true",
                    help="blend H toward identity with an estimated weight")
    sp.add_argument("--h-shrink", type=float, default=1.0,
                    help="bias-correction shrinkage in [0, 1]")
    sp.add_argument("--r", type=float, default=0.05)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--eta", default="cv")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--fdr", type=float, default=None,
                    help="emit q-values and discoveries at this level")
    sp.add_argument("--min-var-frac", type=float, default=0.001)
    sp.add_argument("--seed", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=_cmd_infer)

    sp = sub.add_parser("structtest", help="kernel informativeness screens")
    sp.add_argument("test", choices=["krv", "mirkat"])
    sp.add_argument("--structure", required=True, help="structure kernel CSV")
    sp.add_argument("--kernel", default=None, help="precomputed data kernel CSV")
    sp.add_argument("--x", default=None, help="data matrix CSV (linear kernel)")
    sp.add_argument("--y", default=None, help="response CSV (mirkat)")
    sp.add_argument("--b", type=int, default=999)
    sp.add_argument("--seed", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=_cmd_structtest)

    sp = sub.add_parser("robust-tau", help="estimate the H-vs-identity blend weight")
    _add_matrix_args(sp, need_y=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_robust_tau)

    sp = sub.add_parser("simulate", help="run a named synthetic benchmark")
    sp.add_argument("--setting", required=True,
                    choices=["I", "II", "III", "IV", "perturbed"])
    sp.add_argument("--r2", type=float, default=None)
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--p", type=int, default=300)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--b", type=int, default=999)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--q-variant", choices=["q1", "q2"], default=None)
    sp.add_argument("--h-variant",
                    choices=["h1", "h2", "h3", "h4", "h5", "h6"], default=None)
    sp.add_argument("--methods", default=None,
                    help=f"comma list from {', '.join(KNOWN_METHODS)}")
    sp.add_argument("--csv", default=None, help="per-replicate rows CSV")
    _add_common(sp)
    sp.set_defaults(func=_cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = _resolve_threads(args.threads)
        _apply_threads(threads)
        payload = args.func(args, threads)
        _emit(payload, args)
    except (GmdkitError, OSError) as exc:
        sys.stderr.write(json.dumps(
            {"error": str(exc), "command": args.command}, sort_keys=True) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
