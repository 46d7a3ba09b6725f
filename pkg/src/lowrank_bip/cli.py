"""``lowrank-bip`` command line.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 a numerical
check missed its tolerance. The log level comes from ``LOWRANK_BIP_LOG``
(default ``WARNING``).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .bip import simulate_data, solve_posterior
from .errors import LowRankBipError, NonConvergence, ParseError, RankOutOfRange, ValidationError
from .gaussian import SpectralLossFn
from .lowrank import (
    convert_update,
    joint_approximation,
    optimal_covariance,
    optimal_mean_class1,
    optimal_mean_class2,
    optimal_precision,
    predicted_loss,
)
from .oracle import brute_force_cov_opt
from .pencil import bayes_spectrum, spectrum_residuals, square_root_factors, square_root_residuals
from .report import run_sweep

log = logging.getLogger("lowrank_bip")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_CHECK = 0, 1, 2, 3
APPROX_TARGETS = ("cov", "prec", "mean1", "mean2", "joint1", "joint2")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_ranks(text):
    """``"A..B"`` (inclusive) or a comma-separated list of ranks."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid rank range {text!r}; use A..B or a,b,c") from None


def _loss(text):
    try:
        return SpectralLossFn.parse(text)
    except (ValueError, LowRankBipError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _mc_samples(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if value != 0 and value < 100:
        raise argparse.ArgumentTypeError(f"must be 0 or >= 100, got {value}")
    return value


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _load(args):
    p = io.load_problem(args.problem)
    tol = io.load_tolerances(args.tol_file)
    return p, tol


def _check_ranks(ranks, d):
    bad = [r for r in ranks if not 0 <= r <= d]
    if bad:
        raise RankOutOfRange(f"ranks {bad} lie outside [0, {d}]")


def _spectrum_doc(s):
    return {
        "rank_h": s.rank_h,
        "lambdas": s.lambdas,
        "deltas": s.deltas,
        "w": s.w_basis,
        "v": s.v_basis,
        "phi": s.phi_basis,
    }


def _read_vector(path, key):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if isinstance(doc, dict):
        if key not in doc:
            raise ValidationError(key, f"missing from {path}")
        doc = doc[key]
    try:
        return np.array(doc, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(key, "must be a list of numbers") from None


def cmd_solve(args):
    p, _ = _load(args)
    y = _read_vector(args.data, "y") if args.data else None
    sol = solve_posterior(p, y)
    doc = {
        "schema_version": io.REPORT_SCHEMA_VERSION,
        "posterior_mean": sol.posterior.mean,
        "posterior_covariance": sol.posterior.covariance.matrix,
        "mean_operator": sol.mean_operator,
    }
    _emit(io.dumps(doc), args.out)
    return EXIT_OK


def cmd_spectrum(args):
    p, tol = _load(args)
    s = bayes_spectrum(p, cutoff=tol["rank_cutoff"])
    res = spectrum_residuals(s)
    res.update({f"sqrt_{k}": v for k, v in square_root_residuals(p, s, square_root_factors(p, s)).items()})
    doc = {"schema_version": io.REPORT_SCHEMA_VERSION, **_spectrum_doc(s), "residuals": res}
    _emit(io.dumps(doc), args.out)
    bad = sorted(k for k, v in res.items() if v > tol["residual_atol"])
    if bad:
        log.error("residuals above %g: %s", tol["residual_atol"], ", ".join(bad))
        return EXIT_CHECK
    return EXIT_OK


def _update_doc(u):
    return {"base": u.base_name, "sign": u.sign, "rank": u.rank, "factor": u.factor}


def _mean_doc(m):
    return {"class": m.klass, "rank": m.rank, "matrix": m.matrix}


def cmd_approx(args):
    p, tol = _load(args)
    s = bayes_spectrum(p, cutoff=tol["rank_cutoff"])
    r, target = args.rank, args.target
    doc = {"schema_version": io.REPORT_SCHEMA_VERSION, "target": target, "rank": r}
    if target in ("cov", "prec"):
        u = optimal_covariance(s, r) if target == "cov" else optimal_precision(s, r)
        doc["unique"] = u.unique
        doc["update"] = _update_doc(u)
        losses = args.loss or [SpectralLossFn.kl()]
        doc["predicted_loss"] = {f.label: predicted_loss(s, r, "cov", f) for f in losses}
    elif target in ("mean1", "mean2"):
        m = optimal_mean_class1(s, r) if target == "mean1" else optimal_mean_class2(s, r)
        doc["mean_operator"] = _mean_doc(m)
        doc["predicted_loss"] = predicted_loss(s, r, target)
    else:
        m, u = joint_approximation(s, r, "class1" if target == "joint1" else "class2")
        doc["unique"] = u.unique
        doc["mean_operator"] = _mean_doc(m)
        doc["update"] = _update_doc(u)
        doc["predicted_loss"] = predicted_loss(s, r, target)
    doc["spectrum"] = _spectrum_doc(s)
    _emit(io.dumps(doc), args.out)
    return EXIT_OK


def cmd_sweep(args):
    p, tol = _load(args)
    ranks = args.ranks if args.ranks is not None else list(range(p.d + 1))
    _check_ranks(ranks, p.d)
    report, failures = run_sweep(
        p, ranks, args.loss, seed=args.seed, tolerances=tol,
        input_digest=io.file_digest(args.problem), mc_samples=args.mc_samples,
        workers=args.workers, timestamp=not args.no_timestamp,
    )
    text = io.dumps_csv(report) if args.format == "csv" else io.dumps(report)
    _emit(text, args.out)
    if failures:
        log.error("%d checks failed: %s", len(failures), ", ".join(failures[:10]))
        return EXIT_CHECK
    return EXIT_OK


def cmd_simulate(args):
    p, _ = _load(args)
    if args.truth:
        x_true = _read_vector(args.truth, "x_true")
        noise_seed = args.seed
    else:
        truth_seq, noise_seed = np.random.SeedSequence(args.seed).spawn(2)
        z = np.random.default_rng(truth_seq).standard_normal(p.d)
        x_true = p.m_pr + p.C_pr.sqrt() @ z
    y = simulate_data(p, x_true, noise_seed)
    doc = {"schema_version": io.REPORT_SCHEMA_VERSION, "seed": args.seed, "x_true": x_true, "y": y}
    _emit(io.dumps(doc), args.out)
    return EXIT_OK


def cmd_verify(args):
    p, tol = _load(args)
    s = bayes_spectrum(p, cutoff=tol["rank_cutoff"])
    ranks = args.ranks if args.ranks is not None else list(range(p.d + 1))
    _check_ranks(ranks, p.d)
    losses = args.loss or [SpectralLossFn.kl()]

    res = spectrum_residuals(s)
    res.update({f"sqrt_{k}": v for k, v in square_root_residuals(p, s, square_root_factors(p, s)).items()})
    failures = [f"residual {k}" for k, v in sorted(res.items()) if v > tol["residual_atol"]]

    _, sweep_failures = run_sweep(p, ranks, losses, seed=args.seed, tolerances=tol, timestamp=False)
    failures += sweep_failures

    duality = {}
    for r in ranks:
        C = optimal_covariance(s, r)
        P = optimal_precision(s, r)
        err_inv = np.linalg.norm(np.linalg.inv(P.assemble()) - C.assemble()) / np.linalg.norm(C.assemble())
        back = convert_update(convert_update(C))
        err_rt = np.linalg.norm(back.assemble() - C.assemble()) / np.linalg.norm(C.assemble())
        duality[str(r)] = max(err_inv, err_rt)
        if duality[str(r)] > tol["loss_rtol"]:
            failures.append(f"r={r} duality")

    brute = {}
    for r in (r for r in ranks if r >= 1):
        for f in losses:
            try:
                result = brute_force_cov_opt(p, r, f, restarts=args.restarts, seed=args.seed)
            except NonConvergence as exc:
                log.warning("r=%d %s: %s", r, f.label, exc)
                continue
            pred = predicted_loss(s, r, "cov", f)
            brute[f"r={r} {f.label}"] = {"brute_force": result.loss, "predicted": pred}
            if result.loss < pred - tol["brute_force_slack"]:
                failures.append(f"r={r} brute_force[{f.label}]")

    doc = {
        "schema_version": io.REPORT_SCHEMA_VERSION,
        "passed": not failures,
        "failures": failures,
        "residuals": res,
        "duality": duality,
        "brute_force": brute,
        "metadata": {"seed": args.seed, "restarts": args.restarts, "tolerances": tol},
    }
    _emit(io.dumps(doc), args.out)
    return EXIT_OK if not failures else EXIT_CHECK


def build_parser():
    parser = _Parser(prog="lowrank-bip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--problem", required=True, help="problem file (JSON)")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--tol-file", help="TOML file with a [tolerances] table")

    sp = sub.add_parser("solve", help="exact posterior mean and covariance")
    common(sp)
    sp.add_argument("--data", help='data vector as JSON list or {"y": [...]} (default: G m_pr)')
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("spectrum", help="prior-preconditioned Hessian spectrum with residuals")
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("approx", help="optimal rank-r approximation")
    common(sp)
    sp.add_argument("--target", required=True, choices=APPROX_TARGETS)
    sp.add_argument("--rank", required=True, type=int)
    sp.add_argument("--loss", action="append", type=_loss, help="kl|rkl|renyi:RHO|rrenyi:RHO (repeatable)")
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("sweep", help="predicted vs achieved losses over a range of ranks")
    common(sp)
    sp.add_argument("--ranks", type=parse_ranks, help="A..B or a,b,c (default: 0..d)")
    sp.add_argument("--loss", action="append", type=_loss, help="kl|rkl|renyi:RHO|rrenyi:RHO (repeatable)")
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--mc-samples", type=_mc_samples, default=0, help="add Monte Carlo Bayes risk columns")
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--no-timestamp", action="store_true", help="leave metadata.timestamp null")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("simulate", help="synthetic data y = G x + noise")
    common(sp)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--truth", help='x_true as JSON list or {"x_true": [...]} (default: prior draw)')
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run every oracle check on a problem")
    common(sp)
    sp.add_argument("--ranks", type=parse_ranks, help="A..B or a,b,c (default: 0..d)")
    sp.add_argument("--loss", action="append", type=_loss)
    sp.add_argument("--seed", required=True, type=int)
    sp.add_argument("--restarts", type=_positive_int, default=10)
    sp.set_defaults(func=cmd_verify)
    return parser


def _configure_logging():
    name = os.environ.get("LOWRANK_BIP_LOG", "WARNING").upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LowRankBipError, OSError) as exc:
        print(f"lowrank-bip: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print(f"lowrank-bip: error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
