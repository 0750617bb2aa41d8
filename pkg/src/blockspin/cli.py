"""Command-line front end.

Exit status: 0 on success, 1 on usage or domain errors, 2 when a
verification report fails.
"""

from __future__ import annotations

import argparse
import datetime
import io
import os
import sys

import numpy as np

from . import __version__
from .exact import DEFAULT_MAX_N, Statistic, exact_distribution, params_dict, pushforward
from .limits import free_functional_m, hessian_Fm_minus_J, limit_mixture, mean_field_fixed_points, rate_J, rate_Jm, rate_Jv
from .mcmc import ChainConfig, Dynamics, run_chain
from .model import DomainError, ModelParams, classify_regime, near_critical
from .serialize import dumps, format_float
from .verify import (
    DEFAULT_CLT_SIZES,
    DEFAULT_CONCENTRATION_SIZES,
    DEFAULT_CRITICAL_SIZES,
    SCHEMA_VERSION,
    verify_clt,
    verify_concentration,
    verify_critical,
    verify_mcmc,
)

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

STAT_NAMES = {
    "sqrtn-m1": Statistic.SQRTN_M1,
    "sqrtn-m2": Statistic.SQRTN_M2,
    "quartern-m1": Statistic.QUARTERN_M1,
    "halfsqrtn-diff": Statistic.HALFSQRTN_M1_MINUS_M2,
    "w1": Statistic.W1_TILDE,
    "w2": Statistic.W2_TILDE,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sizes(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None, help="worker count, 0 = auto (env BLOCKSPIN_THREADS)")
    p.add_argument("--no-meta", action="store_true", help="omit the timestamped meta block")
    p.add_argument("--max-n", type=int, default=DEFAULT_MAX_N, help="exact-grid cap on n")
    return p


def _couplings(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)


def _chain_flags(p: argparse.ArgumentParser, sweeps: int) -> None:
    p.add_argument("--sweeps", type=int, default=sweeps, help="total sweeps including burn-in")
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dynamics", choices=[d.value for d in Dynamics], default=Dynamics.GLAUBER.value)
    p.add_argument("--random-start", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="blockspin", description="Two-block Curie-Weiss model: exact laws, sampling, limit checks.")
    parser.add_argument("--version", action="version", version=f"blockspin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", parents=[common], help="exact law of (k1, k2) on the grid")
    _couplings(p)
    p.add_argument("-n", type=int, required=True)

    p = sub.add_parser("pushforward", parents=[common], help="exact law of a scaled statistic")
    _couplings(p)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--stat", choices=sorted(STAT_NAMES), required=True)

    p = sub.add_parser("phase", parents=[common], help="regime and limiting Dirac mixture")
    _couplings(p)

    p = sub.add_parser("ratefn", parents=[common], help="rate function on a square grid")
    _couplings(p)
    p.add_argument("--grid", type=int, required=True, help="points per axis")
    p.add_argument("--which", choices=("J", "Jv", "Jm"), default="Jm")

    p = sub.add_parser("fixedpoints", parents=[common], help="mean-field critical points and Hessians")
    _couplings(p)

    p = sub.add_parser("sample", parents=[common], help="Glauber/Metropolis samples of (m1, m2)")
    _couplings(p)
    p.add_argument("-n", type=int, required=True)
    _chain_flags(p, sweeps=1100)
    p.add_argument("--meta", help="metadata JSON path (default: OUT.meta.json when --out is given)")

    p = sub.add_parser("verify", help="convergence reports")
    vsub = p.add_subparsers(dest="suite", required=True, parser_class=_Parser)
    v = vsub.add_parser("clt", parents=[common])
    _couplings(v)
    v.add_argument("--sizes", type=_sizes, default=list(DEFAULT_CLT_SIZES))
    v.add_argument("--final-ks", type=float, default=0.05)
    v = vsub.add_parser("critical", parents=[common])
    _couplings(v)
    v.add_argument("--sizes", type=_sizes, default=list(DEFAULT_CRITICAL_SIZES))
    v.add_argument("--final-ks", type=float, default=0.05)
    v = vsub.add_parser("concentration", parents=[common])
    _couplings(v)
    v.add_argument("--sizes", type=_sizes, default=list(DEFAULT_CONCENTRATION_SIZES))
    v.add_argument("--epsilon", type=float, default=0.3)
    v.add_argument("--slope-factor", type=float, default=2.0)
    v = vsub.add_parser("mcmc", parents=[common])
    _couplings(v)
    v.add_argument("-n", type=int, required=True)
    _chain_flags(v, sweeps=100100)
    v.add_argument("--tv", type=float, default=0.02)
    v.add_argument("--ks", type=float, default=0.01)
    return parser


def resolve_threads(flag: int | None) -> int:
    if flag is None:
        env = os.environ.get("BLOCKSPIN_THREADS")
        try:
            flag = int(env) if env else 1
        except ValueError:
            raise UsageError(f"BLOCKSPIN_THREADS must be an integer, got {env!r}")
    if flag < 0:
        raise UsageError("--threads must be >= 0")
    return flag if flag > 0 else (os.cpu_count() or 1)


def _meta(args) -> dict | None:
    if args.no_meta:
        return None
    return {
        "tool": "blockspin",
        "version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def _json_payload(kind: str, body: dict, args) -> str:
    payload = {"schema_version": SCHEMA_VERSION, "kind": kind, **body}
    meta = _meta(args)
    if meta is not None:
        payload["meta"] = meta
    return dumps(payload)


def _emit(text: str, path: str | None, stdout) -> None:
    if path is None:
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _warn_near_critical(args, stderr) -> None:
    if near_critical(args.alpha, args.beta):
        stderr.write(
            f"warning: alpha + beta = {format_float(args.alpha + args.beta)} is within 1e-9 of 2 "
            "but not on the critical line\n"
        )


def _cmd_exact(args) -> tuple[str, int]:
    dist = exact_distribution(ModelParams(args.alpha, args.beta, args.n), max_n=args.max_n)
    if args.format == "json":
        return _json_payload("exact", dist.to_dict(), args), EXIT_OK
    return dist.to_csv(), EXIT_OK


def _cmd_pushforward(args) -> tuple[str, int]:
    dist = exact_distribution(ModelParams(args.alpha, args.beta, args.n), max_n=args.max_n)
    stat = STAT_NAMES[args.stat]
    law = pushforward(dist, stat)
    if args.format == "csv":
        lines = ["x,p"] + [f"{format_float(x)},{p:.16e}" for x, p in zip(law.locations, law.probabilities)]
        return "\n".join(lines) + "\n", EXIT_OK
    body = {"params": params_dict(dist.params), "statistic": stat.value, **law.to_dict()}
    return _json_payload("pushforward", body, args), EXIT_OK


def _cmd_phase(args) -> tuple[str, int]:
    regime = classify_regime(args.alpha, args.beta)
    body = {"params": {"alpha": args.alpha, "beta": args.beta}, "regime": regime.value, **limit_mixture(args.alpha, args.beta).to_dict()}
    return _json_payload("phase", body, args), EXIT_OK


def _cmd_ratefn(args) -> tuple[str, int]:
    if args.grid < 2:
        raise UsageError("--grid must be >= 2")
    half = 1.0 if args.which == "Jm" else 0.5
    axis = np.linspace(-half, half, args.grid)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    if args.which == "J":
        values = rate_J(x1, x2)
    elif args.which == "Jv":
        values = rate_Jv(args.alpha, args.beta, x1, x2)
    else:
        values = rate_Jm(args.alpha, args.beta, x1, x2)
    if args.format == "json":
        rows = [{"x1": a, "x2": b, "value": v} for a, b, v in zip(x1.ravel(), x2.ravel(), values.ravel())]
        body = {"params": {"alpha": args.alpha, "beta": args.beta}, "which": args.which, "grid": args.grid, "values": rows}
        return _json_payload("ratefn", body, args), EXIT_OK
    buf = io.StringIO()
    buf.write("x1,x2,value\n")
    for a, b, v in zip(x1.ravel(), x2.ravel(), values.ravel()):
        buf.write(f"{format_float(a)},{format_float(b)},{format_float(v)}\n")
    return buf.getvalue(), EXIT_OK


def _cmd_fixedpoints(args) -> tuple[str, int]:
    points = []
    for x1, x2 in mean_field_fixed_points(args.alpha, args.beta):
        hess, tag = hessian_Fm_minus_J(args.alpha, args.beta, x1, x2)
        points.append(
            {
                "x1": x1,
                "x2": x2,
                "free_functional": float(free_functional_m(args.alpha, args.beta, x1, x2)),
                "hessian": hess.tolist(),
                "definiteness": tag,
            }
        )
    body = {"params": {"alpha": args.alpha, "beta": args.beta}, "points": points}
    return _json_payload("fixedpoints", body, args), EXIT_OK


def _chain_config(args) -> ChainConfig:
    return ChainConfig(
        seed=args.seed,
        sweeps=args.sweeps,
        burn_in=args.burn_in,
        thin=args.thin,
        dynamics=Dynamics(args.dynamics),
        chains=args.chains,
        random_start=args.random_start,
    )


def _cmd_sample(args, threads: int) -> tuple[str, int]:
    samples = run_chain(ModelParams(args.alpha, args.beta, args.n), _chain_config(args), threads=threads)
    meta_body = samples.metadata()
    meta_path = args.meta or (args.out + ".meta.json" if args.out else None)
    if args.format == "json":
        body = {
            "metadata": meta_body,
            "records": [
                {"sweep": s, "m1": a, "m2": b}
                for s, a, b in zip(samples.sweep.tolist(), samples.m1.tolist(), samples.m2.tolist())
            ],
        }
        return _json_payload("sample", body, args), EXIT_OK
    if meta_path:
        _emit(_json_payload("sample_meta", meta_body, args), meta_path, None)
    return samples.to_csv(), EXIT_OK


def _cmd_verify(args, threads: int) -> tuple[str, int]:
    common = {"threads": threads, "max_n": args.max_n}
    if args.suite == "clt":
        report = verify_clt(args.alpha, args.beta, args.sizes, final_ks=args.final_ks, **common)
    elif args.suite == "critical":
        report = verify_critical(args.alpha, args.beta, args.sizes, final_ks=args.final_ks, **common)
    elif args.suite == "concentration":
        report = verify_concentration(
            args.alpha, args.beta, args.sizes, epsilon=args.epsilon, slope_factor=args.slope_factor, **common
        )
    else:
        report = verify_mcmc(
            args.alpha, args.beta, args.n, _chain_config(args), tv_threshold=args.tv, ks_threshold=args.ks, **common
        )
    code = EXIT_OK if report.passed else EXIT_FAIL
    if args.format == "csv":
        return report.to_csv(), code
    body = report.to_dict()
    body.pop("schema_version")
    body["report_kind"] = body.pop("kind")
    return _json_payload("report", body, args), code


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = resolve_threads(getattr(args, "threads", None))
        if hasattr(args, "alpha"):
            _warn_near_critical(args, stderr)
        if args.command == "sample":
            text, code = _cmd_sample(args, threads)
        elif args.command == "verify":
            text, code = _cmd_verify(args, threads)
        else:
            handler = {
                "exact": _cmd_exact,
                "pushforward": _cmd_pushforward,
                "phase": _cmd_phase,
                "ratefn": _cmd_ratefn,
                "fixedpoints": _cmd_fixedpoints,
            }[args.command]
            text, code = handler(args)
    except (UsageError, DomainError) as exc:
        stderr.write(f"blockspin: {exc}\n")
        return EXIT_USAGE
    _emit(text, args.out, stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
