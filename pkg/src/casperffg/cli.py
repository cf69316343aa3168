"""Command-line front end.

Exit codes: 0 on success, 1 on a usage error, 2 on a scenario or parameter
error. Results go to standard output unless ``--out`` is given; relative
``--out`` paths are placed under ``$CASPERFFG_OUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import (D0_DEFAULT, INCENTIVE_COLUMNS, RaceSpec, gas_overhead, incentive_tables,
                       mu_breakeven, phi, phi_honest, race, to_csv, worst_case_T)
from .errors import ConfigError, DomainError, NeverFinalized
from .params import DEFAULT_PARAMS, ProtocolParams
from .scenario import load_scenario, offline_scenario, partition_scenario
from .sim import first_finalization_time, run

OUT_DIR_ENV = "CASPERFFG_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _params(args) -> ProtocolParams:
    overrides = {}
    for name in ("epoch_length", "gamma", "beta", "p"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return dataclasses.replace(DEFAULT_PARAMS, **overrides)


def _header(args, params: ProtocolParams, seed=None) -> dict:
    h = {"tool": f"casperffg {__version__}", "command": args.command}
    if seed is not None:
        h["seed"] = seed
    for f in dataclasses.fields(params):
        h[f"params.{f.name}"] = getattr(params, f.name)
    return h


def _emit(args, text: str):
    if args.out:
        path = Path(args.out)
        base = os.environ.get(OUT_DIR_ENV)
        if base and not path.is_absolute():
            path = Path(base) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _plain(args, values):
    _emit(args, "".join(f"{v!r}\n" if isinstance(v, float) else f"{v}\n" for v in values))


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.max_epochs is not None:
        cfg.max_epochs = args.max_epochs
    cfg.validate()
    trace = run(cfg)
    _emit(args, trace.to_csv())
    if args.events:
        Path(args.events).write_text(trace.events_csv(), encoding="utf-8", newline="\n")
    for side in trace.sides:
        try:
            epochs, seconds = first_finalization_time(trace, side)
            print(f"{side}: first finalization {epochs} epochs after epoch {trace.fault_epoch} "
                  f"(t={seconds!r} s)", file=sys.stderr)
        except NeverFinalized:
            print(f"{side}: no finalization after epoch {trace.fault_epoch}", file=sys.stderr)
    return 0


def cmd_phi(args) -> int:
    params = _params(args)
    f = phi_honest if args.honest else phi
    rows = [{"alpha": a, "phi": f(a, params, args.d0)} for a in args.alpha]
    if args.format == "plain":
        _plain(args, [r["phi"] for r in rows])
    else:
        h = _header(args, params)
        h["alpha_means"] = "honest share" if args.honest else "offline share"
        h["D0"] = args.d0
        _emit(args, to_csv(rows, h, ["alpha", "phi"]))
    return 0


def cmd_wc(args) -> int:
    params = _params(args)
    rows = [{"alpha": a, "worst_case_T": worst_case_T(a, params, args.d0),
             "phi": phi_honest(a, params, args.d0)} for a in args.alpha]
    if args.format == "plain":
        _plain(args, [r["worst_case_T"] for r in rows])
    else:
        h = _header(args, params)
        h["alpha_means"] = "honest share"
        _emit(args, to_csv(rows, h, ["alpha", "worst_case_T", "phi"]))
    return 0


def cmd_race(args) -> int:
    rows = []
    for mu in args.mu:
        r = race(RaceSpec(args.n1, args.n2, mu))
        rows.append({"n1": args.n1, "n2": args.n2, "mu": mu, "probability": r.probability,
                     "log_probability": r.log_probability, "underflow": r.underflow,
                     "mu_breakeven": mu_breakeven(args.n1, args.n2)})
    if args.format == "plain":
        _plain(args, [r["probability"] for r in rows])
    else:
        _emit(args, to_csv(rows, _header(args, DEFAULT_PARAMS), list(rows[0])))
    return 0


def cmd_tables(args) -> int:
    rows = []
    for a in args.alpha:
        for mu in args.mu:
            for rho in args.rho:
                rows.extend(incentive_tables(a, mu, rho))
    _emit(args, to_csv(rows, _header(args, DEFAULT_PARAMS), INCENTIVE_COLUMNS))
    return 0


def cmd_gas(args) -> int:
    rows = []
    for n in args.validators:
        init, vote = gas_overhead(n, args.vote_gas, args.init_gas, args.gas_limit,
                                  args.epoch_length, args.vote_window)
        rows.append({"validators": n, "init_fraction": init, "vote_fraction": vote})
    if args.format == "plain":
        _plain(args, [v for r in rows for v in (r["init_fraction"], r["vote_fraction"])])
    else:
        h = _header(args, DEFAULT_PARAMS)
        h.update(vote_gas=args.vote_gas, init_gas=args.init_gas, gas_limit=args.gas_limit,
                 vote_window=args.vote_window)
        _emit(args, to_csv(rows, h, ["validators", "init_fraction", "vote_fraction"]))
    return 0


def _sweep_one(job):
    kind, alpha, mu, seed, params, max_epochs, path = job
    if kind == "offline":
        cfg = offline_scenario(alpha, params=params, max_epochs=max_epochs)
        cfg.seed = seed
    elif kind == "partition":
        cfg = partition_scenario(alpha, mu, seed, params, max_epochs=max_epochs)
    else:
        cfg = load_scenario(path)
        cfg.seed = seed
    trace = run(cfg)
    out = []
    for side in trace.sides:
        try:
            epochs, seconds = first_finalization_time(trace, side)
        except NeverFinalized:
            epochs, seconds = None, None
        out.append({"kind": kind, "alpha": alpha, "mu": mu, "seed": seed, "side": side,
                    "first_finalization_epochs": epochs, "first_finalization_seconds": seconds})
    return out


def cmd_sweep(args) -> int:
    params = _params(args)
    if args.kind == "scenario" and not args.scenario:
        raise UsageError("sweep scenario needs --scenario")
    if args.kind == "scenario":
        load_scenario(args.scenario)
    alphas = args.alpha or [None]
    mus = args.mu or [None]
    if args.kind == "partition" and (not args.alpha or not args.mu):
        raise UsageError("sweep partition needs --alpha and --mu")
    if args.kind == "offline" and not args.alpha:
        raise UsageError("sweep offline needs --alpha")
    jobs = [(args.kind, a, m, s, params, args.max_epochs, args.scenario)
            for a in alphas for m in mus for s in args.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = [r for batch in results for r in batch]
    rows.sort(key=lambda r: (str(r["alpha"]), str(r["mu"]), r["seed"], r["side"]))
    h = _header(args, params)
    h["kind"] = args.kind
    _emit(args, to_csv(rows, h, ["kind", "alpha", "mu", "seed", "side",
                                 "first_finalization_epochs", "first_finalization_seconds"]))
    return 0


def _add_params(p):
    p.add_argument("--epoch-length", dest="epoch_length", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--d0", type=float, default=D0_DEFAULT, help="initial total deposit")


def _add_output(p, plain=True):
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=["csv", "plain"] if plain else ["csv"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="casperffg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"casperffg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run a scenario file and write its trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--events", help="also write finalization and slash events here")
    _add_output(p, plain=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("phi", help="epochs until finalization resumes after a share stops voting")
    p.add_argument("--alpha", type=_floats, required=True, help="share that stops voting")
    p.add_argument("--honest", action="store_true", help="read --alpha as the share that keeps voting")
    _add_params(p)
    _add_output(p)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("wc", help="delay achievable by the worst-case adversary")
    p.add_argument("--alpha", type=_floats, required=True, help="honest share")
    _add_params(p)
    _add_output(p)
    p.set_defaults(func=cmd_wc)

    p = sub.add_parser("race", help="probability that chain 1 reaches n1 blocks before chain 2 reaches n2")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--mu", type=_floats, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_race)

    p = sub.add_parser("tables", help="incentive tables for an abstaining validator")
    p.add_argument("--alpha", type=_floats, required=True)
    p.add_argument("--mu", type=_floats, required=True)
    p.add_argument("--rho", type=_floats, required=True)
    _add_output(p, plain=False)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("gas", help="share of block gas used by the contract")
    p.add_argument("--validators", type=_ints, default=[100])
    p.add_argument("--vote-gas", dest="vote_gas", type=float, default=532031)
    p.add_argument("--init-gas", dest="init_gas", type=float, default=742393)
    p.add_argument("--gas-limit", dest="gas_limit", type=float, default=8e6)
    p.add_argument("--epoch-length", dest="epoch_length", type=int, default=50)
    p.add_argument("--vote-window", dest="vote_window", type=int, default=37)
    _add_output(p)
    p.set_defaults(func=cmd_gas)

    p = sub.add_parser("sweep", help="run a grid of scenarios and collect first finalization times")
    p.add_argument("kind", choices=["offline", "partition", "scenario"])
    p.add_argument("--alpha", type=_floats)
    p.add_argument("--mu", type=_floats)
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--scenario")
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=10**4)
    p.add_argument("--jobs", type=int, default=1)
    _add_params(p)
    _add_output(p, plain=False)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        print(parser.format_usage(), end="", file=sys.stderr)
        return 1
    except ConfigError as e:
        print("configuration error:", file=sys.stderr)
        for problem in e.problems:
            print(f"  {problem}", file=sys.stderr)
        return 2
    except DomainError as e:
        print(f"parameter error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        # --help and --version exit through argparse
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
