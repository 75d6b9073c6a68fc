"""Command-line front end: ``cascade-lab <command> [options]``.

Exit codes: 0 success, 2 invalid input or domain refusal, 3 size cap
exceeded, 4 failed acceptance check under ``--assert``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import build_config, read_config_file
from .errors import AcceptanceFailure, CascadeError
from .experiments import RUNNERS
from .io import Outputs, dumps, write_json
from .io import manifest as make_manifest

HELP = {
    "moments": "exact moment trajectories and proof bounds",
    "domain": "classify a weight law",
    "cascade": "pools, martingale replicas and one cascade path",
    "clt": "standardised samples and KS distances over n",
    "limit": "one Gaussian limit path (marginal or consistent)",
    "cov": "empirical versus exact increment covariance",
    "spectrum": "coarse spectrum, partition function and Legendre bound",
    "zygmund": "second-difference statistic at t = 1/b",
    "general": "additive measure for a general weight scheme",
    "acceptance": "run the acceptance suite",
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common")
    g.add_argument("--config", help="key = value file; flags override it")
    g.add_argument("--seed", type=int, help="master seed (required for random experiments)")
    g.add_argument("--out", help="output directory (otherwise the main table goes to stdout)")
    g.add_argument("--workers", type=int, help="worker processes (does not change results)")
    g.add_argument("--b", type=int, help="branching number")
    g.add_argument("--law", choices=["dirac", "twopoint", "uniform", "lognormal"])
    g.add_argument("--a", type=float, help="two-point half-width")
    g.add_argument("--c", type=float, help="uniform half-width")
    g.add_argument("--rho", type=float, help="lognormal shape")
    s = p.add_argument_group("sizes")
    s.add_argument("--pool-size", "-P", dest="pool_size", type=int)
    s.add_argument("--rounds", "-K", type=int, help="smoothing rounds per pool")
    s.add_argument("--no-renormalize", dest="renormalize", action="store_const", const=False,
                   help="keep raw pool means between rounds")
    s.add_argument("--n", type=int, help="iteration count or tree depth")
    s.add_argument("--n-max", dest="n_max", type=int)
    s.add_argument("--j", type=int, help="grid depth")
    s.add_argument("--L", type=int, help="truncation depth")
    s.add_argument("--depth", type=int)
    s.add_argument("--replicas", type=int)
    x = p.add_argument_group("experiment")
    x.add_argument("--mode", choices=["marginal", "consistent"])
    x.add_argument("--source", choices=["gaussian", "cascade"])
    x.add_argument("--scheme", choices=["canonical", "geometric"])
    x.add_argument("--theta", type=float)
    x.add_argument("--eps", type=float, help="spectrum bin half-width")
    x.add_argument("--z0", type=float, help="starting value of the third-moment bound")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    for name, text in HELP.items():
        sp = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "acceptance":
            sp.add_argument("--assert", dest="assert_", action="store_true",
                            help="exit with status 4 if any check fails")
    return parser


def _emit(out: Outputs, cfg, command: str) -> None:
    if cfg.out:
        out.write(cfg.out)
        write_json(Path(cfg.out) / "manifest.json", make_manifest(command, cfg.echo()))
        if "summary" in out.documents:
            sys.stdout.write(dumps(out.documents["summary"]))
    elif out.tables:
        sys.stdout.write(next(iter(out.tables.values())).text())


def _acceptance(cfg, assert_: bool) -> int:
    from .acceptance import run_suite, summary_table

    results = run_suite(cfg.seed, cfg.workers)
    for r in results:
        print(r.line())
    if cfg.out:
        out = Outputs(tables={"acceptance": summary_table(results)})
        out.write(cfg.out)
        write_json(Path(cfg.out) / "manifest.json", make_manifest("acceptance", cfg.echo()))
    failed = [r.number for r in results if not r.passed]
    if failed and assert_:
        raise AcceptanceFailure(f"failed criteria: {', '.join(map(str, failed))}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = vars(args).copy()
    command = flags.pop("command")
    assert_ = flags.pop("assert_", False)
    try:
        file_values = read_config_file(flags["config"], command) if flags.get("config") else None
        if command == "acceptance" and flags.get("seed") is None and not (file_values or {}).get("seed"):
            from .sampling_defaults import DEFAULTS
            flags["seed"] = DEFAULTS["seed"]
        cfg = build_config(command, file_values, flags)
        if command == "acceptance":
            return _acceptance(cfg, assert_)
        _emit(RUNNERS[command](cfg), cfg, command)
        return 0
    except CascadeError as exc:
        partial = getattr(exc, "outputs", None)
        if partial is not None and "summary" in partial.documents:
            sys.stdout.write(dumps(partial.documents["summary"]))
        print(f"cascade-lab {command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
