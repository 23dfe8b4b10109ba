"""Command-line interface: ``qlorenz {simulate,bifurcate,resources,sigma-max,verify}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from ._io import text_out
from .analysis import bifurcation_sweep, transitions
from .blockenc import sigma_max_curve, write_sigma_max_csv
from .dynamics import LorenzParams
from .errors import RegisterWidthError
from .marching import ENGINES, march, resource_report, run_trajectory

DEFAULT_PARAMS = LorenzParams(10.0, 28.0, 0.55)


class ConfigError(ValueError):
    pass


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            out[key.replace("-", "_")] = value
    return out


def _params_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=DEFAULT_PARAMS.sigma)
    p.add_argument("--rho", type=float, default=DEFAULT_PARAMS.rho)
    p.add_argument("--beta", type=float, default=DEFAULT_PARAMS.beta)


def _ic_args(p: argparse.ArgumentParser, z0: float = 1.1) -> None:
    p.add_argument("--x0", type=float, default=0.1)
    p.add_argument("--y0", type=float, default=-1.1)
    p.add_argument("--z0", type=float, default=z0)


def _positive(kind):
    def conv(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _nonnegative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlorenz", description=__doc__)
    parser.add_argument("--config", help="file of 'key = value' lines overriding defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    sim = sub.add_parser("simulate", parents=[common], help="run one trajectory and write CSV")
    _params_args(sim)
    _ic_args(sim)
    sim.add_argument("--dt", type=_positive(float), default=1e-3)
    sim.add_argument("--steps", type=_nonnegative_int, default=1000)
    sim.add_argument("--engine", choices=ENGINES, default="quantum-collapsed")
    sim.add_argument("--out")

    bif = sub.add_parser("bifurcate", parents=[common], help="sweep beta and write Poincare-section CSV")
    _params_args(bif)
    _ic_args(bif)
    bif.add_argument("--beta-min", type=float, default=0.535)
    bif.add_argument("--beta-max", type=float, default=0.566)
    bif.add_argument("--beta-step", type=_positive(float), default=5e-4)
    bif.add_argument("--dt", type=_positive(float), default=2.5e-4)
    bif.add_argument("--T", type=_positive(float), default=150.0)
    bif.add_argument("--engine", choices=("classical", "quantum-collapsed", "euler", "rk4"),
                     default="classical")
    bif.add_argument("--transient", type=float, default=0.5,
                     help="fraction of the run discarded before sampling")
    bif.add_argument("--cluster-tol", type=_positive(float), default=0.05)
    bif.add_argument("--workers", type=_positive(int), default=1)
    bif.add_argument("--summary", help="also write detected periods and transitions as JSON")
    bif.add_argument("--out")

    res = sub.add_parser("resources", parents=[common], help="print the resource report as JSON")
    res.add_argument("--nt", type=_positive(int), required=True)
    res.add_argument("--out")

    sm = sub.add_parser("sigma-max", parents=[common], help="largest singular value of the time-advance matrix")
    _params_args(sm)
    sm.add_argument("--dt-min", type=_positive(float), default=1e-4)
    sm.add_argument("--dt-max", type=_positive(float), default=1e-2)
    sm.add_argument("--points", type=_positive(int), default=50)
    sm.add_argument("--log", action="store_true", help="log-spaced dt grid")
    sm.add_argument("--out")

    ver = sub.add_parser("verify", parents=[common], help="run quick oracle cross-checks")
    ver.add_argument("--seed", type=int, default=0)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv) -> argparse.Namespace:
    """Defaults, then config file, then explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except ConfigError as exc:
            parser.error(str(exc))
        sp = _subparser(parser, args.command)
        known = {a.dest: a for a in sp._actions}
        unknown = sorted(set(cfg) - set(known) - {"help"})
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        defaults = {}
        for key, text in cfg.items():
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = text.lower() in ("1", "true", "yes", "on")
                continue
            try:
                value = action.type(text) if action.type else text
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config key {key}: {exc}")
            if action.choices is not None and value not in action.choices:
                parser.error(f"config key {key}: {value!r} not in {list(action.choices)}")
            defaults[key] = value
        for a in sp._actions:
            if a.required and a.dest in defaults:
                a.required = False
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _params(args) -> LorenzParams:
    p = LorenzParams(args.sigma, args.rho, args.beta)
    p.validate_positive()
    return p


def cmd_simulate(args) -> int:
    p = _params(args)
    x0 = (args.x0, args.y0, args.z0)
    if args.engine == "quantum-full":
        tr = march(x0, p, args.dt, args.steps, mode="full").trajectory
    else:
        tr = run_trajectory(x0, p, args.dt, args.steps, args.engine)
    if not np.all(np.isfinite(tr.xyz)):
        print("error: trajectory diverged; reduce --dt", file=sys.stderr)
        return 3
    tr.write_csv(args.out or sys.stdout)
    return 0


def cmd_bifurcate(args) -> int:
    if not 0.0 <= args.transient < 1.0:
        raise ValueError("--transient must lie in [0, 1)")
    base = replace(_params(args), beta=args.beta_min)
    diagram = bifurcation_sweep(base, args.beta_min, args.beta_max, args.beta_step, args.dt,
                                args.T, args.engine, (args.x0, args.y0, args.z0),
                                args.transient, args.cluster_tol, workers=args.workers)
    diagram.write_csv(args.out or sys.stdout)
    if args.summary:
        summary = {
            "beta": [float(b) for b in diagram.betas],
            "clusters": [r.count for r in diagram.results],
            "chaotic": [r.chaotic for r in diagram.results],
            "transitions": {str(k): v for k, v in transitions(diagram).items()},
        }
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_resources(args) -> int:
    with text_out(args.out or sys.stdout) as fh:
        fh.write(resource_report(args.nt).to_json() + "\n")
    return 0


def cmd_sigma_max(args) -> int:
    if args.dt_max < args.dt_min:
        raise ValueError("--dt-max must not be below --dt-min")
    space = np.geomspace if args.log else np.linspace
    dts = space(args.dt_min, args.dt_max, args.points)
    curve = sigma_max_curve(_params(args), dts)
    write_sigma_max_csv(args.out or sys.stdout, curve)
    return 0


def cmd_verify(args) -> int:
    from . import checks

    failed = 0
    for name, ok, detail in checks.run_all(seed=args.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        failed += not ok
    return 1 if failed else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "bifurcate": cmd_bifurcate,
    "resources": cmd_resources,
    "sigma-max": cmd_sigma_max,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, RegisterWidthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
