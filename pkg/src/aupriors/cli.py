"""Command-line entry point.

Subcommands: ``simulate`` and ``reproduce`` drive the experiment harness;
``phi``, ``integrability`` and ``construct-prior`` expose the field
computations on catalog models.  Exit codes: 0 success, 2 validation
error, 3 aborted run.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .engine import construct_log_prior, integrability_check, make_phi_field
from .errors import AupriorsError, RunAborted
from .harness import (FIGURE_IDS, INTERVAL_KIND, ExperimentConfig,
                      reproduce_figure, run_experiment)
from .models import MODEL_IDS, get_model


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def read_config_file(path: str) -> dict:
    """Flat key=value text; '#' starts a comment, lists are comma-separated."""
    options = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            options[key.replace("-", "_")] = value
    return options


def _model_instance(args):
    return get_model(args.model, n=getattr(args, "n", None),
                     m=getattr(args, "m", None),
                     design_seed=getattr(args, "design_seed", 0))


def _fixed(values) -> str:
    # v + 0.0 keeps values intact but prints negative zero as plain zero
    return " ".join(f"{float(v) + 0.0:.8f}" for v in np.atleast_1d(values))


def cmd_phi(args) -> int:
    model = _model_instance(args)
    field = make_phi_field(model.bundle(), method=args.method)
    print(_fixed(field.eval(_floats(args.theta))))
    return 0


def cmd_integrability(args) -> int:
    model = _model_instance(args)
    field = make_phi_field(model.bundle(), method=args.method)
    grid = []
    with open(args.grid_spec, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                grid.append(_floats(line))
    report = integrability_check(field, grid)
    print(f"verdict={'TRUE' if report.verdict else 'FALSE'}")
    print(f"points_tested={report.points_tested}")
    print(f"max_asymmetry={report.max_asymmetry:.8f}")
    if report.worst_pair is not None:
        print(f"worst_pair={report.worst_pair[0]},{report.worst_pair[1]}")
        print(f"worst_point={_fixed(report.worst_point)}")
    return 0


def cmd_construct_prior(args) -> int:
    model = _model_instance(args)
    field = make_phi_field(model.bundle(), method=args.method)
    prior = construct_log_prior(field, _floats(args.anchor), quad_tol=args.quad_tol)
    print(_fixed(prior.eval(_floats(args.theta))))
    return 0


def cmd_simulate(args) -> int:
    options = read_config_file(args.config) if args.config else {}

    def pick(name, cast, default):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        if name in options:
            return cast(options[name])
        return default

    cfg = ExperimentConfig(
        model=pick("model", str, "ner-balanced"),
        flavors=tuple(pick("prior", lambda s: tuple(s.split(",")), ("au",))),
        scenario=pick("scenario", str, "i"),
        theta_true=pick("theta_true", _floats, None),
        m_list=tuple(pick("m", _ints, (10,))),
        n=pick("n", int, 5),
        reps=pick("reps", int, 2000),
        chain=pick("chain", int, 2000),
        warmup=pick("warmup", int, 100),
        dg_chain=pick("dg_chain", int, 20000),
        dg_warmup=pick("dg_warmup", int, 1000),
        seed=pick("seed", int, 42),
        workers=pick("workers", int, None),
        out=pick("out", str, None),
    )
    records = run_experiment(cfg)
    print(f"interval={INTERVAL_KIND} seed={cfg.seed} reps={cfg.reps} "
          f"records={len(records)}")
    if cfg.out:
        print(f"wrote {cfg.out}")
    else:
        for line in _records_preview(records):
            print(line)
    return 0


def _records_preview(records):
    for r in sorted(records, key=lambda r: (r.prior, r.m, r.parameter)):
        yield (f"{r.prior} m={r.m} {r.parameter}: abs_bias={r.abs_bias:.6f} "
               f"mse={r.mse:.6f} coverage95={r.coverage95:.6f}")


def cmd_reproduce(args) -> int:
    records = reproduce_figure(args.figure, args.scenario, args.reps,
                               args.seed, args.out, chain=args.chain,
                               warmup=args.warmup, dg_chain=args.dg_chain,
                               dg_warmup=args.dg_warmup, workers=args.workers)
    print(f"figure={args.figure} interval={INTERVAL_KIND} records={len(records)}")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aupriors",
        description="Bias-cancelling prior construction and validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_options(p):
        p.add_argument("--model", required=True, choices=MODEL_IDS)
        p.add_argument("--method", default="general",
                       choices=("general", "hi", "iid"),
                       help="field formula to use (default: general)")
        p.add_argument("--n", type=int, default=None,
                       help="design rows / units per area for default designs")
        p.add_argument("--m", type=int, default=None, help="area count")
        p.add_argument("--design-seed", type=int, default=0)

    p_phi = sub.add_parser("phi", help="evaluate the log-prior gradient field")
    add_model_options(p_phi)
    p_phi.add_argument("--theta", required=True, help="comma-separated point")
    p_phi.set_defaults(fn=cmd_phi)

    p_int = sub.add_parser("integrability", help="field Jacobian symmetry audit")
    add_model_options(p_int)
    p_int.add_argument("--grid-spec", required=True,
                       help="file of comma-separated grid points, one per line")
    p_int.set_defaults(fn=cmd_integrability)

    p_con = sub.add_parser("construct-prior",
                           help="log prior by axis-path integration")
    add_model_options(p_con)
    p_con.add_argument("--anchor", required=True)
    p_con.add_argument("--theta", required=True)
    p_con.add_argument("--quad-tol", type=float, default=1e-8)
    p_con.set_defaults(fn=cmd_construct_prior)

    p_sim = sub.add_parser("simulate", help="replication study over (prior, m)")
    p_sim.add_argument("--config", default=None,
                       help="key=value file; flags override its entries")
    p_sim.add_argument("--model", default=None)
    p_sim.add_argument("--prior", type=lambda s: tuple(s.split(",")), default=None)
    p_sim.add_argument("--scenario", default=None, choices=("i", "ii"))
    p_sim.add_argument("--theta-true", dest="theta_true", type=_floats, default=None)
    p_sim.add_argument("--m", type=_ints, default=None)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--chain", type=int, default=None)
    p_sim.add_argument("--warmup", type=int, default=None)
    p_sim.add_argument("--dg-chain", dest="dg_chain", type=int, default=None)
    p_sim.add_argument("--dg-warmup", dest="dg_warmup", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--workers", type=int, default=None)
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(fn=cmd_simulate)

    p_rep = sub.add_parser("reproduce", help="figure-grid metric reproduction")
    p_rep.add_argument("--figure", required=True, choices=FIGURE_IDS)
    p_rep.add_argument("--scenario", default="i", choices=("i", "ii"))
    p_rep.add_argument("--reps", type=int, default=2000)
    p_rep.add_argument("--seed", type=int, default=42)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--chain", type=int, default=2000)
    p_rep.add_argument("--warmup", type=int, default=100)
    p_rep.add_argument("--dg-chain", dest="dg_chain", type=int, default=20000)
    p_rep.add_argument("--dg-warmup", dest="dg_warmup", type=int, default=1000)
    p_rep.add_argument("--workers", type=int, default=None)
    p_rep.set_defaults(fn=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RunAborted as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    except (AupriorsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
