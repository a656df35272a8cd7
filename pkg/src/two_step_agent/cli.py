"""Command-line front end.

Every subcommand reads one config file (TOML or JSON), takes its seed from
``--seed`` or the config, and writes its artifacts into ``--out``.

Exit codes: 0 success, 1 a check failed or inference broke down,
2 usage or configuration error.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import rng as _rng
from .config import RunConfig, load_config
from .decision import act
from .errors import ConfigError, EmptyCohortError, InsufficientDofError, TwoStepError
from .experiments import correlation_report, emit_figure_data, read_records_csv, run_sweep, sanity_suite
from .inference import Observation, sample_posterior
from .inference.posterior import _jsonable
from .plate import HYPER_NAMES, PlateParams, dump_triples
from .predictor import SlopeOnlyLinearModel, fit_ols_no_intercept, predict
from .scm import Cohort, sample_historical

log = logging.getLogger("two_step_agent")

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _out_dir(args, cfg: RunConfig):
    path = args.out or cfg.output_dir
    os.makedirs(path, exist_ok=True)
    return path


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _model_path(args, cfg, out):
    return args.model or cfg.model or os.path.join(out, "model.json")


def _load_model(args, cfg, out):
    if not args.with_model:
        return None
    path = _model_path(args, cfg, out)
    if not os.path.exists(path):
        raise UsageError(f"model file not found: {path} (run `fit` first or pass --model)")
    return SlopeOnlyLinearModel.load(path)


def _summary_lines(samples, names=HYPER_NAMES):
    lines = [f"{'param':<14}{'mean':>12}{'std':>10}{'rhat':>8}"]
    rhat = samples.diagnostics.get("rhat", {})
    for name in names:
        r = rhat.get(name, float("nan"))
        lines.append(f"{name:<14}{samples.mean(name):>12.4f}{samples.std(name):>10.4f}{r:>8.3f}")
    return lines


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args, cfg):
    out = _out_dir(args, cfg)
    n = cfg.n_train if args.n is None else args.n
    cohort = sample_historical(cfg.scm, n, cfg.seed)
    path = os.path.join(out, "cohort.csv")
    cohort.to_csv(path)
    print(f"wrote {len(cohort)} rows to {path}")
    for col in ("x", "a", "y"):
        v = getattr(cohort, col)
        sd = v.std(ddof=1) if len(v) > 1 else 0.0
        print(f"  {col}: mean {v.mean():.4f}  std {sd:.4f}")
    return EXIT_OK


def cmd_fit(args, cfg):
    out = _out_dir(args, cfg)
    if args.data:
        cohort = Cohort.from_csv(args.data)
    else:
        n = cfg.n_train if args.n is None else args.n
        cohort = sample_historical(cfg.scm, n, cfg.seed)
    model = fit_ols_no_intercept(cohort)
    path = args.model or os.path.join(out, "model.json")
    model.save(path)
    print(f"phi = {model.phi!r} (n_train = {model.n_train}); wrote {path}")
    return EXIT_OK


def _observation(args, model):
    batch = ()
    if args.x_batch:
        batch = tuple(np.loadtxt(args.x_batch, ndmin=1, delimiter=","))
    pred = None
    if model is not None:
        if args.x_new is None:
            raise UsageError("--with-model needs --x-new")
        pred = float(predict(model, args.x_new))
    return Observation(x_new=args.x_new, pred=pred, x_batch=batch)


def cmd_update(args, cfg):
    out = _out_dir(args, cfg)
    model = _load_model(args, cfg, out)
    obs = _observation(args, model)
    n = cfg.n_train if args.n is None else args.n
    samples = sample_posterior(cfg.prior, obs, cfg.mcmc, seed=cfg.seed,
                               scm_constants=cfg.scm.constants, n=n)
    samples.to_csv(os.path.join(out, "posterior.csv"))
    samples.diagnostics_json(os.path.join(out, "diagnostics.json"))
    print(f"observation: x_new={obs.x_new} pred={obs.pred} batch={len(obs.x_batch)}")
    print("\n".join(_summary_lines(samples)))
    if not samples.converged:
        print(f"warning: R-hat above {cfg.mcmc.rhat_gate} for {samples.diagnostics['rhat_failures']}",
              file=sys.stderr)
    return EXIT_OK


def cmd_decide(args, cfg):
    out = _out_dir(args, cfg)
    model = _load_model(args, cfg, out)
    x_new = 80.0 if args.x_new is None else args.x_new
    n = cfg.n_train if args.n is None else args.n
    dose, cate, samples = act(cfg.prior, model, x_new, cfg.decision, seed=cfg.seed, mcmc=cfg.mcmc,
                              scm_constants=cfg.scm.constants, n=n)
    trace = {
        "x_new": x_new,
        "with_model": model is not None,
        "pred": float(predict(model, x_new)) if model is not None else None,
        "cate_mean": cate.mean,
        "cate_std": cate.std,
        "threshold_tau": cfg.decision.threshold_tau,
        "dose": float(dose),
        "dose_high": dose.is_high,
        "sampler": samples.diagnostics.get("sampler"),
        "rhat_max": samples.rhat_max,
        "converged": samples.converged,
        "posterior_means": {k: samples.mean(k) for k in HYPER_NAMES},
    }
    _write_json(os.path.join(out, "decision.json"), trace)
    print(f"CATE {cate.mean:.4f} +- {cate.std:.4f} vs tau {cfg.decision.threshold_tau} -> dose {float(dose):g}")
    return EXIT_OK


def _parse_grid(text):
    try:
        grid = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--grid must be comma-separated numbers, got {text!r}") from None
    if not grid:
        raise ConfigError("invalid config at sweep.grid: grid must be nonempty")
    return grid


def cmd_sweep(args, cfg):
    out = _out_dir(args, cfg)
    sw = cfg.sweep
    changes = {}
    if args.param:
        changes["varied_param"] = args.param
    if args.grid is not None:
        changes["grid"] = _parse_grid(args.grid)
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    if args.grid_mode:
        changes["grid_mode"] = args.grid_mode
    if changes:
        try:
            sw = replace(sw, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    jobs = args.jobs or cfg.jobs
    records = run_sweep(sw, seed=cfg.seed, jobs=jobs)
    csv_path, json_path = emit_figure_data(records, out)
    flagged = sum(r.flagged for r in records)
    print(f"{len(records)} records ({flagged} flagged) -> {csv_path}, {json_path}")
    return EXIT_OK


def cmd_sanity(args, cfg):
    out = _out_dir(args, cfg)
    report = sanity_suite(seed=cfg.seed, mcmc=cfg.mcmc)
    report.to_json(os.path.join(out, "sanity.json"))
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} ({c.seconds:.1f}s)")
        print("  " + json.dumps(_jsonable(c.detail), sort_keys=True) if not c.error else "  " + c.error)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_report(args, cfg):
    out = _out_dir(args, cfg)
    wrote = False
    records_path = args.records or os.path.join(out, "sweep_records.csv")
    if os.path.exists(records_path):
        csv_path, json_path = emit_figure_data(read_records_csv(records_path), out)
        print(f"summary -> {json_path}")
        wrote = True
    elif args.records:
        raise UsageError(f"records file not found: {records_path}")
    if args.correlation:
        model = _load_model(args, cfg, out)
        x_new = 80.0 if args.x_new is None else args.x_new
        pred = float(predict(model, x_new)) if model is not None else None
        obs = Observation(x_new=x_new, pred=pred)
        names, mat, _ = correlation_report(cfg.prior, obs, seed=cfg.seed, mcmc=cfg.mcmc,
                                           scm_constants=cfg.scm.constants, n=cfg.n_train, out_dir=out)
        i, j = names.index("n_e"), names.index("alpha_a_mu")
        print(f"corr(n_e, alpha_a_mu) = {mat[i, j]:.3f}; matrix -> {out}/posterior_correlation.json")
        wrote = True
    if not wrote:
        raise UsageError("nothing to report: no sweep records found and --correlation not given")
    return EXIT_OK


def cmd_plate_dump(args, cfg):
    out = _out_dir(args, cfg)
    n = cfg.n_train if args.n is None else args.n
    means = {k: cfg.prior.mean(k) for k in HYPER_NAMES}
    a, b, d = cfg.scm.constants
    p = PlateParams(n=n, a=a, b=b, d=d, **means)
    path = os.path.join(out, "plate_triples.csv")
    dump_triples(p, args.draws, _rng.stream(cfg.seed, _rng.AUX), path)
    print(f"wrote {args.draws} draws to {path}")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "draw a historical cohort and write cohort.csv"),
    "fit": (cmd_fit, "fit the slope-only model and write model.json"),
    "update": (cmd_update, "sample the agent's posterior for one observation"),
    "decide": (cmd_decide, "update (or not) and choose a dose for one patient"),
    "sweep": (cmd_sweep, "sweep one prior mean, with and without decision support"),
    "sanity": (cmd_sanity, "run the four inference self-checks"),
    "report": (cmd_report, "summaries from sweep records and posterior correlations"),
    "plate-dump": (cmd_plate_dump, "write draws of the plate summary statistics and phi"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="two-step-agent",
                                     description="Simulate an agent that updates on a model prediction "
                                                 "before choosing a dose.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    ps = {}
    for name, (_, help_text) in COMMANDS.items():
        ps[name] = sub.add_parser(name, parents=[common], help=help_text, description=help_text)

    for name in ("simulate", "fit", "update", "decide", "plate-dump"):
        ps[name].add_argument("--n", type=int, help="cohort / plate size (default: config n_train)")
    ps["fit"].add_argument("--data", help="cohort CSV to fit on (default: simulate from the config)")
    ps["fit"].add_argument("--model", help="where to write the model (default: OUT/model.json)")
    for name in ("update", "decide", "report"):
        p = ps[name]
        p.add_argument("--x-new", type=float, help="covariate of the new patient")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--with-model", dest="with_model", action="store_true",
                       help="condition on the model prediction")
        g.add_argument("--no-model", dest="with_model", action="store_false",
                       help="ignore the model (default)")
        p.set_defaults(with_model=False)
        p.add_argument("--model", help="model JSON (default: config model or OUT/model.json)")
    ps["update"].add_argument("--x-batch", help="file of comma/newline separated x observations")
    ps["sweep"].add_argument("--param", choices=["n_e", "alpha_a_mu", "alpha_x_mu", "alpha_y_mu"],
                             help="prior mean to vary")
    ps["sweep"].add_argument("--grid", help="comma-separated grid values")
    ps["sweep"].add_argument("--grid-mode", choices=["absolute", "offset"],
                             help="grid values are absolute means or offsets from the SCM value")
    ps["sweep"].add_argument("--replicates", type=int, help="replicates per grid value")
    ps["sweep"].add_argument("--jobs", type=int, help="worker processes")
    ps["report"].add_argument("--records", help="sweep_records.csv to summarise")
    ps["report"].add_argument("--correlation", action="store_true",
                              help="also compute the posterior correlation matrix")
    ps["plate-dump"].add_argument("--draws", type=int, default=1000, help="number of draws")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be >= 0")
        cfg = replace(cfg, seed=args.seed)
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn = COMMANDS[args.command][0]
    try:
        cfg = _resolve_config(args)
        return fn(args, cfg)
    except (ConfigError, UsageError, EmptyCohortError, InsufficientDofError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TwoStepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
