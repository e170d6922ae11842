"""Command-line entry point: ``npdcat {simulate,npd,test,power,report}``.

Errors are reported on stderr as one JSON object with a ``category`` field
and a matching non-zero exit status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import io, power, report, rng
from .model import ModelError
from .npd import compute_npd
from .presets import get_model
from .simulate import DesignError, simulate_dataset
from .stattests import (InapplicableTestError, KsResult, StratumPlan, calibrate,
                        check_balanced, ks_statistic)

EXIT_CODES = {"config": 2, "data": 3, "inapplicable": 4, "io": 5, "model": 6}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _config(args) -> io.Config:
    cfg = io.load_config(args.config)
    if args.model:
        try:
            cfg.model = get_model(args.model)
        except ModelError as exc:
            raise CliError("config", str(exc)) from None
    if args.seed is not None:
        cfg.seed = args.seed
    if args.stratify is not None:
        cfg.stratify = tuple(s for s in args.stratify.split(",") if s)
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "scale", None) is not None:
        cfg.scale = args.scale
    return cfg


def _need_model(cfg):
    if cfg.model is None:
        raise CliError("config", "no model given (use --model or a config 'model' block)")
    return cfg.model


def _dataset(args, cfg):
    if not args.data:
        raise CliError("config", "this command needs --data")
    model = _need_model(cfg)
    id_col, time_col, y_col = cfg.columns
    return io.parse_dataset(args.data, model.categories, cfg.time_factor, id_col, time_col, y_col)


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_simulate(args, cfg):
    model = _need_model(cfg)
    if cfg.design is None:
        raise CliError("config", "simulate needs a 'design' block in the config")
    data = simulate_dataset(model, cfg.design, rng.SeedSpec(cfg.seed, (args.replicate, 0)))
    path = io.write_dataset(data, _out(args, "simulated.csv"))
    print(f"wrote {len(data)} rows to {path}")


def cmd_npd(args, cfg):
    model = _need_model(cfg)
    data = _dataset(args, cfg)
    v = compute_npd(data, model, cfg.V, rng.derive_seed(cfg.seed, "marginal"),
                    jitter_seed=rng.derive_seed(cfg.seed, "jitter"))
    path = io.write_npd_csv(v, _out(args, "npd.csv"))
    if v.degenerate:
        print(f"warning: {len(v.degenerate)} observation(s) in zero-probability categories",
              file=sys.stderr)
    print(f"wrote {len(v)} npd to {path}")


def _calibration(cfg, data, chi2: bool):
    plan = StratumPlan.from_design(data.design, cfg.stratify, cfg.alpha)
    if chi2:
        check_balanced(data.design, plan)
    return calibrate(cfg.model, data.design, cfg.B, cfg.V, cfg.seed, plan=plan, chi2=chi2,
                     workers=cfg.workers)


def cmd_test(args, cfg):
    _need_model(cfg)
    data = _dataset(args, cfg)
    chi2 = cfg.chi2 or args.chi2
    cal = _calibration(cfg, data, chi2)
    v = cal.npd(data)
    decisions = {"npd": cal.test_npd(v)}
    if cfg.stratify:
        decisions["npd_stratified"] = cal.test_stratified(v)
    if chi2:
        decisions["chi2"] = cal.test_chi2(data)
    body = {"model": cfg.model.to_dict(), "n_obs": len(data), "n_subjects": data.design.N,
            "B": cfg.B, "V": cfg.V, "seed": cfg.seed,
            "tests": {k: d.to_dict() for k, d in decisions.items()}}
    text = json.dumps(body, indent=2, default=_plain)
    if args.out:
        Path(args.out).write_text(text + "\n")
    for k, d in decisions.items():
        stat = d.statistic if isinstance(d.statistic, float) else max(d.statistic)
        print(f"{k}: reject={str(d.reject).lower()} statistic={stat:.6g} p={d.empirical_p:.4g}")


def _plain(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(type(obj))


def cmd_power(args, cfg):
    grid = args.grid or cfg.grid
    sizes = tuple(int(n) for n in args.sample_sizes.split(",")) if args.sample_sizes \
        else cfg.sample_sizes
    build = power.build_parameter_grid if grid == "parameter" else power.build_structural_grid
    scenarios = build(sizes, cfg.B, cfg.V, cfg.scale)
    progress = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    results = power.run_grid(scenarios, cfg.seed, cfg.workers, progress)
    out = _out(args, ".")
    out.mkdir(parents=True, exist_ok=True)
    path = power.write_power_csv(results, out / f"power_{grid}.csv")
    print(f"wrote {len(results)} scenarios to {path}")


def cmd_report(args, cfg):
    _need_model(cfg)
    data = _dataset(args, cfg)
    out = _out(args, "report")
    out.mkdir(parents=True, exist_ok=True)
    cal = _calibration(cfg, data, chi2=False)
    v = cal.npd(data)
    written = []
    written += report.render(report.observed_proportions(data, cal.plan), out / "proportions")
    bands = report.percentile_bands(v, cal.plan, cfg.n_band_sims,
                                    rng.derive_seed(cfg.seed, "bands"), level=cfg.band_level)
    written += report.render(bands, out / "bands")
    written += report.render(report.NullView(cal.ks_null, ks_statistic(v)), out / "null")
    for p in written:
        print(f"wrote {p}")


COMMANDS = {"simulate": cmd_simulate, "npd": cmd_npd, "test": cmd_test,
            "power": cmd_power, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="npdcat", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--model", help="model preset name (overrides the config)")
    common.add_argument("--data", help="dataset CSV (id,time,y[,covariates])")
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--stratify", default=None,
                        help="comma-separated stratification covariates (default trt)")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate one dataset")
    s.add_argument("--replicate", type=int, default=0)
    sub.add_parser("npd", parents=[common], help="compute npd of a dataset")
    t = sub.add_parser("test", parents=[common], help="calibrated tests of a dataset")
    t.add_argument("--chi2", action="store_true", help="also run the stratified Chi-square test")
    pw = sub.add_parser("power", parents=[common], help="power study over a scenario grid")
    pw.add_argument("--grid", choices=("parameter", "structural"))
    pw.add_argument("--scale", type=float, default=None, help="shrink B and V by this factor")
    pw.add_argument("--sample-sizes", help="comma-separated N values")
    sub.add_parser("report", parents=[common], help="diagnostic tables and plots")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except CliError as exc:
        return _fail(exc.category, str(exc))
    except io.ConfigError as exc:
        return _fail("config", str(exc))
    except InapplicableTestError as exc:
        return _fail("inapplicable", str(exc))
    except (io.DataError, DesignError) as exc:
        return _fail("data", str(exc))
    except ModelError as exc:
        return _fail("model", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    return 0


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
