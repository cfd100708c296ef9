"""Command-line driver: simulate, register, crlb, mc and scenario.

Exit codes: 0 success, 2 configuration or file error, 3 numerical or
observability failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .crlb import crlb, fim
from .errors import (
    BearingRegError,
    ConfigError,
    InvalidArgumentError,
    UnobservableBiasError,
)
from .ga import GASettings
from .io import (
    check_output_dir,
    load_scenario,
    read_reports,
    save_scenario,
    write_csv,
    write_reports,
    write_truth,
)
from .registration import build_pseudo_measurements, estimate_bias_batch, estimate_bias_windowed
from .simulator import (
    B_TEST1,
    B_TEST2,
    B_TEST3,
    canonical_scenario,
    generate_truth,
    monte_carlo,
    register_centralized,
    run_seed,
    simulate,
)

logger = logging.getLogger("bearing_reg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

BIAS_SETS = {"test1": B_TEST1, "test2": B_TEST2, "test3": B_TEST3}


def _scenario(args):
    cfg = load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if getattr(args, "scale", None) is not None:
        overrides["crlb_scale"] = args.scale
    return replace(cfg, **overrides) if overrides else cfg


def _settings(args) -> GASettings:
    if args.window is not None:
        base = GASettings.realtime(window_size=args.window)
    else:
        base = GASettings()
    if args.generations is not None:
        base = replace(base, generations=args.generations)
    return base


def _bias_rows(ests, ids):
    for e in ests:
        yield (e.window_index, *[e.bias[s] for s in ids], e.nll)


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    out = check_output_dir(args.out)
    truths, reports = [], []
    for run in range(args.runs):
        rng = np.random.default_rng(run_seed(cfg.seed, run))
        truth, labelled, dets = simulate(cfg, rng, run=run)
        truths.append((run, truth))
        reports.extend(dets if dets is not None else labelled)
    n_truth = write_truth(out / "truth.csv", truths)
    n_rep = write_reports(out / "reports.csv", reports)
    print(f"wrote {n_rep} reports and {n_truth} truth rows to {out}")
    return EXIT_OK


def cmd_register(args) -> int:
    cfg = _scenario(args)
    out = check_output_dir(args.out)
    settings = replace(_settings(args), seed=cfg.seed)
    sensors = cfg.sensor_map
    ids = tuple(sensors)
    plan = cfg.plan
    if args.reports:
        reports = read_reports(args.reports, run=args.run)
        if not reports:
            raise ConfigError(f"no reports for run {args.run} in {args.reports}")
        labelled = all(r.target is not None for r in reports)
        dets = None if labelled else reports
    else:
        rng = np.random.default_rng(run_seed(cfg.seed, args.run))
        _, reports, dets = simulate(cfg, rng, run=args.run)
    if dets is not None:
        est, _ = register_centralized(dets, plan, sensors, settings, cfg.persistence, T=cfg.T)
        ests = [est]
    else:
        Z = build_pseudo_measurements(reports, plan, sensors)
        if settings.window_size:
            ests = estimate_bias_windowed(Z, sensors, settings, sensor_ids=ids)
        else:
            ests = [estimate_bias_batch(Z, sensors, settings, sensor_ids=ids)]
    header = ("window_index", *[f"b_{s}" for s in ids], "nll")
    write_csv(out / "bias.csv", header, _bias_rows(ests, ids))
    write_csv(out / "history.csv", ("window_index", "generation", "best_nll"),
              ((e.window_index, g, f) for e in ests for g, f in enumerate(e.history)))
    final = ests[-1].bias
    print("bias estimate (rad): " + ", ".join(f"{s}: {final[s]:+.6f}" for s in ids))
    return EXIT_OK


def cmd_crlb(args) -> int:
    cfg = _scenario(args)
    out = check_output_dir(args.out)
    rng = np.random.default_rng(run_seed(cfg.seed, 0))
    truth = generate_truth(cfg, rng)
    bound = crlb(fim(cfg.sensor_map, truth, plan=cfg.plan))
    write_csv(out / "crlb.csv", ("sensor_id", "sqrt_crlb_rad"), zip(bound.sensor_ids, bound.sqrt_diagonal))
    print("sqrt-CRLB (rad): " + ", ".join(f"{s}: {v:.3e}" for s, v in bound.as_dict().items()))
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = _scenario(args)
    out = check_output_dir(args.out)
    settings = _settings(args)
    res = monte_carlo(cfg, args.runs, settings, workers=args.workers, track=cfg.mode == "distributed", keep_tracks=args.tracks)
    if not res.ok_runs:
        raise UnobservableBiasError(f"all {args.runs} runs failed; first error: {res.runs[0].error}")
    rmse = res.bias_rmse()
    floor = res.sqrt_crlb()
    write_csv(out / "table.csv", ("sensor", "sqrt_crlb", "rmse"), zip(res.sensor_ids, floor, rmse))
    if cfg.mode == "distributed":
        u, c, f = res.rmse_uncorrected(), res.rmse_corrected(), res.noise_floor()
        write_csv(out / "rmse.csv", ("k", "rmse_uncorrected", "rmse_corrected", "sqrt_crlb_position"),
                  zip(range(len(u)), u, c, f))
    if args.tracks:
        rows = []
        for r in res.ok_runs:
            if not r.tracks:
                continue
            for t, hist in sorted(r.tracks["corrected"].items()):
                for k, st in zip(hist.steps, hist.states):
                    m, P = st.mean, st.covariance
                    rows.append((r.run, t, k, m[0], m[2], m[1], m[3], P[0, 0], P[2, 2]))
        write_csv(out / "tracks.csv", ("run", "target", "k", "x", "y", "vx", "vy", "p11", "p33"), rows)
    print(f"{len(res.ok_runs)}/{args.runs} runs ok, {res.seconds().mean():.2f} s per run")
    for s, fl, rm in zip(res.sensor_ids, floor, rmse):
        print(f"  sensor {s}: rmse {rm:.3e} rad ({np.degrees(rm):.3f} deg), sqrt-CRLB {fl:.3e} rad")
    return EXIT_OK


def cmd_scenario(args) -> int:
    cfg = canonical_scenario(BIAS_SETS[args.bias], n_sensors=args.sensors, n_targets=args.targets, K=args.steps)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    save_scenario(cfg, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bearing-reg", description="Bearing-only sensor offset-bias registration.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--mode", choices=("distributed", "centralized"), help="override the scenario mode")
        sp.add_argument("--out", default=out_default, help="output directory")

    def ga_flags(sp):
        sp.add_argument("--window", type=int, help="window length in steps (windowed estimation)")
        sp.add_argument("--generations", type=int, help="GA generation limit")

    sp = sub.add_parser("simulate", help="write truth and report CSVs")
    common(sp)
    sp.add_argument("--runs", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("register", help="estimate the bias vector for one run")
    common(sp)
    ga_flags(sp)
    sp.add_argument("--reports", help="register these reports instead of simulating")
    sp.add_argument("--run", type=int, default=0, help="Monte Carlo run index to simulate or read")
    sp.set_defaults(func=cmd_register)

    sp = sub.add_parser("crlb", help="sqrt-CRLB of the biases")
    common(sp)
    sp.set_defaults(func=cmd_crlb)

    sp = sub.add_parser("mc", help="Monte Carlo battery: bias table and RMSE curves")
    common(sp)
    ga_flags(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--scale", type=float, help="CRLB inflation scale for corrected tracking")
    sp.add_argument("--workers", type=int, help="process count (default: cores, capped by BEARING_REG_THREADS)")
    sp.add_argument("--tracks", action="store_true", help="also write corrected track histories")
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("scenario", help="write a canonical scenario JSON")
    sp.add_argument("--bias", choices=sorted(BIAS_SETS), default="test1")
    sp.add_argument("--sensors", type=int, choices=(2, 3, 4), default=4)
    sp.add_argument("--targets", type=int, default=4)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--mode", choices=("distributed", "centralized"))
    sp.add_argument("--out", required=True, help="JSON file to write")
    sp.set_defaults(func=cmd_scenario)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    for name in ("runs", "window", "generations"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name} must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except UnobservableBiasError as exc:
        print(f"error: unobservable bias: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BearingRegError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
