"""Command-line front end.

    seqgini pilot-size --alpha 0.05 --omega 0.015 --delta 2 --strata 0.5,0.5
    seqgini run-seq --dist lognormal:2.185,0.562 --seed 3
    seqgini run-seq --frame data/frame.csv --households data/households.csv --alpha 0.1 --omega 0.02 --delta 1
    seqgini simulate --procedure sequential --dist gamma:2.649,0.84 --reps 10 --seed 7 --out out/sim.csv --format delimited
    seqgini fixed-n --n 750,1500 --reps 200
    seqgini estimate --frame data/frame.csv --households data/households.csv
    seqgini compare-designs --dist gamma:2.649,0.84 --reps 50

Exit status: 0 on success, 2 for usage or configuration errors, 1 when the
run itself fails.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import plotting, report
from .config import FORMATS, build_config, parse_counts, parse_floats, read_config_file
from .design import FrameSource, IncomeLaw, compute_weights, generate_pseudo_population
from .errors import FrameError, ParameterError, SeqGiniError
from .estimators import (estimate as estimate_sample, fixed_n_experiment, lorenz_curve,
                         split_clusters)
from .montecarlo import (compare_designs, estimate_xi2, rep_seeds, run_replications,
                         stopping_config)
from .sequential import (PURELY_SEQUENTIAL, TWO_STAGE, StoppingConfig, pilot_sizes,
                         run_purely_sequential, run_two_stage)
from .survey import SurveyFiles, load_survey

ENGINE = {"sequential": PURELY_SEQUENTIAL, "two-stage": TWO_STAGE}


def _common(p):
    g = p.add_argument_group("run settings (override --config)")
    g.add_argument("--config", help="INI config file")
    g.add_argument("--alpha", type=float)
    g.add_argument("--omega", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--m-prime", dest="m_prime", type=int)
    g.add_argument("--k", type=int, help="households per sub-stratum")
    g.add_argument("--reps", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="worker processes (env SEQGINI_WORKERS)")
    g.add_argument("--dist", action="append", help="income law, e.g. gamma:2.649,0.84 (repeatable where noted)")
    g.add_argument("--strata", help="clusters per stratum, e.g. 750,750")
    g.add_argument("--household-range", dest="households", help="per sub-stratum household range, e.g. 50,150")
    g.add_argument("--q-aff", dest="q_aff", type=float)
    g.add_argument("--dispersion", type=float)
    g.add_argument("--frame", help="survey frame file")
    g.add_argument("--households", dest="households_file", help="survey households file")
    g.add_argument("--out", help="report path; figures are written beside it")
    g.add_argument("--format", choices=FORMATS)
    g.add_argument("--no-plots", action="store_true", help="skip figures when --out is given")


def build_parser():
    ap = argparse.ArgumentParser(prog="seqgini", description="Bounded-width Gini intervals under cluster sampling")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("pilot-size", help="pilot cluster counts")
    _common(p)

    for name, h in (("run-seq", "one purely sequential run"), ("run-two-stage", "one two-stage run")):
        p = sub.add_parser(name, help=h)
        _common(p)

    p = sub.add_parser("fixed-n", help="interval widths at fixed cluster counts")
    _common(p)
    p.add_argument("--n", default="750,1500", help="comma-separated cluster totals")
    p.add_argument("--threshold", type=float, help="width threshold (default omega)")

    p = sub.add_parser("simulate", help="Monte Carlo replications of one procedure")
    _common(p)
    p.add_argument("--procedure", choices=tuple(ENGINE))
    p.add_argument("--oracle-n", type=int, default=2000, help="clusters per xi^2 oracle draw")
    p.add_argument("--oracle-reps", type=int, default=50, help="frames in the xi^2 oracle")

    p = sub.add_parser("estimate", help="Gini and interval on the full survey sample")
    _common(p)

    p = sub.add_parser("compare-designs", help="sub-strata against plain SRS within clusters")
    _common(p)
    p.add_argument("--n-fixed", type=int, default=1200)
    p.add_argument("--oracle-n", type=int, default=2000)
    p.add_argument("--oracle-reps", type=int, default=50)
    return ap


_CONFIG_KEYS = ("alpha", "omega", "delta", "m_prime", "k", "reps", "seed", "workers", "strata",
                "households", "q_aff", "dispersion", "frame", "households_file", "out", "format")


def _config(args) -> tuple:
    file_values = read_config_file(args.config) if args.config else {}
    over = {k: getattr(args, k) for k in _CONFIG_KEYS}
    dists = args.dist or []
    if dists:
        over["dist"] = dists[0]
    if getattr(args, "procedure", None):
        over["procedure"] = args.procedure
    cfg = build_config(file_values, over)
    if not dists:
        dists = [cfg.dist]
    return cfg, dists


def _emit(cfg, columns, rows, suffix=""):
    text = report.render(columns, rows, cfg.format)
    sys.stdout.write(text)
    if cfg.out:
        path = Path(cfg.out)
        if suffix:
            path = path.with_name(path.stem + suffix + path.suffix)
        report.write_report(columns, rows, path, cfg.format)


def _figure_path(cfg, name):
    if not cfg.out:
        return None
    p = Path(cfg.out)
    return p.with_name(f"{p.stem}_{name}.png")


def _survey(cfg):
    return load_survey(SurveyFiles(cfg.frame, cfg.households_file), cfg.seed)


def _stopping(cfg, allocation, caps) -> StoppingConfig:
    return StoppingConfig(cfg.alpha, cfg.omega, cfg.delta, allocation, caps, cfg.m_prime, cfg.k)


# --------------------------------------------------------------------------
# commands

def cmd_pilot_size(cfg, dists, args):
    if cfg.uses_survey:
        _, src = _survey(cfg)
        allocation, caps = src.allocation, src.caps
    else:
        vals = parse_floats(cfg.strata, "strata")
        if any(v <= 0 for v in vals):
            raise ParameterError("--strata entries must be positive")
        allocation = tuple(v / sum(vals) for v in vals)
        # proportions carry no caps; integer counts double as caps
        counts = all(v == int(v) and v >= 2 for v in vals) and sum(vals) > len(vals)
        caps = tuple(int(v) for v in vals) if counts else tuple(10 ** 9 for _ in vals)
    pilot = pilot_sizes(cfg.alpha, cfg.omega, cfg.delta, allocation, caps)
    row = dict(alpha=cfg.alpha, omega=cfg.omega, delta=cfg.delta, m=pilot.m, m_s=pilot.m_s,
               realized=pilot.realized)
    _emit(cfg, report.PILOT_COLUMNS, [row])


def _single_run(cfg, dists, procedure, args):
    engine = run_purely_sequential if procedure == PURELY_SEQUENTIAL else run_two_stage
    if cfg.uses_survey:
        frame, src = _survey(cfg)
        config = _stopping(cfg, src.allocation, src.caps)
        label, H = str(Path(cfg.households_file).name), sum(src.caps)
    else:
        spec = cfg.population_spec()
        pop, sseed = rep_seeds(cfg.seed, 0, 0)
        frame = generate_pseudo_population(spec, pop)
        src = FrameSource(frame, spec.k, sseed)
        config = _stopping(cfg, spec.allocation, spec.strata_sizes)
        label, H = str(spec.law), spec.H
    out = engine(src, config, keep_sample=True)
    _emit(cfg, report.RUN_COLUMNS, [report.run_row(out, label, H)])
    if cfg.out and not args.no_plots:
        plotting.plot_trajectory(out, _figure_path(cfg, "trajectory"))
        p, phi = lorenz_curve(out.sample)
        plotting.plot_lorenz(p, phi, _figure_path(cfg, "lorenz"), out.g_hat)


def cmd_fixed_n(cfg, dists, args):
    ns = parse_counts(args.n, "--n")
    thr = args.threshold if args.threshold is not None else cfg.omega
    rows = []
    if cfg.uses_survey:
        frame, src = _survey(cfg)
        for n in ns:
            if n > sum(src.caps):
                raise ParameterError(f"n = {n} exceeds the {sum(src.caps)} surveyed clusters")
            n_s = split_clusters(n, src.allocation)
            draws = [d for s, m in enumerate(n_s) for d in src.order_draws(s, m)]
            est = estimate_sample(compute_weights(frame, draws), cfg.alpha)
            rows.append(dict(source=Path(cfg.households_file).name, n=n, reps=1, mean_width=est.width,
                             sd_width=0.0, threshold=thr, exceed_rate=float(est.width > thr),
                             mean_g_hat=est.g_hat))
    else:
        spec = cfg.population_spec()
        pop, _ = rep_seeds(cfg.seed, 0, 0)
        frame = generate_pseudo_population(spec, pop)
        for n in ns:
            res = fixed_n_experiment(frame, n, cfg.alpha, cfg.reps, cfg.seed, spec.k, (thr,))
            rows.append(dict(source=str(spec.law), n=n, reps=cfg.reps, mean_width=res.mean_width,
                             sd_width=res.sd_width, threshold=thr, exceed_rate=res.exceed(thr),
                             mean_g_hat=float(res.g_hats.mean())))
            if cfg.out and not args.no_plots:
                plotting.plot_fixed(res, thr, _figure_path(cfg, f"widths_n{n}"))
    _emit(cfg, report.FIXED_COLUMNS, rows)


def _spec_for(cfg, dist):
    return replace(cfg, dist=dist).population_spec()


def cmd_simulate(cfg, dists, args):
    if cfg.uses_survey:
        raise ParameterError("simulate works on synthetic populations; drop --frame/--households")
    if cfg.procedure not in ENGINE:
        raise ParameterError("simulate needs --procedure sequential or two-stage")
    rows = []
    for i, dist in enumerate(dists):
        spec = _spec_for(cfg, dist)
        config = stopping_config(spec, cfg.alpha, cfg.omega, cfg.delta, cfg.m_prime)
        oracle = estimate_xi2(spec, args.oracle_n, args.oracle_reps, cfg.seed, cfg.alpha, cfg.omega,
                              workers=cfg.workers)
        rep = run_replications(ENGINE[cfg.procedure], spec, config, cfg.reps, cfg.seed, cfg.workers, oracle)
        rows.append(report.mc_row(rep))
        if cfg.out and not args.no_plots:
            plotting.plot_replications(rep, _figure_path(cfg, f"{spec.law.family}_{i}"))
    _emit(cfg, report.MC_COLUMNS, rows)


def cmd_estimate(cfg, dists, args):
    if not cfg.uses_survey:
        raise ParameterError("estimate needs --frame and --households")
    frame, src = _survey(cfg)
    sample = compute_weights(frame, src.all_draws())
    est = estimate_sample(sample, cfg.alpha)
    row = dict(source=Path(cfg.households_file).name, n=est.n, households=len(sample), g_hat=est.g_hat,
               mu_hat=est.mu_hat, v2=est.v_n2, se=est.se, ci_low=est.ci_low, ci_high=est.ci_high,
               width=est.width)
    _emit(cfg, report.ESTIMATE_COLUMNS, [row])
    if cfg.out and not args.no_plots:
        p, phi = lorenz_curve(sample)
        plotting.plot_lorenz(p, phi, _figure_path(cfg, "lorenz"), est.g_hat)


def cmd_compare(cfg, dists, args):
    if cfg.uses_survey:
        raise ParameterError("compare-designs works on synthetic populations")
    rows, fixed_rows, comps = [], [], []
    for dist in dists:
        spec = _spec_for(cfg, dist)
        config = stopping_config(spec, cfg.alpha, cfg.omega, cfg.delta, cfg.m_prime)
        oracle = estimate_xi2(spec, args.oracle_n, args.oracle_reps, cfg.seed, cfg.alpha, cfg.omega,
                              workers=cfg.workers)
        comp = compare_designs(spec, args.n_fixed, cfg.reps, cfg.seed, config, cfg.workers, oracle)
        comps.append(comp)
        for pair in (comp.sequential, comp.two_stage):
            rows += [report.mc_row(r) for r in pair]
        f = comp.fixed
        fixed_rows.append(dict(law=comp.law, n_fixed=f.n_fixed, reps=len(f.v2_proposed),
                               mean_v2_proposed=f.mean_v2[0], mean_v2_comparator=f.mean_v2[1],
                               diff_se=f.diff_se, mean_g_proposed=f.mean_g[0],
                               mean_g_comparator=f.mean_g[1]))
    _emit(cfg, report.MC_COLUMNS, rows)
    sys.stdout.write("\n")
    _emit(cfg, report.FIXED_COMPARE_COLUMNS, fixed_rows, suffix="_fixed")
    if cfg.out and not args.no_plots:
        plotting.plot_comparison(comps, _figure_path(cfg, "designs"))


COMMANDS = {
    "pilot-size": cmd_pilot_size,
    "run-seq": lambda c, d, a: _single_run(c, d, PURELY_SEQUENTIAL, a),
    "run-two-stage": lambda c, d, a: _single_run(c, d, TWO_STAGE, a),
    "fixed-n": cmd_fixed_n,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "compare-designs": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg, dists = _config(args)
        for d in dists:
            IncomeLaw.parse(d)
        if not cfg.uses_survey and args.command != "pilot-size":
            for d in dists:
                _spec_for(cfg, d)
    except (ParameterError, FrameError) as exc:
        print(f"seqgini: error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg, dists, args)
    except ParameterError as exc:
        print(f"seqgini: error: {exc}", file=sys.stderr)
        return 2
    except (SeqGiniError, OSError) as exc:
        print(f"seqgini: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
