"""Command line workbench.

Subcommands:
  curve        analytic herald-ratio curves (both directions) to CSV
  simulate     run the pair simulator: time-tag CSV, counts JSON, histogram
  fit          joint calibration fit on a sweep CSV: report + plot-data CSV
  g2           heralded HBT runs across a pump grid: g2 CSV + report
  accidentals  accidentals-versus-window scan and line fit
  sweep        simulate a pump sweep, write sweep CSV (and fit it)

Relative output paths land in the config output_dir when set, else in
$HERALDCAL_OUTDIR when that is set.  Flags override config values.
Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import dataclasses
import hashlib
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .coincidence import (
    accidental_scan,
    count_coincidences,
    delay_histogram,
    triple_counts,
)
from .config import (
    build_channel,
    build_coincidence,
    build_seed,
    build_source,
    config_hash,
    load_config,
)
from .errors import ConfigError, NumericalError
from .estimation import SweepPoint, accidental_line_fit, fit_sweep
from .fock import (
    conditional_click_prob,
    heralded_fidelity_from_g2,
    heralded_g2_analytic,
)
from .streams import SimSeed, SourceParams, simulate_hbt_streams, simulate_pair_streams


def _outpath(name, cfg=None):
    path = Path(name)
    if not path.is_absolute():
        base = (cfg or {}).get("output_dir") or os.environ.get("HERALDCAL_OUTDIR")
        if base:
            path = Path(base) / path
    hio.ensure_parent(path)
    return path


def _float_list(text, flag):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{flag}: expected a comma-separated number list") from None
    if not values:
        raise ConfigError(f"{flag}: empty list")
    return values


def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_curve(args):
    r = np.linspace(0.0, args.r_max, args.points)
    p21 = np.array([conditional_click_prob(args.eta1, args.eta2, ri) for ri in r])
    p12 = np.array([conditional_click_prob(args.eta2, args.eta1, ri) for ri in r])
    out = _outpath(args.out)
    hio.write_curve(
        out,
        ["r", "p_cond_21", "bias_21", "p_cond_12", "bias_12"],
        [r, p21, p21 - args.eta2, p12, p12 - args.eta1],
    )
    print(
        f"wrote {out} ({r.size} rows, bias at r_max = "
        f"{p21[-1] - args.eta2:.3e} / {p12[-1] - args.eta1:.3e})"
    )
    return 0


def cmd_simulate(args):
    cfg, digest = load_config(args.config)
    if args.workers is not None:
        cfg["run"]["n_workers"] = args.workers
    source = build_source(cfg)
    ch1 = build_channel(cfg, "ch1")
    ch2 = build_channel(cfg, "ch2")
    s1, s2 = simulate_pair_streams(
        source, ch1, ch2, build_seed(cfg), n_workers=cfg["run"]["n_workers"]
    )
    out = _outpath(args.out, cfg)
    hio.write_tags(out, [s1, s2])
    print(
        f"wrote {out} (config {digest[:12]}, "
        f"ch1 {len(s1)} tags at {s1.rate_hz():.1f}/s, ch2 {len(s2)} tags)"
    )
    ccfg = build_coincidence(cfg)
    counts = count_coincidences(s1, s2, ccfg)
    cpath = _outpath(args.counts_out, cfg)
    hio.write_counts(cpath, counts)
    print(
        f"wrote {cpath} (raw {counts.raw_coinc}, "
        f"accidentals {counts.accidentals}, effective {counts.effective_coinc})"
    )
    if args.hist_out:
        lags, hist = delay_histogram(s1, s2, ccfg.clock_period_s)
        hpath = _outpath(args.hist_out, cfg)
        hio.write_histogram(hpath, lags, hist)
        print(f"wrote {hpath} (peak lag = {lags[int(np.argmax(hist))]} cycles)")
    return 0


def cmd_fit(args):
    points = hio.read_sweep(args.sweep, window_cw_s=args.window, rel_delay_s=args.delay)
    fit = fit_sweep(points, mu=args.mu, k_init=args.k_init)
    out = _outpath(args.out)
    hio.write_report(out, fit, _file_hash(args.sweep), None)
    print(f"wrote {out}")
    ppath = _outpath(args.points_out)
    _write_fit_points(ppath, points, fit)
    print(f"wrote {ppath}")
    print(fit.summary())
    return 0


def _write_fit_points(path, points, fit):
    """Plot-data CSV: measured ratios, model overlay, per-point sigmas."""
    pts = sorted(points, key=lambda p: p.pump_dac)
    dac = np.array([p.pump_dac for p in pts])
    rat = [p.ratios() for p in pts]
    p21 = np.array([q[0][0] for q in rat])
    s21 = np.array([q[0][1] for q in rat])
    p12 = np.array([q[1][0] for q in rat])
    s12 = np.array([q[1][1] for q in rat])
    m21 = np.array([
        conditional_click_prob(fit.eta_tot_1, fit.eta_tot_2, r) for r in fit.r_values
    ])
    m12 = np.array([
        conditional_click_prob(fit.eta_tot_2, fit.eta_tot_1, r) for r in fit.r_values
    ])
    hio.write_curve(
        path,
        [
            "pump_dac", "r",
            "p21", "sigma_p21", "p21_model",
            "p12", "sigma_p12", "p12_model",
            "sigma_eta_1", "sigma_eta_2",
        ],
        [
            dac, fit.r_values,
            p21, s21, m21,
            p12, s12, m12,
            fit.per_point_sigma_1, fit.per_point_sigma_2,
        ],
    )


def cmd_g2(args):
    cfg, digest = load_config(args.config)
    dacs = _float_list(args.dac, "--dac") if args.dac else cfg["sweep"]["dac"]
    mu = args.mu if args.mu is not None else cfg["sweep"]["mu"]
    duration = cfg["sweep"]["duration_per_point_s"]
    split = cfg["run"]["split"]
    herald = build_channel(cfg, "ch1")
    ch2 = build_channel(cfg, "ch2")
    ch3 = build_channel(cfg, "ch3")
    ccfg = build_coincidence(cfg)
    base = cfg["run"]["seed"]
    rows = []
    for i, dac in enumerate(dacs):
        r = mu * math.sqrt(dac)
        source = SourceParams(
            r=r,
            mode_rate_hz=cfg["source"]["mode_rate_hz"],
            background_rate_per_arm=cfg["source"]["background_rate_per_arm_hz"],
            duration_s=duration,
        )
        point_seed = int(np.random.SeedSequence((base, i)).generate_state(1)[0])
        seed = SimSeed(point_seed, chunk_seconds=cfg["run"]["chunk_seconds"])
        s1, s2, s3 = simulate_hbt_streams(
            source, herald, split, ch2, ch3, seed,
            n_workers=cfg["run"]["n_workers"],
        )
        n1, n12, n13, n123 = triple_counts(s1, s2, s3, ccfg)
        if n12 == 0 or n13 == 0:
            raise NumericalError(
                f"no coincidences on one output arm at pump {dac} "
                f"(n12 = {n12}, n13 = {n13}); run longer or raise the pump"
            )
        g2 = n1 * n123 / (n12 * n13)
        if n123 > 0:
            sigma = g2 * math.sqrt(1.0 / n123 + 1.0 / n12 + 1.0 / n13)
        else:
            # no triples seen: quote the one-event scale instead of zero
            sigma = n1 / (n12 * n13)
        g2_model = heralded_g2_analytic(
            source.zeta, herald.eta_tot, split, ch2.eta_tot, ch3.eta_tot
        )
        rows.append({
            "pump_dac": dac,
            "r": r,
            "n1": n1,
            "n12": n12,
            "n13": n13,
            "n123": n123,
            "g2": g2,
            "sigma_g2": sigma,
            "g2_model": g2_model,
            "fidelity": heralded_fidelity_from_g2(g2),
            "fidelity_model": heralded_fidelity_from_g2(g2_model),
        })
        print(
            f"pump {dac:g}: g2 = {g2:.4f} +- {sigma:.4f} "
            f"(model {g2_model:.4f}), n123 = {n123} in {n1} heralds"
        )
    header = list(rows[0])
    out = _outpath(args.out, cfg)
    hio.write_curve(out, header, [[row[k] for row in rows] for k in header])
    print(f"wrote {out} ({len(rows)} pump points)")
    if args.report_out:
        rpath = _outpath(args.report_out, cfg)
        hio.write_json(rpath, {
            "config_hash": digest,
            "seed": base,
            "mu": mu,
            "points": rows,
        })
        print(f"wrote {rpath}")
    return 0


def cmd_accidentals(args):
    cfg, digest = load_config(args.config)
    cw_values = [v * 1e-9 for v in _float_list(args.cw_ns, "--cw-ns")]
    source = build_source(cfg)
    ch1 = build_channel(cfg, "ch1")
    ch2 = build_channel(cfg, "ch2")
    s1, s2 = simulate_pair_streams(
        source, ch1, ch2, build_seed(cfg), n_workers=cfg["run"]["n_workers"]
    )
    ccfg = build_coincidence(cfg)
    scan = accidental_scan(s1, s2, ccfg, cw_values)
    out = _outpath(args.out, cfg)
    hio.write_scan(out, scan)
    slope, delta_w, r2 = accidental_line_fit(scan, ccfg.pulse_width_w2_s)
    print(f"wrote {out} ({len(cw_values)} windows)")
    print(
        f"slope = {slope:.6g} counts/s of window, "
        f"delta_w = {delta_w * 1e9:.3f} ns, R^2 = {r2:.6f}"
    )
    if args.fit_out:
        fpath = _outpath(args.fit_out, cfg)
        hio.write_json(fpath, {
            "config_hash": digest,
            "seed": cfg["run"]["seed"],
            "slope_counts_per_s": slope,
            "delta_w_s": delta_w,
            "r_squared": r2,
        })
        print(f"wrote {fpath}")
    return 0


def cmd_sweep(args):
    cfg, digest = load_config(args.config)
    dac_values = _float_list(args.dac, "--dac") if args.dac else cfg["sweep"]["dac"]
    mu = args.mu if args.mu is not None else cfg["sweep"]["mu"]
    duration = cfg["sweep"]["duration_per_point_s"]
    if args.fit_out and len(dac_values) < 4:
        raise ConfigError("--dac: fitting needs at least 4 pump points")
    ch1 = build_channel(cfg, "ch1")
    ch2 = build_channel(cfg, "ch2")
    ccfg = build_coincidence(cfg)
    # gating on the other channel mirrors the sign of the relative delay
    ccfg_rev = dataclasses.replace(ccfg, rel_delay_s=-ccfg.rel_delay_s)
    base = cfg["run"]["seed"]
    points = []
    for i, dac in enumerate(dac_values):
        r = mu * math.sqrt(dac)
        source = SourceParams(
            r=r,
            mode_rate_hz=cfg["source"]["mode_rate_hz"],
            background_rate_per_arm=cfg["source"]["background_rate_per_arm_hz"],
            duration_s=duration,
        )
        # one independent substream per pump point
        point_seed = int(np.random.SeedSequence((base, i)).generate_state(1)[0])
        seed = SimSeed(point_seed, chunk_seconds=cfg["run"]["chunk_seconds"])
        s1, s2 = simulate_pair_streams(
            source, ch1, ch2, seed, n_workers=cfg["run"]["n_workers"]
        )
        points.append(SweepPoint(
            pump_dac=dac,
            duration_s=duration,
            counts_12=count_coincidences(s1, s2, ccfg),
            counts_21=count_coincidences(s2, s1, ccfg_rev),
        ))
    out = _outpath(args.out, cfg)
    hio.write_sweep(out, points)
    print(f"wrote {out} ({len(points)} pump points)")
    if args.fit_out:
        fit = fit_sweep(points, mu=mu)
        fpath = _outpath(args.fit_out, cfg)
        hio.write_report(fpath, fit, digest, base)
        print(f"wrote {fpath}")
        print(fit.summary())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="heraldcal",
        description="Heralded-pair detector calibration workbench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", help="analytic herald-ratio curves CSV")
    p.add_argument("--eta1", type=float, default=0.63)
    p.add_argument("--eta2", type=float, default=0.57)
    p.add_argument("--r-max", type=float, default=0.35)
    p.add_argument("--points", type=int, default=60)
    p.add_argument("--out", default="curve.csv")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("simulate", help="pair run to tag CSV and counts JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="tags.csv")
    p.add_argument("--counts-out", default="counts.json")
    p.add_argument("--hist-out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="joint calibration fit on a sweep CSV")
    p.add_argument("--sweep", required=True)
    p.add_argument("--mu", type=float, default=0.115)
    p.add_argument("--k-init", type=float, default=1.0)
    p.add_argument("--window", type=float, default=30e-9)
    p.add_argument("--delay", type=float, default=10e-9)
    p.add_argument("--out", default="report.json")
    p.add_argument("--points-out", default="fit_points.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("g2", help="heralded HBT runs across a pump grid")
    p.add_argument("--config", required=True)
    p.add_argument("--dac", default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--out", default="g2.csv")
    p.add_argument("--report-out", default="g2.json")
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("accidentals", help="accidentals vs window scan")
    p.add_argument("--config", required=True)
    p.add_argument("--cw-ns", default="25,35,45,55,65,75,85,95")
    p.add_argument("--out", default="scan.csv")
    p.add_argument("--fit-out", default=None)
    p.set_defaults(func=cmd_accidentals)

    p = sub.add_parser("sweep", help="simulate a pump sweep, optionally fit it")
    p.add_argument("--config", required=True)
    p.add_argument("--dac", default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--out", default="sweep.csv")
    p.add_argument("--fit-out", default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
