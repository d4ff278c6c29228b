"""Command-line entry point.

Subcommands: ``calibrate``, ``validate``, ``compare``, ``monitor``,
``whatif``, ``serve``.  A single structured configuration file drives each
run; ``--seed`` and ``--out`` override its scalars.  Exit codes: 0 success,
2 configuration problem, 3 data problem, 4 numerical problem.

Every report file carries the configuration hash and the bundle version so
that any number can be traced back to the exact calibration that produced
it.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import alm, api, comparison, monitor, proxy, transitions
from .config import RunConfig, load_config
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DomainError,
    FitError,
    NumericalError,
    SolvmonError,
)
from .monitor import CalibrationBundle, MarketDataStore, RecordStore
from .transitions import IndexHistory

#: Validation-table row order: the central proxy then the displayed stresses.
VALIDATION_ROWS = ("central", "ir", "stock_global", "stock_other", "spread", "illiquidity")


def _load_history(cfg: RunConfig) -> IndexHistory:
    if not cfg.history_file:
        raise ConfigError("configuration lacks 'history.file'")
    path = cfg.resolve(cfg.history_file)
    if not os.path.exists(path):
        raise DataError(f"history file not found: {path}")
    return IndexHistory.from_csv(path, frequency=cfg.history_frequency)


def _alm_response(
    cfg: RunConfig, liabs, assets, shock=None, defs=None, control_variates=False
) -> proxy.ResponseFn:
    defs = list(cfg.defs) if defs is None else defs

    def responses(eps: np.ndarray, p: int, seed: int) -> np.ndarray:
        return alm.batch_nav(
            liabs, assets, cfg.market, defs, eps, p, cfg.horizon, seed,
            assumptions=cfg.assumptions, shock=shock, control_variates=control_variates,
        )

    return responses


def _calibration_observations(cfg: RunConfig) -> dict:
    """Calibration-date indicator levels implied by the market state."""
    by_kind = {
        transitions.RiskFactorKind.STOCK_LEVEL: lambda m: float(m.stock_level),
        transitions.RiskFactorKind.RATE_LEVEL: lambda m: [float(v) for v in m.zero_curve],
        transitions.RiskFactorKind.SPREAD_SOVEREIGN: lambda m: float(m.sovereign_spread),
        transitions.RiskFactorKind.SPREAD_CORPORATE: lambda m: float(m.corporate_spread),
        transitions.RiskFactorKind.STOCK_VOL: lambda m: float(m.stock_vol),
        transitions.RiskFactorKind.ILLIQUIDITY: lambda m: float(m.illiquidity_premium),
    }
    return {d.id: by_kind[d.kind](cfg.market) for d in cfg.defs}


def _worst_directions(model: proxy.ProxyModel, space: transitions.ProbableSpace) -> list[str]:
    """Per factor, the box side with the lower central NAV under the proxy."""
    directions = []
    for jx in range(space.j):
        lo = np.zeros(space.j)
        hi = np.zeros(space.j)
        lo[jx], hi[jx] = space.lo[jx], space.hi[jx]
        directions.append("lo" if proxy.evaluate(model, lo) <= proxy.evaluate(model, hi) else "hi")
    return directions


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    liabs, assets = cfg.require_portfolio()
    if cfg.basis is None:
        raise ConfigError("configuration lacks 'capital_basis'")
    history = _load_history(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    started = time.time()

    space = transitions.calibrate_probable_space(
        history, cfg.defs, cfg.alpha, window=cfg.history_window
    )
    print(f"probable space calibrated from {len(history.dates)} observations")

    # initialization full calculation: the calibration-date reference point
    full_nav, full_se, _ = alm.nav_estimate(
        liabs, assets, cfg.market, cfg.defs, np.zeros(len(cfg.defs)),
        p=cfg.validation_p_full, seed=cfg.seed + 1_000_003, horizon=cfg.horizon,
        assumptions=cfg.assumptions, control_variates=cfg.control_variates,
    )
    print(f"full central NAV {full_nav:.2f} (se {full_se:.2f})")

    eps = transitions.sample_transitions(space, cfg.n_primary, seed=cfg.seed)
    date_str = cfg.calibration_date.isoformat()
    central = proxy.calibrate_lsmc(
        eps, _alm_response(cfg, liabs, assets, control_variates=cfg.control_variates),
        seed=cfg.seed, degree_cap=cfg.degree_cap, calibration_date=date_str,
    )
    print(f"central proxy: {len(central.monomials)} regressors")
    shocked = {}
    for sid, spec in sorted(cfg.shocks.items()):
        shocked[sid] = proxy.calibrate_lsmc(
            eps, _alm_response(cfg, liabs, assets, shock=spec,
                               control_variates=cfg.control_variates),
            seed=cfg.seed, degree_cap=cfg.degree_cap, shock_id=sid,
            calibration_date=date_str,
        )
        print(f"shocked proxy {sid}: {len(shocked[sid].monomials)} regressors")

    cf_models = {}
    if cfg.proxy_method == "cf" and not (cfg.cf_n_primary and cfg.cf_p_secondary):
        raise ConfigError("proxy.method 'cf' needs the proxy.cf budget block")
    if cfg.cf_n_primary and cfg.cf_p_secondary:
        eps_cf = transitions.sample_transitions(space, cfg.cf_n_primary, seed=cfg.seed + 17)
        cf_models["central"] = proxy.calibrate_cf(
            eps_cf, cfg.cf_p_secondary,
            _alm_response(cfg, liabs, assets, control_variates=cfg.control_variates),
            central.monomials, seed=cfg.seed, calibration_date=date_str,
        )
        for sid, spec in sorted(cfg.shocks.items()):
            cf_models[sid] = proxy.calibrate_cf(
                eps_cf, cfg.cf_p_secondary,
                _alm_response(cfg, liabs, assets, shock=spec,
                              control_variates=cfg.control_variates),
                shocked[sid].monomials, seed=cfg.seed, shock_id=sid,
                calibration_date=date_str,
            )
        print(f"curve-fitting companions at {cfg.cf_n_primary} x {cfg.cf_p_secondary}")

    directions = _worst_directions(central, space)
    oos = transitions.out_of_sample_path(space, directions, steps=cfg.validation_steps)

    def full_calc(shock_id: str | None) -> np.ndarray:
        spec = None if shock_id is None else cfg.shocks[shock_id]
        values = np.empty(oos.shape[0])
        for k in range(oos.shape[0]):
            values[k], _, _ = alm.nav_estimate(
                liabs, assets, cfg.market, cfg.defs, oos[k], p=cfg.validation_p_full,
                seed=cfg.seed + 2_000_003 + 31 * k, horizon=cfg.horizon,
                assumptions=cfg.assumptions, shock=spec,
                control_variates=cfg.control_variates,
            )
        return values

    def row_models(row: str) -> tuple[str | None, proxy.ProxyModel | None, proxy.ProxyModel | None]:
        if row == "central":
            return None, central, cf_models.get("central")
        sid = cfg.validation_ir_display if row == "ir" else row
        return sid, shocked.get(sid), cf_models.get(sid)

    validation_rows = []
    for row in VALIDATION_ROWS:
        sid, lsmc_model, cf_model = row_models(row)
        if lsmc_model is None:
            continue
        full_values = full_calc(sid)
        lsmc_report = proxy.validate(lsmc_model, oos, full_values)
        entry = {
            "row": row,
            "shock_id": sid,
            "full_values": full_values.tolist(),
            "lsmc_proxy_values": lsmc_report.proxy_values.tolist(),
            "lsmc_deviations": lsmc_report.deviations.tolist(),
        }
        if cf_model is not None:
            cf_report = proxy.validate(cf_model, oos, full_values)
            entry["cf_proxy_values"] = cf_report.proxy_values.tolist()
            entry["cf_deviations"] = cf_report.deviations.tolist()
        validation_rows.append(entry)
        worst = lsmc_report.worst_abs_deviation
        print(f"validation {row}: worst relative deviation {worst:.4%}")

    # the bundle carries the configured method's proxies; the many-transition
    # fit always runs first because it owns the regressor selection
    bundle_central = cf_models["central"] if cfg.proxy_method == "cf" else central
    bundle_shocked = (
        {sid: cf_models[sid] for sid in shocked} if cfg.proxy_method == "cf" else shocked
    )
    bundle = CalibrationBundle(
        defs=list(cfg.defs),
        space=space,
        central=bundle_central,
        shocked=bundle_shocked,
        basis=cfg.basis,
        frozen=dict(cfg.frozen),
        aggregation=cfg.aggregation,
        calibration_date=cfg.calibration_date,
        calibration_observations=_calibration_observations(cfg),
        config_hash=cfg.hash,
        attribution_order=list(cfg.attribution_order or [d.id for d in cfg.defs]),
        smoothing_window=cfg.smoothing_window,
        full_calc_nav_central=full_nav,
    )
    bundle_path = os.path.join(cfg.output_dir, "bundle.json")
    bundle.save(bundle_path)

    report = {
        "config_hash": cfg.hash,
        "bundle_version": bundle.version,
        "calibration_date": cfg.calibration_date.isoformat(),
        "seed": cfg.seed,
        "budgets": {
            "lsmc_n_primary": cfg.n_primary,
            "cf_n_primary": cfg.cf_n_primary,
            "cf_p_secondary": cfg.cf_p_secondary,
            "validation_p_full": cfg.validation_p_full,
        },
        "full_calc_nav_central": full_nav,
        "proxy_nav_central": proxy.evaluate(central, np.zeros(len(cfg.defs))),
        "calibration_sr": bundle.calibration_snapshot.sr,
        "worst_directions": dict(zip([d.id for d in cfg.defs], directions)),
        "scenarios": oos.tolist(),
        "rows": validation_rows,
        "elapsed_seconds": round(time.time() - started, 3),
    }
    _write_json(os.path.join(cfg.output_dir, "validation_report.json"), report)
    with open(os.path.join(cfg.output_dir, "validation_report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# config_hash", cfg.hash, "bundle_version", bundle.version])
        writer.writerow(["row", "method"] + [f"scenario_{k + 1}" for k in range(oos.shape[0])])
        for entry in validation_rows:
            writer.writerow([entry["row"], "lsmc"] + entry["lsmc_deviations"])
            if "cf_deviations" in entry:
                writer.writerow([entry["row"], "cf"] + entry["cf_deviations"])
    print(f"bundle {bundle.version} written to {bundle_path} "
          f"({report['elapsed_seconds']}s)")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    liabs, assets = cfg.require_portfolio()
    bundle = CalibrationBundle.load(args.bundle)
    os.makedirs(cfg.output_dir, exist_ok=True)
    directions = _worst_directions(bundle.central, bundle.space)
    oos = transitions.out_of_sample_path(bundle.space, directions, steps=cfg.validation_steps)
    rows = []
    for row in VALIDATION_ROWS:
        sid = None if row == "central" else (
            cfg.validation_ir_display if row == "ir" else row
        )
        model = bundle.central if sid is None else bundle.shocked.get(sid)
        if model is None:
            continue
        spec = None if sid is None else cfg.shocks[sid]
        full_values = np.empty(oos.shape[0])
        for k in range(oos.shape[0]):
            full_values[k], _, _ = alm.nav_estimate(
                liabs, assets, cfg.market, cfg.defs, oos[k], p=cfg.validation_p_full,
                seed=cfg.seed + 2_000_003 + 31 * k, horizon=cfg.horizon,
                assumptions=cfg.assumptions, shock=spec,
                control_variates=cfg.control_variates,
            )
        report = proxy.validate(model, oos, full_values)
        rows.append({
            "row": row, "shock_id": sid,
            "full_values": full_values.tolist(),
            "proxy_values": report.proxy_values.tolist(),
            "deviations": report.deviations.tolist(),
        })
        print(f"validation {row}: worst relative deviation {report.worst_abs_deviation:.4%}")
    _write_json(os.path.join(cfg.output_dir, "revalidation_report.json"), {
        "config_hash": cfg.hash,
        "bundle_version": bundle.version,
        "scenarios": oos.tolist(),
        "rows": rows,
    })
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    liabs, assets = cfg.require_portfolio()
    history = _load_history(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    space = transitions.calibrate_probable_space(
        history, cfg.defs, cfg.alpha, window=cfg.history_window
    )
    defs_by_id = {d.id: d for d in cfg.defs}

    def responses_for(active_ids):
        active_defs = [defs_by_id[f] for f in active_ids]
        return _alm_response(cfg, liabs, assets, defs=active_defs)

    report = comparison.run_comparison(
        space,
        cfg.compare_j_order,
        responses_for,
        n_cf=cfg.compare_n_cf,
        p_cf=cfg.compare_p_cf,
        seed=cfg.seed,
        alpha_ci=cfg.compare_alpha_ci,
        degree_cap=cfg.degree_cap,
        n_lsmc=cfg.compare_n_lsmc,
    )
    payload = {"config_hash": cfg.hash, **report.to_dict()}
    _write_json(os.path.join(cfg.output_dir, "comparison_report.json"), payload)
    with open(os.path.join(cfg.output_dir, "comparison_counts.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# config_hash", cfg.hash])
        writer.writerow([
            "factors", "regressors", "bp_statistic", "bp_p_value",
            "homo_lsmc_smaller", "homo_cf_smaller", "homo_ties",
            "white_lsmc_smaller", "white_cf_smaller", "white_ties", "total",
        ])
        for e in report.entries:
            writer.writerow([
                "+".join(e.factor_ids), e.regressor_count,
                f"{e.bp_statistic:.6g}", f"{e.bp_p_value:.6g}",
                e.homoskedastic.a_smaller, e.homoskedastic.b_smaller, e.homoskedastic.ties,
                e.heteroskedastic.a_smaller, e.heteroskedastic.b_smaller,
                e.heteroskedastic.ties, e.homoskedastic.total,
            ])
    for e in report.entries:
        print(
            f"J={len(e.factor_ids)} ({'+'.join(e.factor_ids)}): "
            f"{e.regressor_count} regressors, BP={e.bp_statistic:.1f} (p={e.bp_p_value:.2e}), "
            f"homo {e.homoskedastic.a_smaller}/{e.homoskedastic.b_smaller}, "
            f"white {e.heteroskedastic.a_smaller}/{e.heteroskedastic.b_smaller}"
        )
    return 0


def cmd_monitor(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    bundle = CalibrationBundle.load(args.bundle)
    history = IndexHistory.from_csv(
        args.history or cfg.resolve(cfg.history_file), frequency=cfg.history_frequency
    ) if (args.history or cfg.history_file) else None
    if history is None:
        raise ConfigError("monitoring needs a history file (--history or config history.file)")
    os.makedirs(cfg.output_dir, exist_ok=True)

    record_path = os.path.join(cfg.output_dir, f"records_{bundle.version}.jsonl")
    store = RecordStore(record_path, bundle.version)
    dates = [t for t in history.dates if t > bundle.calibration_date]
    existing = store.dates()
    produced = 0
    out_of_space_days = []
    for t in dates:
        if t.isoformat() in existing:
            continue
        record = monitor.evaluate_date(bundle, history, t)
        store.append(record)
        produced += 1
        if record.validity == "out_of_space":
            out_of_space_days.append(t.isoformat())

    all_dates, srs = store.sr_series()
    smoothed = monitor.smoothed_sr(srs, bundle.smoothing_window) if srs else np.array([])
    with open(os.path.join(cfg.output_dir, "sr_series.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["# config_hash", cfg.hash, "bundle_version", bundle.version])
        writer.writerow(["date", "sr", "smoothed_sr"])
        for date, sr, sm in zip(all_dates, srs, smoothed):
            writer.writerow([date, repr(sr), repr(float(sm))])

    latest = store.latest()
    diagram = {
        "bundle_version": bundle.version,
        "factors": [
            {
                "id": fid,
                "lo": float(bundle.space.lo[i]),
                "hi": float(bundle.space.hi[i]),
                "current": 0.0 if latest is None else latest["transition"][i],
                "out_of_space": False if latest is None else not (
                    bundle.space.lo[i] <= latest["transition"][i] <= bundle.space.hi[i]
                ),
            }
            for i, fid in enumerate(bundle.factor_ids)
        ],
    }
    _write_json(os.path.join(cfg.output_dir, "diagram.json"), diagram)
    _write_json(os.path.join(cfg.output_dir, "monitor_summary.json"), {
        "config_hash": cfg.hash,
        "bundle_version": bundle.version,
        "records_total": len(store),
        "records_new": produced,
        "out_of_space_days": out_of_space_days,
        "smoothing_window": bundle.smoothing_window,
    })
    print(f"{produced} new records ({len(store)} total), "
          f"{len(out_of_space_days)} out-of-space days")
    return 0


def cmd_whatif(args: argparse.Namespace) -> int:
    bundle = CalibrationBundle.load(args.bundle)
    try:
        factors = json.loads(args.factors)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--factors must be a JSON object: {exc}") from None
    if not isinstance(factors, dict):
        raise ConfigError("--factors must map factor ids to shifts")
    unknown = [f for f in factors if f not in bundle.factor_ids]
    if unknown:
        raise ConfigError(f"unknown factor ids {unknown}; expected {bundle.factor_ids}")
    eps = np.array([float(factors.get(fid, 0.0)) for fid in bundle.factor_ids])
    snapshot = monitor.whatif(bundle, eps)
    attribution = monitor.marginal_attribution(bundle, eps)
    print(json.dumps({
        "bundle_version": bundle.version,
        "transition": {fid: eps[i] for i, fid in enumerate(bundle.factor_ids)},
        "snapshot": snapshot.to_dict(),
        "attribution": attribution.to_dict(),
    }, sort_keys=True, indent=1))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    bundle = CalibrationBundle.load(args.bundle)
    data_dir = args.data_dir or "."
    os.makedirs(data_dir, exist_ok=True)
    server = api.build_server(
        bundle,
        market_store=MarketDataStore(os.path.join(data_dir, "market_data.jsonl")),
        record_store=RecordStore(
            os.path.join(data_dir, f"records_{bundle.version}.jsonl"), bundle.version
        ),
        host=args.host,
        port=args.port,
    )
    print(f"serving bundle {bundle.version} on http://{args.host}:{server.server_port}/")
    api.run(server)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="solvmon",
        description="Proxy-based continuous solvency monitoring",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, bundle=False):
        if config:
            p.add_argument("--config", required=True, help="run configuration JSON")
        if bundle:
            p.add_argument("--bundle", required=True, help="calibration bundle JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("calibrate", help="calibrate proxies and write a bundle")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="re-validate an existing bundle out of sample")
    common(p, bundle=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="equal-budget LSMC vs CF study")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("monitor", help="evaluate every post-calibration date")
    common(p, bundle=True)
    p.add_argument("--history", default=None, help="market history CSV (overrides config)")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("whatif", help="one-off snapshot for a hypothetical transition")
    p.add_argument("--bundle", required=True)
    p.add_argument("--factors", required=True, help='JSON map, e.g. {"stock": -0.2}')
    p.set_defaults(func=cmd_whatif)

    p = sub.add_parser("serve", help="serve the monitoring HTTP API")
    p.add_argument("--bundle", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8799)
    p.add_argument("--data-dir", default=None, help="directory for the embedded stores")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CalibrationError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (FitError, NumericalError, DomainError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except SolvmonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
