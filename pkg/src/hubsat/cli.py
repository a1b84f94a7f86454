"""Command-line front end: analytic sweeps, simulation, and cross-validation.

Subcommands: solve, bounds, fluid, simulate, validate, metrics.  Every
command reads one JSON experiment config, writes CSV and/or JSON into the
output directory, and is byte-deterministic given (config, seed).  JSON
outputs embed the fully resolved configuration.  Figures are rendered only
when --plot is passed.

Exit codes: 0 success, 2 config error, 3 validation tolerance breach,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .bounds import queue_length_law, theorem_envelope, traffic_intensity
from .config import ConfigError, ExperimentConfig, load_config
from .distributions import (
    closeness_report,
    memoryless_deviation,
    scv,
    variance_exceeds_exponential,
)
from .fluid import FluidParams, hub_fluid, hub_fluid_mean
from .roots import CompoundSpec, satellite_root
from .simulator import compare_to_law, replicate, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TOLERANCE = 3
EXIT_NUMERIC = 4

Z_95 = 1.959963984540054


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row.get(col)) for col in header])
    return path


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _json_safe(obj):
    """Replace NaN/inf with None recursively (strict-JSON outputs)."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _outputs(cfg: ExperimentConfig, args) -> tuple[Path, tuple[str, ...]]:
    out_dir = Path(args.out) if args.out else Path(cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = (args.format,) if args.format else cfg.output.formats
    return out_dir, formats


def _emit(out_dir: Path, formats, name: str, header, rows, payload) -> None:
    if "csv" in formats:
        print(f"wrote {_write_csv(out_dir / f'{name}.csv', header, rows)}")
    if "json" in formats:
        print(f"wrote {_write_json(out_dir / f'{name}.json', _json_safe(payload))}")


@dataclass
class _HubModel:
    """Fluid hub occupancy: the bottleneck curve, or constantly 1 without one."""

    fp: FluidParams | None

    def qbar(self, t: float) -> float:
        return 1.0 if self.fp is None else float(hub_fluid(self.fp, t))

    def qbar_mean(self, t0: float, t1: float) -> float:
        return 1.0 if self.fp is None else hub_fluid_mean(self.fp, t0, t1)


def _hub_model(cfg: ExperimentConfig, lam=None, mu_vec=None) -> _HubModel:
    net = cfg.network
    lam = net.lam if lam is None else lam
    mu_vec = net.mu if mu_vec is None else mu_vec
    k = net.bottleneck
    if k is None:
        slow = [j for j in range(net.stations) if mu_vec[j] < lam * net.p[j]]
        if slow:
            raise ConfigError("network.bottleneck", f"stations {slow} are bottlenecks but none is declared")
        return _HubModel(fp=None)
    try:
        return _HubModel(fp=FluidParams(lam=lam, p_k=net.p[k], mu_k=mu_vec[k]))
    except ValueError as exc:
        raise ConfigError("network", str(exc)) from exc


def _resolve_epsilon(cfg: ExperimentConfig) -> float:
    source = cfg.bounds.epsilon_source
    if source == "measured":
        return memoryless_deviation(cfg.network.hub_service)
    return float(source)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(cfg: ExperimentConfig, args) -> int:
    net = cfg.network
    model = _hub_model(cfg)
    rows = []
    for t in cfg.times:
        q_bar = model.qbar(t)
        for j in net.non_bottleneck_stations():
            spec = CompoundSpec(
                base=net.hub_service, branch_prob=net.p[j], scale=q_bar, service_rate=net.mu[j]
            )
            res = satellite_root(spec, tol=cfg.solver.tol)
            rows.append({
                "t": t,
                "station": j,
                "q_bar": q_bar,
                "rho": traffic_intensity(net.lam, net.p[j], net.mu[j], q_bar),
                "phi": res.root,
                "iterations": res.iterations,
                "residual": res.residual,
                "degenerate": res.degenerate,
            })
    header = ["t", "station", "q_bar", "rho", "phi", "iterations", "residual", "degenerate"]
    out_dir, formats = _outputs(cfg, args)
    payload = {"command": "solve", "version": __version__, "config": cfg.resolved(), "rows": rows}
    _emit(out_dir, formats, "solve", header, rows, payload)
    return EXIT_OK


def cmd_bounds(cfg: ExperimentConfig, args) -> int:
    net = cfg.network
    model = _hub_model(cfg)
    epsilon = _resolve_epsilon(cfg)
    rows = []
    for t in cfg.times:
        q_bar = model.qbar(t)
        for j in net.non_bottleneck_stations():
            report = theorem_envelope(
                net.hub_service, net.p[j], net.mu[j], q_bar, epsilon,
                theorem=cfg.bounds.theorem, variant=cfg.bounds.variant,
            )
            spec = CompoundSpec(
                base=net.hub_service, branch_prob=net.p[j], scale=q_bar, service_rate=net.mu[j]
            )
            root = satellite_root(spec, tol=cfg.solver.tol)
            rows.append({
                "t": t,
                "station": j,
                "q_bar": q_bar,
                "rho": report.rho,
                "ell": report.ell,
                "rolski_lo": report.rolski_lo,
                "rolski_hi": report.rolski_hi,
                "eps_lo": report.eps_lo,
                "eps_hi": report.eps_hi,
                "lower": report.lower,
                "upper": report.upper,
                "root": root.root,
                "epsilon": epsilon,
                "theorem": report.theorem,
                "f1_satisfied": report.f1_satisfied,
                "f2_satisfied": report.f2_satisfied,
                "degenerate": report.degenerate,
            })
    header = [
        "t", "station", "q_bar", "rho", "ell", "rolski_lo", "rolski_hi",
        "eps_lo", "eps_hi", "lower", "upper", "root", "epsilon", "theorem",
        "f1_satisfied", "f2_satisfied", "degenerate",
    ]
    out_dir, formats = _outputs(cfg, args)
    payload = {"command": "bounds", "version": __version__, "config": cfg.resolved(), "rows": rows}
    _emit(out_dir, formats, "bounds", header, rows, payload)
    if args.plot:
        from . import plots

        for j in net.non_bottleneck_stations():
            station_rows = [r for r in rows if r["station"] == j]
            path = plots.save_bounds_figure(out_dir / f"bounds_station{j}.png", j, station_rows)
            print(f"wrote {path}")
    return EXIT_OK


def cmd_fluid(cfg: ExperimentConfig, args) -> int:
    model = _hub_model(cfg)
    rows = [
        {"t": t, "q_bar": model.qbar(t), "q": 1.0 - model.qbar(t)}
        for t in cfg.times
    ]
    out_dir, formats = _outputs(cfg, args)
    payload = {"command": "fluid", "version": __version__, "config": cfg.resolved(), "rows": rows}
    _emit(out_dir, formats, "fluid", ["t", "q_bar", "q"], rows, payload)
    if args.plot:
        from . import plots

        t_hi = max(cfg.times)
        dense_t = [i * t_hi / 256.0 for i in range(257)]
        dense = (dense_t, [model.qbar(t) for t in dense_t],
                 [1.0 - model.qbar(t) for t in dense_t])
        path = plots.save_fluid_figure(
            out_dir / "fluid.png",
            [r["t"] for r in rows], [r["q_bar"] for r in rows], [r["q"] for r in rows],
            dense,
        )
        print(f"wrote {path}")
    return EXIT_OK


def cmd_metrics(cfg: ExperimentConfig, args) -> int:
    dist = cfg.network.hub_service
    report = closeness_report(dist)
    row = {
        "family": dist.family,
        "mean": dist.mean,
        "second_moment": dist.second_moment,
        "scv": scv(dist),
        "epsilon_hat": report.epsilon_hat,
        "kolmogorov_exp": report.kolmogorov_exp,
        "aging": report.aging.value,
        "variance_exceeds_exponential": variance_exceeds_exponential(dist),
        "grid_tol": report.grid_tol,
        "grid": report.grid,
    }
    out_dir, formats = _outputs(cfg, args)
    payload = {"command": "metrics", "version": __version__, "config": cfg.resolved(), "rows": [row]}
    _emit(out_dir, formats, "metrics", list(row.keys()), [row], payload)
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    net = cfg.network
    sim = cfg.sim
    est = replicate(
        net, sim.horizon, cfg.times, sim.base_seed, sim.replications,
        workers=sim.workers, offspring_window=sim.offspring_window,
    )
    out_dir, formats = _outputs(cfg, args)
    occupancy_rows = [
        {
            "t": t,
            "mean": float(est.hub_mean[i]),
            "halfwidth": None if est.hub_halfwidth is None else float(est.hub_halfwidth[i]),
        }
        for i, t in enumerate(est.sample_times)
    ]
    hist_rows = [
        {"station": j, "t": t, "count": c, "prob": p}
        for j in range(net.stations)
        for i, t in enumerate(est.sample_times)
        for c, p in sorted(est.queue_hist[j][i].items())
    ]
    if "csv" in formats:
        print(f"wrote {_write_csv(out_dir / 'hub_occupancy.csv', ['t', 'mean', 'halfwidth'], occupancy_rows)}")
        print(f"wrote {_write_csv(out_dir / 'queue_histograms.csv', ['station', 't', 'count', 'prob'], hist_rows)}")
    if "json" in formats:
        payload = {
            "command": "simulate",
            "version": __version__,
            "config": cfg.resolved(),
            "estimate": est.to_dict(),
        }
        print(f"wrote {_write_json(out_dir / 'simulate.json', _json_safe(payload))}")
    if args.event_log:
        trace = simulate(net, sim.horizon, cfg.times, est.seed_set[0], record_events=True)
        event_rows = [
            {
                "time": time,
                "event_type": kind,
                "station": station,
                "hub_count": hub,
                "queue_vector": " ".join(str(c) for c in queues),
            }
            for time, kind, station, hub, queues in trace.events
        ]
        print(f"wrote {_write_csv(out_dir / 'events.csv', ['time', 'event_type', 'station', 'hub_count', 'queue_vector'], event_rows)}")
    if args.plot:
        from . import plots

        model = _hub_model(cfg)
        reference = [model.qbar(t) for t in est.sample_times]
        path = plots.save_occupancy_figure(
            out_dir / "occupancy.png", est.sample_times, est.hub_mean, est.hub_halfwidth, reference
        )
        print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    net = cfg.network
    sim = cfg.sim
    val = cfg.validation
    lam_ref = val.reference_lam if val.reference_lam is not None else net.lam
    mu_ref = val.reference_mu if val.reference_mu is not None else net.mu
    model = _hub_model(cfg, lam=lam_ref, mu_vec=mu_ref)

    est = replicate(
        net, sim.horizon, cfg.times, sim.base_seed, sim.replications,
        workers=sim.workers, offspring_window=sim.offspring_window,
    )
    checks: list[dict] = []

    def add(check, station, t, value, tolerance, enforced, reference=None):
        passed = True if not enforced else (value is not None and value <= tolerance)
        checks.append({
            "check": check,
            "station": station,
            "t": t,
            "value": value,
            "reference": reference,
            "tolerance": tolerance if enforced else None,
            "passed": passed,
            "enforced": enforced,
        })

    # hub occupancy versus the fluid curve, per sample time
    reference = [model.qbar(t) for t in est.sample_times]
    for i, t in enumerate(est.sample_times):
        dev = abs(float(est.hub_mean[i]) - reference[i])
        add("fluid_deviation", None, t, dev, val.fluid_tol, val.fluid_tol is not None,
            reference=reference[i])

    # queue-length law per non-bottleneck station and time
    law_info = []
    for j in net.non_bottleneck_stations():
        for t in est.sample_times:
            q_bar = model.qbar(t)
            rho = traffic_intensity(lam_ref, net.p[j], mu_ref[j], q_bar)
            spec = CompoundSpec(
                base=net.hub_service, branch_prob=net.p[j], scale=q_bar, service_rate=mu_ref[j]
            )
            root = satellite_root(spec, tol=cfg.solver.tol)
            if root.degenerate or not 0.0 <= rho < 1.0 or not 0.0 < root.root < 1.0:
                continue
            law = queue_length_law(rho, root.root)
            tv, chi2 = compare_to_law(est, law, j, t)
            law_info.append({"station": j, "t": t, "rho": rho, "phi": root.root,
                             "tv": tv, "chi2": chi2})
            add("law_tv", j, t, tv, val.tv_tol, val.tv_tol is not None)
            add("law_chi2", j, t, chi2, None, False)

    # compensator residuals (the arrival count is exactly compensated by
    # lam p_j * integral of the hub count only for the memoryless hub law)
    exponential_hub = net.hub_service.family == "exponential"
    for j in range(net.stations):
        resid = (est.arrivals_final[:, j] - lam_ref * net.p[j] * est.hub_integral_final) / net.n
        mean = float(resid.mean())
        if est.replications >= 2:
            se = float(resid.std(ddof=1)) / math.sqrt(est.replications)
            enforced = val.compensator_sigma is not None and exponential_hub
            tol = None if val.compensator_sigma is None else val.compensator_sigma * se + 1e-9
            add("compensator_abs_mean", j, None, abs(mean), tol, enforced, reference=0.0)
        else:
            add("compensator_abs_mean", j, None, abs(mean), None, False, reference=0.0)

    # offspring mean versus the root at window-averaged occupancy
    window = est.offspring_window
    q_avg = model.qbar_mean(window[0], window[1])
    for j in net.non_bottleneck_stations():
        spec = CompoundSpec(
            base=net.hub_service, branch_prob=net.p[j], scale=q_avg, service_rate=mu_ref[j]
        )
        root = satellite_root(spec, tol=cfg.solver.tol)
        value = float(est.offspring_value[j])
        hw = float(est.offspring_halfwidth[j])
        if math.isnan(value) or root.degenerate:
            continue
        diff = abs(value - root.root)
        if not math.isnan(hw) and val.offspring_sigma is not None:
            tol = val.offspring_sigma * (hw / Z_95) + 1e-9
            add("offspring_vs_root", j, None, diff, tol, True, reference=root.root)
        else:
            add("offspring_vs_root", j, None, diff, None, False, reference=root.root)

    out_dir, formats = _outputs(cfg, args)
    header = ["check", "station", "t", "value", "reference", "tolerance", "passed", "enforced"]
    failures = [c for c in checks if c["enforced"] and not c["passed"]]
    payload = {
        "command": "validate",
        "version": __version__,
        "config": cfg.resolved(),
        "checks": checks,
        "law_info": law_info,
        "fluid_reference": reference,
        "hub_mean": [float(v) for v in est.hub_mean],
        "passed": not failures,
    }
    _emit(out_dir, formats, "validate", header, checks, payload)

    if args.plot:
        from . import plots

        path = plots.save_occupancy_figure(
            out_dir / "occupancy.png", est.sample_times, est.hub_mean, est.hub_halfwidth, reference
        )
        print(f"wrote {path}")
        t_last = est.sample_times[-1] if est.sample_times else None
        for j in net.non_bottleneck_stations():
            info = [r for r in law_info if r["station"] == j and r["t"] == t_last]
            if not info:
                continue
            law = queue_length_law(info[0]["rho"], info[0]["phi"])
            path = plots.save_histogram_figure(
                out_dir / f"histogram_station{j}.png", j, t_last,
                est.histogram(j, t_last), law,
            )
            print(f"wrote {path}")

    if failures:
        for c in failures:
            where = f" station={c['station']}" if c["station"] is not None else ""
            when = f" t={c['t']}" if c["t"] is not None else ""
            print(
                f"FAIL {c['check']}{where}{when}: value {c['value']:.6g} "
                f"exceeds tolerance {c['tolerance']:.6g}",
                file=sys.stderr,
            )
        return EXIT_TOLERANCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

COMMANDS = {
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "fluid": cmd_fluid,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "metrics": cmd_metrics,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hubsat",
        description="Bottleneck analysis of closed hub-and-satellite networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("solve", "solve the satellite fixed-point roots along the fluid curve"),
        ("bounds", "Rolski sandwich and continuity envelopes per station and time"),
        ("fluid", "dump the fluid hub/bottleneck curves"),
        ("simulate", "run replicated simulations and aggregate estimates"),
        ("validate", "simulate and compare against the analytic references"),
        ("metrics", "distribution closeness report for the hub service law"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory (overrides config)")
        sp.add_argument("--format", choices=["csv", "json"], default=None,
                        help="restrict output to one format")
        sp.add_argument("--seed", type=int, default=None, help="override sim.base_seed")
        sp.add_argument("--workers", type=int, default=None, help="override sim.workers")
        sp.add_argument("--plot", action="store_true", help="render figures next to the data")
        if name == "simulate":
            sp.add_argument("--event-log", action="store_true",
                            help="export the event log of the first replication")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("sim.base_seed", "seed must be nonnegative")
            cfg.sim.base_seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("sim.workers", "must be >= 1")
            cfg.sim.workers = args.workers
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
