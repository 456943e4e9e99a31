"""Command line: ``run``, ``serve`` and ``estimate-toa``."""
import argparse
import logging
import sys
from pathlib import Path as FsPath

from .channel import ChannelModel, Path, apply_channel
from .estimator import SrsIndicationReport, encode_srs_indication, estimate_toa
from .harness import (
    DEFAULT_PORT,
    ScenarioError,
    emit_report,
    load_points,
    load_scenario,
    run_end_to_end,
    serve_determine_location,
)
from .harness.scenario import build_world
from .signal import SrsConfig, generate_srs_sequence, map_to_grid

log = logging.getLogger("ultdoa")


def _scenario(args):
    return load_scenario(args.scenario)


def cmd_run(args):
    cfg = _scenario(args)
    points = load_points(args.points, cfg.solver.fixed_z) if args.points else None
    if args.trace_dir:
        FsPath(args.trace_dir).mkdir(parents=True, exist_ok=True)
    report = run_end_to_end(cfg, points, seed=args.seed, workers=args.workers, trace_dir=args.trace_dir)
    emit_report(report, args.report, args.format)
    for row in report.rows:
        if not row.ok:
            log.warning("point %s failed: %s", row.label, row.failure)
    if args.report not in (None, "-"):
        log.info("rmse %.4f m, max %.4f m over %d points", report.rmse(), report.max_error(), len(report.rows))
    return 0 if all(r.ok for r in report.rows) else 3


def cmd_serve(args):
    cfg = _scenario(args)
    svc = serve_determine_location(cfg, (args.host, args.port))
    print(f"listening on {svc.url}", flush=True)
    try:
        svc.thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        svc.shutdown()
    return 0


def cmd_estimate_toa(args):
    if args.delay_ns is not None:
        cfg = load_scenario(args.scenario).srs if args.scenario else SrsConfig()
        seq = generate_srs_sequence(cfg, args.root)
        model = ChannelModel((Path(args.delay_ns * 1e-9),), noise_std=args.noise_std, seed=args.seed)
        rx = apply_channel(map_to_grid(seq, cfg), cfg, model)
        trp_id, rtoa_k = 0, args.rtoa_k
    else:
        if not args.scenario:
            raise SystemExit("estimate-toa needs --delay-ns or --scenario with --trp")
        scen = load_scenario(args.scenario)
        world = build_world(scen, seed=args.seed)
        gnb = next((g for g in world.gnbs if any(t.trp_id == args.trp for t in g.trps)), None)
        if gnb is None:
            raise SystemExit(f"TRP {args.trp} is not in the scenario")
        trp = next(t for t in gnb.trps if t.trp_id == args.trp)
        cfg = gnb.srs_ie.config
        rx, seq = gnb.phy(trp, gnb.srs_ie)
        trp_id, rtoa_k = trp.trp_id, scen.rtoa_k

    meas = estimate_toa(rx, seq, cfg, trp_id=trp_id, rtoa_k=rtoa_k)
    print("antenna,trp_id,toa_s,peak_index,ul_rtoa_index,k,rsrp_dbfs")
    for n, m in enumerate(meas):
        print(f"{n},{m.trp_id},{m.toa_s!r},{m.peak_index},{m.ul_rtoa_index},{m.rtoa_k},{m.rsrp_dbfs:.3f}")
    try:
        blob = encode_srs_indication(meas[:1]).to_bytes()
        print(f"srs_indication={blob.hex()}")
    except OverflowError as exc:
        log.warning("SRS.indication not encodable: %s", exc)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ultdoa", description="Uplink TDoA positioning simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="position the UE at every grid point and emit an error report")
    run.add_argument("--scenario", required=True)
    run.add_argument("--points", help="YAML or CSV file of labelled points (default: 4x4 grid A-P)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--report", default="-", help="output path, '-' for stdout")
    run.add_argument("--format", choices=("csv", "table"), default="csv")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--trace-dir", help="write one procedure trace file per point here")
    run.set_defaults(func=cmd_run)

    serve = sub.add_parser("serve", help="run the determine-location HTTP service")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--port", type=int, default=DEFAULT_PORT)
    serve.add_argument("--host", default="127.0.0.1")
    serve.set_defaults(func=cmd_serve)

    est = sub.add_parser("estimate-toa", help="run the ToA estimator for one TRP")
    est.add_argument("--scenario")
    src = est.add_mutually_exclusive_group(required=True)
    src.add_argument("--trp", type=int, help="TRP id from the scenario, UE at its truth position")
    src.add_argument("--delay-ns", type=float, help="single-path channel with this delay")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--root", type=int, default=1)
    est.add_argument("--rtoa-k", type=int, default=1)
    est.add_argument("--noise-std", type=float, default=0.0)
    est.set_defaults(func=cmd_estimate_toa)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
