"""Command-line entry point: a thin client over the simulation service.

By default every subcommand runs against an in-process service instance,
so no server needs to be running; ``--server URL`` redirects the same
requests to a remote one.  Outputs are written atomically (temp file +
rename) and every file embeds the tool version and effective config hash.

Exit codes: 0 success, 1 domain error, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional

from . import __version__
from .client import ServiceClient
from .errors import ConfigError, DomainError, MetarelayError
from .schemas import (
    BeamRequest,
    BudgetGeometry,
    BudgetRequest,
    LutRequest,
    PatternRequest,
    ProtocolRequest,
    ScenarioRequest,
    SelftestRequest,
)

SUBCOMMANDS = ("pattern", "lut", "beam", "budget", "scenario", "protocol", "selftest", "serve")


def _read_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {p} must contain a JSON object")
    return doc


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_header(meta) -> list[str]:
    return [f"# tool_version={meta.tool_version}", f"# config_hash={meta.config_hash}"]


def _write_csv(path: Path, meta, columns: list[str], rows) -> None:
    lines = _csv_header(meta)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "-inf" if value < 0 else "inf"
        return f"{value:.10g}"
    return str(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metarelay",
        description="Tunable Huygens-metasurface mmWave relay simulator",
    )
    parser.add_argument("--version", action="version", version=f"metarelay {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file merged over defaults")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (default from config: 0)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, repeatable")
        p.add_argument("--server", default=None, help="remote service URL (default: in-process)")

    p = sub.add_parser("pattern", help="sweep the (u_m, u_e) control plane")
    common(p)
    p.add_argument("--freqs-ghz", type=float, nargs="*", default=None,
                   help="frequencies to sweep (default: center frequency)")

    p = sub.add_parser("lut", help="build the phase -> voltage lookup table")
    common(p)
    p.add_argument("--mode", choices=["lens", "mirror"], default="lens")
    p.add_argument("--phase-step", type=float, default=None, help="bin width in degrees")

    p = sub.add_parser("beam", help="synthesize a beam and its radiation pattern")
    common(p)
    p.add_argument("--mode", choices=["lens", "mirror"], default="lens")
    p.add_argument("--angle", type=float, default=0.0, help="single-beam steering angle (deg)")
    p.add_argument("--arms", type=str, default=None,
                   help="two-arm split 'angle1:weight1,angle2:weight2'")
    p.add_argument("--incident", type=float, default=0.0, help="incident angle (deg)")
    p.add_argument("--lut-file", default=None, help="reuse a lookup-table JSON file")

    p = sub.add_parser("budget", help="link-budget report for a tx/surface/rx placement")
    common(p)
    p.add_argument("--tx", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--rx", type=float, nargs=3, required=True, metavar=("X", "Y", "Z"))
    p.add_argument("--surface-origin", type=float, nargs=3, default=[0.0, 0.0, 0.0])
    p.add_argument("--surface-normal", type=float, nargs=3, default=[0.0, 1.0, 0.0])
    p.add_argument("--coefficient-magnitude", type=float, default=1.0)

    p = sub.add_parser("scenario", help="coverage map or blockage Monte-Carlo")
    common(p)
    p.add_argument("--operation", choices=["coverage", "blockage"], default="coverage")
    p.add_argument("--tx-index", type=int, default=0)
    p.add_argument("--no-surfaces", action="store_true")
    p.add_argument("--with-sheets", action="store_true")
    p.add_argument("--surface-count", type=int, default=None)
    p.add_argument("--betas", type=float, nargs="*", default=[0.0, 0.2, 0.4, 0.6, 0.8])
    p.add_argument("--trials", type=int, default=10_000)

    p = sub.add_parser("protocol", help="run a beam-alignment protocol simulation")
    common(p)
    p.add_argument("--variant", choices=["cold_start", "steady_state", "multiarm"],
                   default="cold_start")
    p.add_argument("--beams", type=int, default=8, help="codebook size per leg")
    p.add_argument("--span", type=float, default=120.0, help="codebook span (deg)")
    p.add_argument("--ground-truth", type=float, nargs=3, default=None,
                   metavar=("ENODEB", "SURFACE", "UE"))
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--no-trace", action="store_true")

    p = sub.add_parser("selftest", help="run the acceptance/invariant suite")
    common(p)
    p.add_argument("--only", nargs="*", default=None, help="run only the named checks")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _base_payload(args) -> dict:
    return {
        "config": _read_config_file(args.config),
        "overrides": list(args.overrides),
        "seed": args.seed,
    }


def _run_pattern(client: ServiceClient, args, out: Path) -> int:
    freqs = [f * 1e9 for f in args.freqs_ghz] if args.freqs_ghz else None
    resp = client.pattern(PatternRequest(**_base_payload(args), freqs_hz=freqs))
    rows = zip(resp.freq_hz, resp.u_m, resp.u_e, resp.t_mag, resp.t_phase_deg,
               resp.g_mag, resp.g_phase_deg)
    path = out / "pattern.csv"
    _write_csv(path, resp.meta,
               ["freq_hz", "u_m", "u_e", "t_mag", "t_phase_deg", "g_mag", "g_phase_deg"], rows)
    print(f"wrote {path}")
    return 0


def _run_lut(client: ServiceClient, args, out: Path) -> int:
    resp = client.lut(LutRequest(**_base_payload(args), mode=args.mode,
                                 phase_step_deg=args.phase_step))
    path = out / f"lut_{args.mode}.json"
    _write_json(path, resp.document)
    print(f"wrote {path} ({resp.flagged_bins} flagged bins, "
          f"min |coef| {resp.min_magnitude:.3f})")
    return 0


def _parse_arms(spec: str) -> list[tuple[float, float]]:
    arms = []
    for part in spec.split(","):
        angle, _, weight = part.partition(":")
        try:
            arms.append((float(angle), float(weight) if weight else 1.0))
        except ValueError as exc:
            raise ConfigError(f"bad arm spec {part!r}; expected angle[:weight]") from exc
    return arms


def _run_beam(client: ServiceClient, args, out: Path) -> int:
    arms = _parse_arms(args.arms) if args.arms else [(args.angle, 1.0)]
    lut_document = None
    if args.lut_file:
        lut_path = Path(args.lut_file)
        if not lut_path.exists():
            raise ConfigError(f"lookup-table file not found: {lut_path}")
        lut_document = json.loads(lut_path.read_text())
    resp = client.beam(BeamRequest(
        **_base_payload(args), mode=args.mode, arms=arms,
        incident_angle_deg=args.incident, lut_document=lut_document,
    ))
    csv_path = out / "beam_pattern.csv"
    _write_csv(csv_path, resp.meta, ["angle_deg", "power_db"],
               zip(resp.angles_deg, resp.power_db))
    summary_path = out / "beam_summary.json"
    _write_json(summary_path, {
        "tool_version": resp.meta.tool_version,
        "config_hash": resp.meta.config_hash,
        "mode": args.mode,
        "arms": arms,
        "incident_angle_deg": args.incident,
        "peaks": [{"angle_deg": a, "power_db": p} for a, p in resp.peaks],
        "per_column_phase_deg": resp.per_column_phase_deg,
        "u_m": resp.u_m,
        "u_e": resp.u_e,
        "coefficient_mag": resp.coefficient_mag,
        "amplitude_rms_error": resp.amplitude_rms_error,
    })
    print(f"wrote {csv_path} and {summary_path}")
    for angle, power in resp.peaks:
        print(f"peak: {angle:+.1f} deg at {power:.2f} dB")
    return 0


def _run_budget(client: ServiceClient, args, out: Path) -> int:
    resp = client.budget(BudgetRequest(
        **_base_payload(args),
        geometry=BudgetGeometry(
            tx=tuple(args.tx), rx=tuple(args.rx),
            surface_origin=tuple(args.surface_origin),
            surface_normal=tuple(args.surface_normal),
        ),
        coefficient_magnitude=args.coefficient_magnitude,
    ))
    doc = resp.model_dump(mode="json")
    meta = doc.pop("meta")
    json_path = out / "budget.json"
    _write_json(json_path, {**meta, **doc})
    csv_path = out / "budget.csv"
    _write_csv(csv_path, resp.meta, ["metric", "value"],
               [(k, v) for k, v in doc.items()])
    print(f"wrote {json_path} and {csv_path}")
    return 0


def _run_scenario(client: ServiceClient, args, out: Path) -> int:
    resp = client.scenario(ScenarioRequest(
        **_base_payload(args), operation=args.operation, tx_index=args.tx_index,
        with_surfaces=not args.no_surfaces, with_sheets=args.with_sheets,
        surface_count=args.surface_count, betas=args.betas, trials=args.trials,
    ))
    meta = {"tool_version": resp.meta.tool_version, "config_hash": resp.meta.config_hash,
            "seed": resp.meta.seed}
    if resp.operation == "coverage":
        csv_path = out / "coverage_map.csv"
        _write_csv(csv_path, resp.meta, ["x_m", "y_m", "snr_db", "tier", "path_kind"],
                   [(r.rx[0], r.rx[1], r.snr_db, r.tier, r.kind or "none")
                    for r in resp.coverage])
        summary = {
            **meta,
            "tx_index": args.tx_index,
            "records": [r.model_dump(mode="json") for r in resp.coverage],
        }
        json_path = out / "scenario_summary.json"
        _write_json(json_path, summary)
        print(f"wrote {csv_path} and {json_path}")
    else:
        rows = []
        for config_name, data in sorted(resp.blockage["configs"].items()):
            for beta, rate, lo, hi in zip(resp.blockage["betas"], data["failure_rate"],
                                          data["ci_low"], data["ci_high"]):
                rows.append((config_name, beta, rate, lo, hi))
        csv_path = out / "blockage.csv"
        _write_csv(csv_path, resp.meta,
                   ["surfaces", "beta", "failure_rate", "ci_low", "ci_high"], rows)
        json_path = out / "blockage.json"
        _write_json(json_path, {**meta, **resp.blockage})
        print(f"wrote {csv_path} and {json_path}")
    return 0


def _run_protocol(client: ServiceClient, args, out: Path) -> int:
    resp = client.protocol(ProtocolRequest(
        **_base_payload(args), variant=args.variant,
        n_enodeb=args.beams, n_surface=args.beams, n_ue=args.beams,
        span_deg=args.span,
        ground_truth=tuple(args.ground_truth) if args.ground_truth else None,
        refine=not args.no_refine, record_trace=not args.no_trace,
    ))
    doc = resp.model_dump(mode="json")
    meta = doc.pop("meta")
    path = out / "protocol_result.json"
    _write_json(path, {**meta, **doc})
    final = resp.refined or resp.coarse
    print(f"wrote {path}")
    print(f"{args.variant}: probes={final.probes_used} success={final.success} "
          f"angles=({final.enodeb_angle_deg:.2f}, {final.surface_angle_deg:.2f}, "
          f"{final.ue_angle_deg:.2f}) snr={final.achieved_snr_db:.2f} dB")
    return 0


def _run_selftest(client: ServiceClient, args, out: Path) -> int:
    resp = client.selftest(SelftestRequest(**_base_payload(args), only=args.only))
    for result in resp.results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.name}: {result.detail} ({result.duration_s:.2f}s)")
    path = out / "selftest.json"
    _write_json(path, {
        "tool_version": resp.meta.tool_version,
        "config_hash": resp.meta.config_hash,
        "all_passed": resp.all_passed,
        "results": [r.model_dump(mode="json") for r in resp.results],
    })
    print(f"wrote {path}")
    return 0 if resp.all_passed else 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    out = Path(args.out)
    runners = {
        "pattern": _run_pattern,
        "lut": _run_lut,
        "beam": _run_beam,
        "budget": _run_budget,
        "scenario": _run_scenario,
        "protocol": _run_protocol,
        "selftest": _run_selftest,
    }
    try:
        with ServiceClient(base_url=args.server) as client:
            return runners[args.command](client, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MetarelayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
