"""Command-line entry point: ``cvteleport {simulate,teleport,sweep,fidelity,selftest}``.

Exit codes: 0 success, 1 numerical failure, 2 malformed input, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .config import ConfigError, load_config, merge
from .exceptions import ContractViolation, CVTeleportError, InvariantViolation
from .fidelity import ChannelEvaluator, RSearch, error_metric, ideal_state
from .noise import commutator_matrix, integrated_noise
from .protocol import ProtocolConfig, averaging_identity, run_protocol
from .sweep import SCENARIOS, TARGETS, Axis, SweepSpec, emit_records, resolve_workers, run_sweep
from .targets import QuadraticTarget, gain_schedule_for_target
from .teleport import (FieldDrive, TeleportGains, coarse_grain, coarse_grained_response,
                       load_drive_table, run_teleportation, teleported_field_oracle,
                       write_trajectory)

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3


def _protocol_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--omega-dt", dest="omega1_dt", type=float, help="Omega_1 * Delta t")
    p.add_argument("--kappa", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--Z", type=float)
    p.add_argument("--omega1", type=float)
    p.add_argument("--omega2-ratio", dest="omega2_ratio", type=float)
    p.add_argument("--steps", type=int, help="override the slice count chosen by the phase cap")


def _interaction_args(p):
    _protocol_args(p)
    p.add_argument("--target", choices=TARGETS)
    p.add_argument("--R", type=float, help="two-mode squeezing of the Jamiolkowski probe")
    p.add_argument("--r", type=float, help="light squeezing (default: optimise)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvteleport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the interaction protocol once and summarise the map")
    _interaction_args(p)
    p.add_argument("--out", help="JSON file for S, the noise covariance and the summary")

    p = sub.add_parser("fidelity", help="fidelity as a function of light squeezing r")
    _interaction_args(p)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--r-points", type=int, default=41)
    p.add_argument("--out", help="CSV file for the (r, F) curve (default: stdout)")

    p = sub.add_parser("teleport", help="teleport a transverse drive from ensemble II to ensemble I")
    _protocol_args(p)
    p.add_argument("--drive", help="two-column (t, value) table; default constant 1/T")
    p.add_argument("--quadrature", choices=("x", "p"), default="p",
                   help="field component the table drives (alpha_x or alpha_p)")
    p.add_argument("--frame", choices=("rotating", "lab"), default="rotating")
    p.add_argument("--gx", dest="gx_bar", type=float)
    p.add_argument("--gp", dest="gp_bar", type=float)
    p.add_argument("--stride", type=int, default=100, help="write every n-th coarse-grained sample")
    p.add_argument("--out", help="CSV trajectory file")

    p = sub.add_parser("sweep", help="grid sweep with CSV/JSON output")
    _interaction_args(p)
    p.add_argument("--axis", action="append", default=[], metavar="NAME=MIN:MAX:POINTS[:SCALE]")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--json", help="optional JSON mirror")
    p.add_argument("--workers", type=int, help="worker processes (default: $CVTELEPORT_WORKERS or 1)")
    p.add_argument("--runtime", action="store_true", help="append a wall-time column")

    sub.add_parser("selftest", help="quick internal consistency checks")
    return parser


def _settings(args) -> dict:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    skip = {"command", "config", "axis", "runtime", "stride", "quadrature", "frame", "r_max", "r_points"}
    return merge(file_values, {k: v for k, v in vars(args).items() if k not in skip})


def _config(s: dict, mode: str = "interaction") -> ProtocolConfig:
    kw = {k: s[k] for k in ("kappa", "g", "Z", "steps") if k in s}
    if "omega2" in s:
        kw["omega2"] = s["omega2"]
    ratio = 1.0 if mode == "teleport" else s.get("omega2_ratio", 2.0)
    if "R" in s:
        kw["jam_R"] = s["R"]
    elif "expR" in s:
        kw["jam_R"] = math.log(s["expR"])
    return ProtocolConfig.from_omega_dt(s.get("omega1_dt", 500.0), omega1=s.get("omega1", 1.0),
                                        omega2_ratio=ratio, mode=mode, **kw)


def _evaluator(s: dict):
    cfg = _config(s)
    target = QuadraticTarget.from_config(cfg, passive=s.get("target", "active") == "passive")
    result = run_protocol(cfg, gain_schedule_for_target(target, cfg))
    S_ideal = target.ideal_map(cfg.window_time)
    return cfg, result, ChannelEvaluator(result.S, integrated_noise(result), S_ideal, cfg)


def cmd_simulate(args) -> int:
    s = _settings(args)
    cfg, result, ev = _evaluator(s)
    rep = ev.report(s["r"], cfg.jam_R) if "r" in s else ev.optimize(cfg.jam_R)
    summary = {
        "steps": cfg.steps, "epsilon": cfg.epsilon,
        "map_error": float(np.linalg.norm(result.S - ev.S_ideal)),
        "deviation": ev.noise.deviation, "R": cfg.jam_R, "r": rep.r_used, "F": rep.F,
    }
    for k, v in summary.items():
        print(f"{k:>10s}  {v}")
    if s.get("out"):
        with open(s["out"], "w") as fh:
            json.dump({"config": cfg.as_dict(), "summary": summary, "S": result.S.tolist(),
                       "S_ideal": ev.S_ideal.tolist(),
                       "noise_covariance": ev.noise.covariance(rep.r_used).tolist()}, fh, indent=1)
    return EXIT_OK


def cmd_fidelity(args) -> int:
    s = _settings(args)
    cfg, _, ev = _evaluator(s)
    rs = np.linspace(0.0, args.r_max, args.r_points)
    lines = ["r,F"] + [f"{r:.16e},{ev.fidelity(r, cfg.jam_R):.16e}" for r in rs]
    if s.get("out"):
        with open(s["out"], "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    best = ev.optimize(cfg.jam_R, RSearch(r_max=args.r_max))
    print(f"# r_opt = {best.r_used:.6f}  F = {best.F:.10f}", file=sys.stderr)
    return EXIT_OK


def cmd_teleport(args) -> int:
    s = _settings(args)
    cfg = _config(s, mode="teleport")
    gx = s.get("gx_bar", 0.02)
    gains = TeleportGains(gx, s.get("gp_bar", -gx), cfg.omega1)
    if s.get("drive"):
        t, v = load_drive_table(s["drive"])
        drive = FieldDrive.from_table(t, v, args.quadrature, args.frame)
    else:
        amp = 1.0 / cfg.total_time
        const = lambda t: np.full(np.shape(t), amp)  # noqa: E731
        drive = FieldDrive(**{f"alpha_{args.quadrature}": const}, frame=args.frame)
    res = run_teleportation(cfg, gains, drive, with_map=False)
    period = 2 * np.pi / cfg.omega1
    tc, bob = coarse_grain(res.times, res.bob, period)
    _, lead = coarse_grain(res.times, teleported_field_oracle(res.times, drive, cfg, gains), period)
    _, full = coarse_grain(res.times, coarse_grained_response(res.times, drive, cfg, gains), period)

    def rel(ref):
        scale = np.max(np.abs(ref))
        return float(np.max(np.abs(bob - ref)) / scale) if scale > 0 else float("nan")

    print(f"epsilon                 {cfg.epsilon}")
    print(f"rel. error (leading)    {rel(lead)}")
    print(f"rel. error (averaged)   {rel(full)}")
    if s.get("out"):
        k = slice(None, None, max(1, args.stride))
        write_trajectory(s["out"], {
            "t": tc[k], "x_bob": bob[k, 0], "p_bob": bob[k, 1],
            "x_leading": lead[k, 0], "p_leading": lead[k, 1],
            "x_averaged": full[k, 0], "p_averaged": full[k, 1],
        })
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = _settings(args)
    if not args.axis:
        raise ConfigError("sweep needs at least one --axis")
    if not s.get("out"):
        raise ConfigError("sweep needs --out (or 'out' in the config file)")
    base = {k: s[k] for k in ("kappa", "g", "Z", "omega1", "omega2", "omega2_ratio",
                              "omega1_dt", "R", "expR", "r") if k in s}
    spec = SweepSpec(
        axes=tuple(Axis.parse(a) for a in args.axis),
        scenario=s.get("scenario", "fidelity"), target=s.get("target", "active"),
        base=base, workers=resolve_workers(s.get("workers")),
    )
    records = run_sweep(spec)
    emit_records(records, s["out"], s.get("json"), with_runtime=args.runtime)
    print(f"wrote {len(records)} records to {s['out']}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from scipy.integrate import quad

    checks = []
    om1, om2, t0, dt = 1.3, 2.9, 0.4, 37.0
    for pair in (("sin", "sin"), ("sin", "cos"), ("cos", "sin"), ("cos", "cos")):
        f = {"sin": np.sin, "cos": np.cos}
        num = quad(lambda t: f[pair[0]](om1 * t) * f[pair[1]](om2 * t), t0, t0 + dt, limit=400)[0] / dt
        checks.append((f"averaging identity {pair}", abs(num - averaging_identity(pair, om1, om2, t0, dt)) < 1e-10))

    cfg = ProtocolConfig.from_omega_dt(50.0)
    target = QuadraticTarget.from_config(cfg)
    res = run_protocol(cfg, gain_schedule_for_target(target, cfg))
    J = np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], float)
    total = res.S @ J @ res.S.T + commutator_matrix(res.T_noise)
    checks.append(("commutators preserved", np.allclose(total, J, atol=1e-10)))
    Si = target.ideal_map(cfg.window_time)
    checks.append(("ideal map symplectic", np.allclose(Si @ J @ Si.T, J, atol=1e-10)))
    G = ideal_state(Si, 2.0).gamma_J
    checks.append(("E(ideal, ideal) = 0", abs(error_metric(G, G)) < 1e-10))

    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_NUMERIC


COMMANDS = {"simulate": cmd_simulate, "fidelity": cmd_fidelity, "teleport": cmd_teleport,
            "sweep": cmd_sweep, "selftest": cmd_selftest}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ConfigError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CVTeleportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
