"""Command-line pipeline: solve2d -> lift -> pump -> certify / budget -> report.

Every stage reads and writes one output directory. Exit codes: 0 success or
all checks passed, 1 certification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import certify as cert
from .energy_density import energy_density_field
from .errors import CFLError, FormatError, InputError, SymbreakError
from .field_core import Grid, GridField, read_snapshot, snapshot_name, write_snapshot
from .lift3d import lift, replicate
from .profiles import DEFAULT_ETA, ebar_at, e0_at, kinetic_density
from .pump import PumpConfig, pump_initial, sweep, write_sweep
from .spectral2d import (
    energy,
    enstrophy,
    exact_triplet,
    load_initial_condition,
    max_admissible_dt,
    resolution_indicator,
    step,
)
from .subsolution import SubsolutionTriplet

log = logging.getLogger("symbreak")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    n: int = 64
    dt: float = 1e-3
    t_end: float = 1.0
    eta: float | None = None
    epsilon: float | None = None
    ic: str | None = None
    out: str = "run"
    stride: int = 10
    complete_conjugates: bool = False
    pump_n_osc: int | None = None
    pump_xi: tuple[int, int] = (1, 0)
    pump_t0: float = 0.1
    pump_sweep: tuple[int, ...] = (2, 4, 8, 16)
    tolerance: dict = field(default_factory=dict)

    def resolve(self) -> "RunConfig":
        if self.eta is None and self.epsilon is None:
            self.eta = DEFAULT_ETA
        if self.eta is None:
            self.eta = 0.5 * self.epsilon**2
        if self.epsilon is None:
            self.epsilon = math.sqrt(2 * (self.eta or DEFAULT_ETA))
        if self.pump_n_osc is None:
            self.pump_n_osc = max(1, self.n // 8)
        if self.eta < 0 or self.epsilon <= 0:
            raise UsageError("eta must be >= 0 and epsilon > 0")
        if self.dt <= 0 or self.t_end < 0 or self.stride < 1:
            raise UsageError("need dt > 0, t_end >= 0, stride >= 1")
        for name in self.tolerance:
            if name not in cert.CHECK_NAMES:
                raise UsageError(f"unknown check {name!r} in tolerance; known: {cert.CHECK_NAMES}")
        return self

    def tol(self, name: str) -> float:
        return float(self.tolerance.get(name, cert.DEFAULT_TOLERANCES[name]))

    def to_json(self) -> dict:
        d = asdict(self)
        d["pump_xi"] = list(self.pump_xi)
        d["pump_sweep"] = list(self.pump_sweep)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if value is None:
        return None
    typ = _FIELD_TYPES[key]
    if key in ("pump_xi", "pump_sweep"):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(int(v) for v in value)
    if key == "complete_conjugates":
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
    if "int" in typ:
        return int(value)
    if "float" in typ:
        return float(value)
    return str(value)


def parse_config_file(path) -> dict:
    """``key = value`` lines; ``tolerance.<check> = value`` for tolerances."""
    out: dict = {"tolerance": {}}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("tolerance."):
            out["tolerance"][key.split(".", 1)[1]] = float(value)
        elif key in _FIELD_TYPES and key != "tolerance":
            out[key] = value
        else:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
    return out


def build_config(args) -> RunConfig:
    layers = []
    out = args.out or "run"
    manifest = Path(out) / "run.json"
    if args.command != "solve2d" and manifest.exists():
        layers.append(json.loads(manifest.read_text())["config"])
    if args.config:
        layers.append(parse_config_file(args.config))
    flags = {
        "n": args.n, "dt": args.dt, "t_end": args.t_end, "eta": args.eta,
        "epsilon": args.epsilon, "ic": args.ic, "out": args.out, "stride": args.stride,
    }
    layers.append({k: v for k, v in flags.items() if v is not None})
    tol = {}
    for item in args.tolerance or []:
        name, _, value = item.partition("=")
        if not value:
            raise UsageError(f"--tolerance expects <check>=<value>, got {item!r}")
        tol[name.strip()] = float(value)
    layers.append({"tolerance": tol})
    cfg = RunConfig()
    for layer in layers:
        for key, value in layer.items():
            if key == "tolerance":
                cfg.tolerance.update(value or {})
            elif key in _FIELD_TYPES:
                setattr(cfg, key, _coerce(key, value))
    if args.command == "solve2d" and args.complete_conjugates:
        cfg.complete_conjugates = True
    return cfg.resolve()


# --- helpers ---------------------------------------------------------------


class _JsonLines(logging.Formatter):
    def format(self, record):
        payload = {"level": record.levelname, "event": record.getMessage()}
        payload.update(getattr(record, "fields", {}))
        return json.dumps(payload)


def _setup_logging(out: Path) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "log.jsonl")
    handler.setFormatter(_JsonLines())
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def _event(msg, **fields):
    log.info(msg, extra={"fields": fields})


def _require(out: Path, names) -> None:
    missing = [str(out / n) for n in names if not (out / n).exists()]
    if missing:
        raise InputError("missing stage outputs:\n  " + "\n  ".join(missing))


def _manifest(out: Path) -> dict:
    _require(out, ["run.json"])
    return json.loads((out / "run.json").read_text())


def _load_triplet(out: Path, prefix: str, idx: int, suffix: str = "") -> SubsolutionTriplet:
    names = [snapshot_name(f"{p}{prefix}{suffix}", idx) for p in ("v", "u", "q")]
    _require(out, names)
    return SubsolutionTriplet(*(read_snapshot(out / nm) for nm in names))


def _write_triplet(out: Path, trip: SubsolutionTriplet, prefix: str, idx: int, suffix=""):
    for p, f in zip(("v", "u", "q"), (trip.v, trip.u, trip.q)):
        write_snapshot(f, out / snapshot_name(f"{p}{prefix}{suffix}", idx))


# --- stages ----------------------------------------------------------------


def cmd_solve2d(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if not cfg.ic:
        raise UsageError("solve2d needs an initial condition file (--ic)")
    grid = Grid(2, cfg.n)
    state, trunc = load_initial_condition(cfg.ic, grid, cfg.complete_conjugates)
    limit = max_admissible_dt(state)
    if cfg.dt > limit:
        raise CFLError(cfg.dt, limit)
    n_steps = round(cfg.t_end / cfg.dt)
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise UsageError(f"t_end={cfg.t_end} is not a multiple of dt={cfg.dt}")
    record_steps = sorted(set(range(0, n_steps + 1, cfg.stride)) | {n_steps})
    _event("solve2d.start", n=cfg.n, dt=cfg.dt, steps=n_steps, truncation_l2=trunc)

    snapshots = []
    with open(out / "energy.jsonl", "w") as elog:
        for k in range(n_steps + 2):
            elog.write(json.dumps({"t": state.time, "E2": energy(state),
                                   "enstrophy": enstrophy(state)}) + "\n")
            if k in record_steps:
                idx = len(snapshots)
                _write_triplet(out, exact_triplet(state), "", idx)
                snapshots.append({"index": idx, "step": k, "t": state.time})
                _event("solve2d.snapshot", index=idx, t=state.time,
                       resolution=resolution_indicator(state))
            if k - 1 in record_steps:
                _write_triplet(out, exact_triplet(state), "", record_steps.index(k - 1), "next")
            if k == n_steps + 1:
                break
            state = step(state, cfg.dt)
    manifest = {"config": cfg.to_json(), "snapshots": snapshots, "truncation_l2": trunc}
    (out / "run.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"solve2d: {len(snapshots)} snapshots, N={cfg.n}, dt={cfg.dt:g}, "
          f"t_end={cfg.t_end:g}, IC truncation L2={trunc:.3e}")
    return EXIT_OK


def cmd_lift(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    snaps = _manifest(out)["snapshots"]
    for s in snaps:
        idx, t = s["index"], s["t"]
        for suffix in ("", "next"):
            trip = _load_triplet(out, "", idx, suffix)
            e2 = energy_density_field(trip.v, trip.u)
            _write_triplet(out, lift(trip, e2), "bar", idx, suffix)
        base = _load_triplet(out, "", idx)
        e0 = e0_at(t, kinetic_density(base.v), cfg.eta)
        write_snapshot(e0, out / snapshot_name("e0", idx))
        write_snapshot(ebar_at(t, e0, cfg.eta), out / snapshot_name("ebar", idx))
    (out / "lift.json").write_text(json.dumps({"eta": cfg.eta, "count": len(snaps)}) + "\n")
    _event("lift.done", count=len(snaps), eta=cfg.eta)
    print(f"lift: {len(snaps)} snapshots lifted to the 3-torus, eta={cfg.eta:g}")
    return EXIT_OK


def cmd_pump(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    _manifest(out)
    _require(out, [snapshot_name("v", 0)])
    v0 = read_snapshot(out / snapshot_name("v", 0))
    e0 = e0_at(0.0, kinetic_density(v0), cfg.eta)
    pcfg = PumpConfig(cfg.pump_n_osc, tuple(cfg.pump_xi), cfg.eta, cfg.pump_t0)
    vp = pump_initial(v0, pcfg)
    write_snapshot(vp, out / snapshot_name("vprime0", 0))
    pad = np.concatenate([vp.data, np.zeros((1,) + vp.grid.shape)])
    write_snapshot(replicate(GridField(vp.grid, pad, 0.0)), out / snapshot_name("vinit", 0))
    records = sweep(v0, e0, cfg.pump_sweep, cfg.pump_xi, cfg.eta)
    skipped = sorted(set(cfg.pump_sweep) - {r["n_osc"] for r in records})
    if skipped:
        _event("pump.sweep_skipped", n_osc=skipped, reason="unresolved at this N")
    write_sweep(records, out / "pump_sweep.jsonl")
    (out / "pump.json").write_text(json.dumps({"eta": cfg.eta, "n_osc": cfg.pump_n_osc,
                                               "xi": list(cfg.pump_xi)}) + "\n")
    print(f"pump: n_osc={cfg.pump_n_osc}, amplitude={pcfg.amplitude:.6g}")
    for r in records:
        print(f"  n_osc={r['n_osc']:3d}  H-1 defect={r['defect_hm1']:.4e}  "
              f"L2 defect={r['defect_l2']:.4e}  mean={r['mean_defect']:.2e}")
    return EXIT_OK


def _stage_eta(out: Path, stage: str) -> float:
    _require(out, [f"{stage}.json"])
    return float(json.loads((out / f"{stage}.json").read_text())["eta"])


def _budget_record(cfg, out, snaps, eta) -> cert.CheckRecord:
    energies = {}
    for line in (out / "energy.jsonl").read_text().splitlines():
        rec = json.loads(line)
        energies[rec["t"]] = rec["E2"]
    e0s = [read_snapshot(out / snapshot_name("e0", s["index"])) for s in snaps]
    ebars = [read_snapshot(out / snapshot_name("ebar", s["index"])) for s in snaps]
    _require(out, [snapshot_name("vprime0", 0)])
    vp = read_snapshot(out / snapshot_name("vprime0", 0))
    return cert.check_energy_budget(ebars, e0s, energies, vp, eta, cfg.tol("energy_budget"))


def _check_eta(out: Path) -> float:
    eta_lift, eta_pump = _stage_eta(out, "lift"), _stage_eta(out, "pump")
    if eta_lift != eta_pump:
        raise UsageError(f"inconsistent eta: lift used {eta_lift}, pump used {eta_pump}")
    return eta_lift


def _worst(records, name) -> cert.CheckRecord:
    worst = min(records, key=lambda r: r.margin)
    ok = all(r.passed for r in records)
    return cert.CheckRecord(name, "pass" if ok else "fail", worst.margin, worst.tolerance,
                            worst.worst_t, worst.worst_x, {**worst.detail, "samples": len(records)})


def run_checks(cfg: RunConfig) -> list[cert.CheckRecord]:
    out = Path(cfg.out)
    man = _manifest(out)
    snaps = man["snapshots"]
    eta = _check_eta(out)
    dt = float(man["config"]["dt"])

    checks = []
    for dim, prefix in ((2, ""), (3, "bar")):
        name = f"linear_system_{dim}d"
        recs = [
            cert.check_linear_system(
                [_load_triplet(out, prefix, s["index"]), _load_triplet(out, prefix, s["index"], "next")],
                dt, cfg.tol(name), name)
            for s in snaps
        ]
        checks.append(_worst(recs, name))

    later = [s for s in snaps if s["t"] > 0]
    if later:
        recs = []
        for s in later:
            idx = s["index"]
            recs.append(cert.check_strict_subsolution(
                [_load_triplet(out, "", idx), _load_triplet(out, "bar", idx)],
                [read_snapshot(out / snapshot_name("e0", idx)),
                 read_snapshot(out / snapshot_name("ebar", idx))]))
        checks.append(_worst(recs, "strict_subsolution"))
    else:
        checks.append(cert.CheckRecord.skipped("strict_subsolution", "no snapshot with t > 0"))

    ebars = [read_snapshot(out / snapshot_name("ebar", s["index"])) for s in snaps]
    lifted = [read_snapshot(out / snapshot_name("vbar", s["index"])) for s in snaps]
    try:
        checks.append(cert.check_symmetry_breaking(ebars, cfg.tol("symmetry_breaking"), lifted))
    except InputError as exc:
        checks.append(cert.CheckRecord.skipped("symmetry_breaking", str(exc)))

    checks.append(_budget_record(cfg, out, snaps, eta))

    _require(out, [snapshot_name("vinit", 0)])
    vinit = read_snapshot(out / snapshot_name("vinit", 0))
    v0 = read_snapshot(out / snapshot_name("v", 0))
    checks.append(cert.check_initial_closeness(vinit, v0, cfg.epsilon, cfg.tol("initial_closeness")))
    return checks


def _summary(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        margin = "-" if c["margin"] is None else f"{c['margin']:+.3e}"
        lines.append(f"  {c['status'].upper():7s} {c['name']:20s} margin {margin}")
    return "\n".join(lines)


def cmd_certify(cfg: RunConfig, timestamp=None) -> int:
    out = Path(cfg.out)
    checks = run_checks(cfg)
    man = _manifest(out)
    report = cert.build_report(checks, cfg.n, float(man["config"]["dt"]), _check_eta(out),
                               cfg.epsilon, timestamp)
    cert.emit_report(report, out / "report.json")
    _event("certify.done", passed=report.all_passed)
    print("certify:\n" + _summary(report.to_dict()))
    return EXIT_OK if report.all_passed else EXIT_FAIL


def cmd_budget(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    snaps = _manifest(out)["snapshots"]
    rec = _budget_record(cfg, out, snaps, _stage_eta(out, "lift"))
    (out / "budget.json").write_text(json.dumps(rec.to_dict(), indent=2, allow_nan=False) + "\n")
    print(f"budget: {rec.status}")
    for link in rec.detail["links"]:
        print(f"  t={link['t']:.4f}  int 2ebar={link['int_2ebar']:.10f}  "
              f"slack to int 2e0(0)={link['overall_slack']:+.3e}")
    print(f"  int 2e0(0)={rec.detail['int_2e0_at_0']:.10f}  "
          f"int |v'(0)|^2={rec.detail['int_vprime0_sq']:.10f}")
    return EXIT_OK if rec.passed else EXIT_FAIL


def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    _require(out, ["report.json"])
    report = cert.load_report(out / "report.json")
    meta = report["meta"]
    print(f"report: N={meta['n']} dt={meta['dt']} eta={meta['eta']} epsilon={meta['epsilon']}")
    print(_summary(report))
    return EXIT_OK if all(c["status"] == "pass" for c in report["checks"]) else EXIT_FAIL


COMMANDS = {
    "solve2d": cmd_solve2d,
    "lift": cmd_lift,
    "certify": cmd_certify,
    "budget": cmd_budget,
    "pump": cmd_pump,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symbreak",
        description="Build and certify dissipative symmetry-breaking subsolution data.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--n", type=int, help="grid points per axis")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--t-end", type=float, dest="t_end", help="final time")
    common.add_argument("--eta", type=float, help="profile parameter (default epsilon^2/2)")
    common.add_argument("--epsilon", type=float, help="target L2 closeness of initial data")
    common.add_argument("--ic", help="initial vorticity modes file ('k1 k2 re im' lines)")
    common.add_argument("--out", help="output directory (default: run)")
    common.add_argument("--stride", type=int, help="steps between snapshots (default 10)")
    common.add_argument("--tolerance", action="append", metavar="CHECK=VALUE",
                        help="override a check tolerance; repeatable")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "solve2d":
            p.add_argument("--complete-conjugates", action="store_true",
                           help="fill in missing Hermitian partners of the IC modes")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handler = None
    try:
        cfg = build_config(args)
        handler = _setup_logging(Path(cfg.out))
        return COMMANDS[args.command](cfg)
    except (UsageError, CFLError, InputError, FormatError, SymbreakError, ValueError, OSError) as exc:
        print(f"symbreak {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if handler is not None:
            log.removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
