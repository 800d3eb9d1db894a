"""Sampled-data certification of the subsolution hypotheses and the energy chain.

Every check returns a :class:`CheckRecord` whose ``margin`` is a signed slack:
positive means the hypothesis holds with room to spare, negative quantifies
the violation. Strict inequalities are certified on grid points only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, Sequence

import numpy as np

from .energy_density import energy_density_field
from .errors import DimError, InputError, WriteError
from .field_core import GridField, l2_norm
from .lift3d import replicate
from .profiles import kinetic_density, total_energy
from .subsolution import SubsolutionTriplet, linear_system_residual

CHECK_NAMES = (
    "linear_system_2d",
    "linear_system_3d",
    "strict_subsolution",
    "symmetry_breaking",
    "energy_budget",
    "initial_closeness",
)

DEFAULT_TOLERANCES = {
    "linear_system_2d": 1e-5,
    "linear_system_3d": 1e-5,
    "strict_subsolution": 0.0,
    "symmetry_breaking": 1e-10,
    "energy_budget": 1e-10,
    "initial_closeness": 0.05,
}

ENERGY_RTOL = 1e-8


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class CheckRecord:
    name: str
    status: str
    margin: float | None = None
    tolerance: float | None = None
    worst_t: float | None = None
    worst_x: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "margin": _finite_or_none(self.margin),
            "tolerance": _finite_or_none(self.tolerance),
            "worst_t": _finite_or_none(self.worst_t),
            "worst_x": [float(x) for x in self.worst_x],
            "detail": _clean(self.detail),
        }

    @classmethod
    def skipped(cls, name: str, reason: str) -> "CheckRecord":
        return cls(name, "skipped", detail={"reason": reason})


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return _finite_or_none(obj)


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _coords(index, n):
    return [i / n for i in index]


# --- linear system ------------------------------------------------------------


def check_linear_system(
    snapshots: Sequence[SubsolutionTriplet],
    dt: float,
    tolerance: float = 1e-5,
    name: str = "linear_system",
) -> CheckRecord:
    """Residual of ``d_t v + div u + grad q = 0, div v = 0`` over snapshot pairs.

    Only consecutive snapshots spaced exactly ``dt`` apart are differenced, so
    a series interleaving stored states with their one-step successors works.
    """
    if len(snapshots) < 2:
        raise InputError("need at least two snapshots")
    grid = snapshots[0].grid
    if any(s.grid != grid for s in snapshots):
        raise InputError("snapshots live on different grids")
    worst = None
    pairs = 0
    for a, b in zip(snapshots, snapshots[1:]):
        if abs((b.time - a.time) - dt) > 1e-9 * max(1.0, dt):
            continue
        r = linear_system_residual(a, b, dt)
        pairs += 1
        if worst is None or r.total > worst.total:
            worst = r
    if worst is None:
        raise InputError(f"no consecutive snapshots are spaced dt={dt:g} apart")
    return CheckRecord(
        name,
        _status(worst.total <= tolerance),
        tolerance - worst.total,
        tolerance,
        worst.time,
        _coords(worst.worst_index, grid.n),
        {
            "residual": worst.total,
            "momentum": list(worst.momentum),
            "divergence": worst.divergence,
            "pairs": pairs,
        },
    )


# --- strict subsolution -------------------------------------------------------


def subsolution_margin(triplet: SubsolutionTriplet, profile: GridField) -> GridField:
    """``profile - e(v, u)`` pointwise."""
    if profile.grid != triplet.grid:
        raise DimError("profile and triplet grids differ")
    e = energy_density_field(triplet.v, triplet.u)
    return GridField(profile.grid, profile.data - e.data, triplet.time)


def check_strict_subsolution(
    triplets: Sequence[SubsolutionTriplet],
    profiles: Sequence[GridField],
    name: str = "strict_subsolution",
) -> CheckRecord:
    """``e(v, u) < profile`` at every sampled point; margin is the minimum gap."""
    if isinstance(triplets, SubsolutionTriplet):
        triplets, profiles = [triplets], [profiles]
    if len(triplets) != len(profiles) or not triplets:
        raise InputError("need matching, nonempty triplet and profile sequences")
    best = None
    per_dim: dict[str, float] = {}
    for trip, prof in zip(triplets, profiles):
        if abs(trip.time - prof.time) > 1e-12:
            raise InputError(f"triplet at t={trip.time} paired with profile at t={prof.time}")
        m = subsolution_margin(trip, prof).data[0]
        idx = np.unravel_index(np.argmin(m), m.shape)
        val = float(m[idx])
        key = f"min_margin_{trip.grid.dim}d"
        per_dim[key] = min(per_dim.get(key, math.inf), val)
        if best is None or val < best[0]:
            best = (val, trip.time, _coords(idx, trip.grid.n))
    margin, t, x = best
    return CheckRecord(name, _status(margin > 0), margin, 0.0, t, x, per_dim)


# --- symmetry -----------------------------------------------------------------


@dataclass(frozen=True)
class EiX3Result:
    deviation: float
    threshold: float
    verdict: bool


def x3_deviation(f: GridField) -> float:
    """``|| f - mean_{x3} f ||`` in L2 of the 3-torus."""
    if f.grid.dim != 3:
        raise DimError("ei-x3 test needs a field on the 3-torus")
    if np.all(f.data == f.data[..., :1]):
        return 0.0
    dev = f.data - f.data.mean(axis=-1, keepdims=True)
    return l2_norm(dev, 3)


def check_ei_x3(f: GridField, threshold: float = 1e-10) -> EiX3Result:
    dev = x3_deviation(f)
    return EiX3Result(dev, threshold, dev <= threshold)


def check_symmetry_breaking(
    ebar_fields: Sequence[GridField],
    threshold: float = 1e-10,
    lifted_fields: Sequence[GridField] = (),
    name: str = "symmetry_breaking",
) -> CheckRecord:
    """The profile is ei-x3 at ``t = 0`` and not ei-x3 at every sampled ``t > 0``.

    ``lifted_fields`` (the replicated triplet) must be ei-x3 at all times.
    """
    initial = [f for f in ebar_fields if f.time == 0]
    later = [f for f in ebar_fields if f.time > 0]
    missing = [lbl for lbl, fs in (("t=0", initial), ("t>0", later)) if not fs]
    if missing:
        raise InputError(f"symmetry check needs profiles at {', '.join(missing)}")
    # slack > 0 means the expected verdict holds
    flat = [(threshold - x3_deviation(f), f.time) for f in (*initial, *lifted_fields)]
    broken = [(x3_deviation(f) - threshold, f.time) for f in later]
    ok = all(s >= 0 for s, _ in flat) and all(s > 0 for s, _ in broken)
    margin, t = min(flat + broken, key=lambda s: s[0])
    return CheckRecord(
        name,
        _status(ok),
        margin,
        threshold,
        t,
        [],
        {
            "initial_deviation": max(x3_deviation(f) for f in initial),
            "lifted_deviation": max((x3_deviation(f) for f in lifted_fields), default=0.0),
            "min_later_deviation": min(s for s, _ in broken) + threshold,
        },
    )


# --- energy budget ------------------------------------------------------------


def _by_time(items):
    return {round(float(t), 12): val for t, val in items}


def check_energy_budget(
    ebar_fields: Sequence[GridField] | None,
    e0_fields: Sequence[GridField] | None,
    v_energies: Mapping[float, float] | Sequence[tuple[float, float]] | None,
    vprime0: GridField | None,
    eta: float,
    tolerance: float = 1e-10,
    energy_rtol: float = ENERGY_RTOL,
    name: str = "energy_budget",
) -> CheckRecord:
    """Evaluate each link of the dissipation chain separately.

    (a)  int 2 ebar(t)  <=  int 2 e0(t) + 2 eta t/(1+t)
    (b)  int 2 e0(t) + 2 eta t/(1+t)  ==  E2(t) + 2 eta
    (b') E2(t) == E2(0)                       (relative tolerance)
    (c)  int 2 e0(0)  ==  int |v'(0)|^2
    overall: int 2 ebar(t) <= int 2 e0(0) at every sampled t.
    ``E2`` is ``int |v|^2`` of the smooth 2D solution.
    """
    absent = []
    if not ebar_fields:
        absent.append("(a) needs ebar snapshots")
    if not e0_fields:
        absent.append("(a)/(b)/(c) need e0 snapshots")
    if not v_energies:
        absent.append("(b)/(b') need 2D energies")
    if vprime0 is None:
        absent.append("(c) needs the initial velocity v'(0)")
    if absent:
        raise InputError("missing budget inputs: " + "; ".join(absent))
    if isinstance(v_energies, Mapping):
        v_energies = list(v_energies.items())
    energies = _by_time(v_energies)
    e0_int = _by_time([(f.time, total_energy(f)) for f in e0_fields])
    if 0.0 not in e0_int or 0.0 not in energies:
        raise InputError("missing budget inputs: e0 and E2 at t=0")
    d0 = e0_int[0.0]
    e2_0 = energies[0.0]

    links = []
    ok = True
    worst = (math.inf, 0.0)
    for f in sorted(ebar_fields, key=lambda f: f.time):
        t = round(f.time, 12)
        if t not in e0_int or t not in energies:
            raise InputError(f"missing budget inputs: e0 or E2 at t={f.time}")
        a = total_energy(f)
        b = e0_int[t] + 2 * eta * t / (1 + t)
        c = energies[t] + 2 * eta
        slack = d0 - a
        rec = {
            "t": t,
            "int_2ebar": a,
            "a_slack": b - a,
            "a_expected_slack": eta * t / (1 + t),
            "b_defect": b - c,
            "b_prime_drift": (energies[t] - e2_0) / e2_0 if e2_0 else energies[t],
            "overall_slack": slack,
        }
        rec["a_pass"] = b - a >= -tolerance
        rec["b_pass"] = abs(b - c) <= tolerance
        rec["b_prime_pass"] = abs(energies[t] - e2_0) <= energy_rtol * max(e2_0, 1e-300)
        rec["overall_pass"] = slack >= -tolerance
        ok &= rec["a_pass"] and rec["b_pass"] and rec["b_prime_pass"] and rec["overall_pass"]
        links.append(rec)
        if slack < worst[0]:
            worst = (slack, f.time)

    vp_int = total_energy(kinetic_density(vprime0))
    c_defect = vp_int - d0
    c_pass = abs(c_defect) <= tolerance
    ok &= c_pass
    return CheckRecord(
        name,
        _status(ok),
        worst[0],
        tolerance,
        worst[1],
        [],
        {
            "int_2e0_at_0": d0,
            "int_vprime0_sq": vp_int,
            "c_mean_defect": 0.5 * c_defect,
            "c_pass": c_pass,
            "links": links,
        },
    )


# --- initial data -------------------------------------------------------------


def _as_3d_velocity(v: GridField) -> GridField:
    if v.grid.dim == 3:
        return v
    pad = np.concatenate([v.data, np.zeros((1,) + v.grid.shape)])
    return replicate(GridField(v.grid, pad, v.time))


def initial_distance(v_init: GridField, v0_target: GridField) -> float:
    a, b = _as_3d_velocity(v_init), _as_3d_velocity(v0_target)
    if a.grid != b.grid or a.ncomp != b.ncomp:
        raise DimError("initial data and target live on different grids")
    return l2_norm(a.data - b.data, 3)


def check_initial_closeness(
    v_init: GridField,
    v0_target: GridField,
    epsilon: float,
    slack: float = 0.05,
    name: str = "initial_closeness",
) -> CheckRecord:
    """``|| v(0) - (v0, 0) ||_{L2(T^3)} <= (1 + slack) epsilon``.

    2D inputs are lifted by replication first, so the distance equals the 2D one.
    """
    dist = initial_distance(v_init, v0_target)
    bound = (1 + slack) * epsilon
    return CheckRecord(
        name,
        _status(dist <= bound),
        bound - dist,
        bound,
        0.0,
        [],
        {"distance": dist, "epsilon": epsilon, "relative_slack": slack},
    )


# --- report -------------------------------------------------------------------


@dataclass
class CertReport:
    meta: dict
    checks: list[CheckRecord]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"meta": _clean(self.meta), "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def build_report(checks: Sequence[CheckRecord], n, dt, eta, epsilon,
                 timestamp: str | None = None, names: Sequence[str] = CHECK_NAMES) -> CertReport:
    """Assemble a report; every name in ``names`` appears, missing ones as skipped."""
    if not checks:
        raise InputError("a report needs at least one check")
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    meta = {"n": n, "dt": dt, "eta": eta, "epsilon": epsilon, "timestamp": timestamp}
    have = {c.name: c for c in checks}
    ordered = [have.get(nm) or CheckRecord.skipped(nm, "not evaluated") for nm in names]
    ordered += [c for c in checks if c.name not in names]
    return CertReport(meta, ordered)


def emit_report(report: CertReport, path) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(report.to_json())
    except OSError as exc:
        raise WriteError(f"cannot write report to {path}: {exc}") from exc


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
