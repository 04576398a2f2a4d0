"""JSON scenario configs, protocol runs, quality-factor sweeps and the oracle suite."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .dark import (
    analytic_dark_single,
    analytic_dark_two_cphase,
    cphase_grid,
    detect_accidental_degeneracy,
    numeric_frame_field,
    numeric_zero_eigenspace,
    single_grid,
)
from .dynamics import (
    DEFAULT_DT,
    DEFAULT_STRIDE,
    MAX_NORM_DT,
    FidelityReport,
    PathSchedule,
    adiabaticity_check,
    evolve_kappa_batch,
    fidelity_perturbative,
    ideal_final_states,
    integrate,
    overlap_fidelity,
    run_gate_protocol,
    schedule_control_path,
)
from .errors import ConfigError, StepSizeError, SquidHQCError
from .gates import GateTarget, gate_distance, synthesize_cphase, synthesize_ry, synthesize_rz, closed_form_gate
from .hilbert import build_basis
from .holonomy import path_ordered_holonomy, wz_connection_analytic, wz_connection_fd, cphase_loop_angles
from .model import (
    ConstantPhase,
    ControlPoint,
    DeviceParams,
    GaussianChannel,
    PulseSchedule,
    TanhPhase,
    hamiltonian_at,
)

log = logging.getLogger(__name__)

STATES = ("a0a0", "a0a1", "a1a0", "a1a1")
DEFAULT_QUALITY_EXPONENTS = (2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)
TOLERANCES = {
    "kernel_rel": 1e-9,
    "dark_residual": 1e-9,
    "projector_distance": 1e-7,
    "connection": 1e-6,
    "holonomy_distance": 1e-6,
    "adiabatic_overlap": 0.99,
    "fidelity_consistency": 0.02,
    "step_norm_product": MAX_NORM_DT,
}


def sig12(x: float) -> float:
    """Round to 12 significant digits (the precision of every printed float)."""
    return float(f"{float(x):.12g}")


# -- config ------------------------------------------------------------------

_SCHEMA: dict[str, Any] = {
    "device": {"g_si": list, "delta_si": list, "kappa_over_g": (int, float),
               "quality_exponents": list},
    "system": {"num_squids": int, "n_max": int},
    "schedule": {"tau_over_ginv": (int, float), "duration_over_tau": (int, float), "channels": list},
    "protocol": {"gate": str, "initial_states": list, "direct_fidelity": bool},
    "integrator": {"dt": (int, float), "stride": int},
    "outputs": {"dir": str, "trajectories": bool, "state_populations": bool},
    "seed": int,
}
_CHANNEL_KEYS = {"channel": str, "squid": int, "kind": str, "amp_over_g": (int, float),
                 "tau_over_ginv": (int, float),
                 "center_over_tau": (int, float), "width_over_tau": (int, float), "phase": dict}
_PHASE_KEYS = {"kind": str, "scale_pi": (int, float), "width_over_tau": (int, float),
               "center_over_tau": (int, float), "value": (int, float)}

DEFAULT_CONFIG: dict[str, Any] = {
    "device": {"g_si": [1.8e8, 0.9e8], "delta_si": [0.0, 0.0], "kappa_over_g": 0.0,
               "quality_exponents": list(DEFAULT_QUALITY_EXPONENTS)},
    "system": {"num_squids": 2, "n_max": 2},
    "schedule": {
        "tau_over_ginv": 144.0,
        "duration_over_tau": 6.0,
        "channels": [
            {"channel": "omega0", "squid": 1, "kind": "gaussian", "amp_over_g": 2.5,
             "center_over_tau": 3.0, "width_over_tau": 1.0},
            {"channel": "omega0", "squid": 2, "kind": "gaussian", "amp_over_g": 1.0,
             "center_over_tau": 3.0, "width_over_tau": 1.0,
             "phase": {"kind": "tanh", "scale_pi": 1.0, "width_over_tau": 0.75, "center_over_tau": 3.0}},
        ],
    },
    "protocol": {"gate": "cphase", "initial_states": list(STATES), "direct_fidelity": True},
    "integrator": {"dt": DEFAULT_DT, "stride": DEFAULT_STRIDE},
    "outputs": {"dir": "out", "trajectories": True, "state_populations": False},
    "seed": 0,
}


def _check_type(value, kind, path):
    if kind in ((int, float), float) and isinstance(value, bool):
        raise ConfigError(path, "expected a number")
    if kind is int and isinstance(value, bool):
        raise ConfigError(path, "expected an integer")
    if not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "number"
        raise ConfigError(path, f"expected {name}, got {type(value).__name__}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(path, "must be finite")


def _check_keys(d: dict, allowed: dict, path: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")
    for k, v in d.items():
        sub = f"{path}.{k}" if path else k
        kind = allowed[k]
        if isinstance(kind, dict):
            _check_keys(v, kind, sub)
        else:
            _check_type(v, kind, sub)


def merge_defaults(raw: dict) -> dict:
    """Missing sections and keys fall back to the built-in CPHASE scenario."""
    out = copy.deepcopy(DEFAULT_CONFIG)
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k].update(copy.deepcopy(v))
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        _check_keys(raw, _SCHEMA, "")
        data = merge_defaults(raw)
        cfg = cls(data)
        cfg._validate()
        return cfg

    @classmethod
    def load(cls, path, overrides: list[str] | None = None) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON ({exc})") from exc
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read ({exc.strerror})") from exc
        for item in overrides or []:
            apply_override(raw, item)
        return cls.from_dict(raw)

    @classmethod
    def default(cls) -> "ScenarioConfig":
        return cls.from_dict({})

    def _validate(self) -> None:
        d = self.data
        n = d["system"]["num_squids"]
        if n not in (1, 2):
            raise ConfigError("system.num_squids", "must be 1 or 2")
        try:
            build_basis(n, d["system"]["n_max"])
        except SquidHQCError as exc:
            raise ConfigError("system.n_max", str(exc)) from exc
        for key in ("g_si", "delta_si"):
            vals = d["device"][key]
            if len(vals) != n:
                raise ConfigError(f"device.{key}", f"needs {n} entries (one per SQUID)")
            for i, v in enumerate(vals):
                _check_type(v, (int, float), f"device.{key}[{i}]")
        if any(v <= 0 for v in d["device"]["g_si"]):
            raise ConfigError("device.g_si", "couplings must be positive")
        if d["device"]["kappa_over_g"] < 0:
            raise ConfigError("device.kappa_over_g", "must be non-negative")
        for i, v in enumerate(d["device"]["quality_exponents"]):
            _check_type(v, (int, float), f"device.quality_exponents[{i}]")
        sch = d["schedule"]
        if sch["tau_over_ginv"] <= 0 or sch["duration_over_tau"] <= 0:
            raise ConfigError("schedule", "tau_over_ginv and duration_over_tau must be positive")
        for i, ch in enumerate(sch["channels"]):
            p = f"schedule.channels[{i}]"
            _check_keys(ch, _CHANNEL_KEYS, p)
            for req in ("channel", "squid", "amp_over_g", "center_over_tau"):
                if req not in ch:
                    raise ConfigError(f"{p}.{req}", "missing")
            if ch["channel"] not in ("omega0", "omega1"):
                raise ConfigError(f"{p}.channel", "must be omega0 or omega1")
            if not 1 <= ch["squid"] <= n:
                raise ConfigError(f"{p}.squid", f"no SQUID {ch['squid']} in a {n}-SQUID system")
            if ch.get("kind", "gaussian") != "gaussian":
                raise ConfigError(f"{p}.kind", "only gaussian pulses are supported")
            if ch.get("width_over_tau", 1.0) <= 0 or ch.get("tau_over_ginv", 1.0) <= 0:
                raise ConfigError(f"{p}.width_over_tau", "must be positive")
            if "phase" in ch:
                _check_keys(ch["phase"], _PHASE_KEYS, f"{p}.phase")
                kind = ch["phase"].get("kind")
                if kind not in ("tanh", "constant"):
                    raise ConfigError(f"{p}.phase.kind", "must be tanh or constant")
                if kind == "tanh" and ch["phase"].get("width_over_tau", 1.0) <= 0:
                    raise ConfigError(f"{p}.phase.width_over_tau", "must be positive")
        proto = d["protocol"]
        if proto["gate"] not in ("cphase", "none"):
            raise ConfigError("protocol.gate", "scenario runs support 'cphase' or 'none'")
        labels = build_basis(n).computational_labels()
        for i, s in enumerate(proto["initial_states"]):
            if s not in labels:
                raise ConfigError(f"protocol.initial_states[{i}]", f"unknown state {s!r}; use {labels}")
        if not proto["initial_states"]:
            raise ConfigError("protocol.initial_states", "empty")
        if d["integrator"]["dt"] <= 0:
            raise ConfigError("integrator.dt", "must be positive")
        if d["integrator"]["stride"] < 1:
            raise ConfigError("integrator.stride", "must be >= 1")

    # derived objects

    @property
    def num_squids(self) -> int:
        return self.data["system"]["num_squids"]

    @property
    def dt(self) -> float:
        return float(self.data["integrator"]["dt"])

    @property
    def stride(self) -> int:
        return int(self.data["integrator"]["stride"])

    @property
    def initial_states(self) -> list[str]:
        return list(self.data["protocol"]["initial_states"])

    @property
    def quality_exponents(self) -> list[float]:
        return [float(x) for x in self.data["device"]["quality_exponents"]]

    def device(self, kappa: float | None = None) -> DeviceParams:
        dv = self.data["device"]
        dev = DeviceParams.from_si(dv["g_si"], dv["delta_si"])
        return dev.with_kappa(dv["kappa_over_g"] if kappa is None else kappa)

    def basis(self):
        return build_basis(self.num_squids, self.data["system"]["n_max"])

    def schedule(self) -> PulseSchedule:
        sch = self.data["schedule"]
        chans = []
        for ch in sch["channels"]:
            tau = float(ch.get("tau_over_ginv", sch["tau_over_ginv"]))
            ph = ch.get("phase")
            if ph is None:
                phase = ConstantPhase()
            elif ph["kind"] == "constant":
                phase = ConstantPhase(float(ph.get("value", 0.0)))
            else:
                phase = TanhPhase(float(ph.get("scale_pi", 1.0)), float(ph.get("width_over_tau", 0.75)) * tau,
                                  float(ph.get("center_over_tau", 0.0)) * tau)
            chans.append(GaussianChannel(ch["channel"], ch["squid"] - 1, float(ch["amp_over_g"]),
                                         float(ch["center_over_tau"]) * tau,
                                         float(ch.get("width_over_tau", 1.0)) * tau, phase))
        return PulseSchedule(self.num_squids, tuple(chans),
                             float(sch["duration_over_tau"]) * float(sch["tau_over_ginv"]))

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def apply_override(raw: dict, item: str) -> None:
    """Set ``a.b.c=value`` in place; value parsed as JSON, else kept as a string."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key.path=value")
    key, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.strip().split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        elif not isinstance(nxt, dict):
            raise ConfigError(".".join(parts[: i + 1]), "is not an object")
        node = nxt
    node[parts[-1]] = value


# -- runs --------------------------------------------------------------------


def closed_form_angles(final: np.ndarray, basis, labels: list[str]) -> dict[str, float]:
    """(eta, phi) read off the final amplitudes of the four computational states.

    The dynamics realise U_s; the closed-form angles belong to its adjoint, so both
    carry the opposite sign of the raw relative phases.
    """
    comp = basis.computational_frame()
    amps = {lab: complex(comp[:, STATES.index(lab)].conj() @ final[:, i]) for i, lab in enumerate(labels)}
    if set(amps) != set(STATES):
        return {}
    arg = {k: np.angle(v) for k, v in amps.items()}
    eta = -(arg["a1a0"] - arg["a1a1"])
    phi = -(arg["a0a0"] - arg["a0a1"] - arg["a1a0"] + arg["a1a1"])
    wrap = lambda x: float((x + math.pi) % (2 * math.pi) - math.pi)
    return {"eta": wrap(eta), "phi": wrap(phi), "eta_mod_2pi": float(eta % (2 * math.pi))}


def phase_distance(a: float, b: float) -> float:
    """|e^{ia} - e^{ib}|."""
    return float(abs(np.exp(1j * a) - np.exp(1j * b)))


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    reports: list[FidelityReport]
    angles: dict[str, float]
    predicted_angles: dict[str, float]
    duration: float
    adiabatic: dict[str, float]
    warnings: list[str]
    files: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "config_hash": self.config.hash(),
            "version": __version__,
            "tolerances": TOLERANCES,
            "operation_time_over_ginv": sig12(self.duration),
            "kappa_over_g": sig12(self.config.data["device"]["kappa_over_g"]),
            "angles": {k: sig12(v) for k, v in self.angles.items()},
            "predicted_angles": {k: sig12(v) for k, v in self.predicted_angles.items()},
            "adiabaticity": {k: sig12(v) for k, v in self.adiabatic.items()},
            "reports": [
                {"state": r.label, "f_perturbative": sig12(r.f_perturbative),
                 "f_direct": None if r.f_direct is None else sig12(r.f_direct),
                 "photon_integral": sig12(r.photon_integral)}
                for r in self.reports
            ],
            "warnings": self.warnings,
            "files": self.files,
        }


def _initial_columns(cfg: ScenarioConfig, basis):
    comp = basis.computational_frame()
    labels = basis.computational_labels()
    return comp[:, [labels.index(s) for s in cfg.initial_states]]


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None,
                 dt: float | None = None) -> ScenarioResult:
    dt = dt or cfg.dt
    basis = cfg.basis()
    dev = cfg.device()
    sched = cfg.schedule()
    warns: list[str] = []
    edge = sched.endpoint_amplitude()
    if edge > 1e-6:
        warns.append(f"pulse amplitude at the schedule ends is {edge:.3g} g, not zero")
    adi = adiabaticity_check(sched, dev, basis=basis)
    if adi.warning:
        warns.append(adi.warning)
    psi0 = _initial_columns(cfg, basis)
    traj = run_gate_protocol(sched, dev.with_kappa(0.0), psi0, dt=dt, stride=cfg.stride, basis=basis)
    traj.labels = cfg.initial_states
    ideal, _ = ideal_final_states(sched, dev, psi0, basis)
    photon = traj.photon_integral()
    f_pert = fidelity_perturbative(traj, dev.kappa)
    f_direct = [None] * len(cfg.initial_states)
    if cfg.data["protocol"]["direct_fidelity"]:
        if dev.kappa > 0:
            final = evolve_kappa_batch(sched, dev, [dev.kappa], psi0, dt=dt, basis=basis)[0]
        else:
            final = traj.final
        f_direct = list(overlap_fidelity(ideal, final))
    reports = [FidelityReport(lab, float(fp), None if fd is None else float(fd), dev.kappa,
                              sched.duration, float(ph))
               for lab, fp, fd, ph in zip(cfg.initial_states, f_pert, f_direct, photon)]
    angles, predicted = {}, {}
    if cfg.data["protocol"]["gate"] == "cphase" and cfg.num_squids == 2:
        angles = closed_form_angles(traj.final, basis, cfg.initial_states)
        path = schedule_control_path(sched, dev)
        try:
            eta, phi = cphase_loop_angles(path)
            predicted = {"eta": eta, "phi": phi}
        except ValueError:
            pass
    res = ScenarioResult(cfg, reports, angles, predicted, sched.duration,
                         {"min_gap_over_g": adi.min_gap, "gap_times_T": adi.product}, warns)
    for w in warns:
        log.warning(w)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if cfg.data["outputs"]["trajectories"]:
            pops = basis if cfg.data["outputs"]["state_populations"] else None
            for i, lab in enumerate(cfg.initial_states):
                res.files.append(str(traj.to_csv(out / f"trajectory_{lab}.csv", column=i, basis=pops)))
        summary = out / "summary.json"
        res.files.append(str(summary))
        summary.write_text(json.dumps(res.summary(), indent=2, sort_keys=True) + "\n")
    return res


# -- quality-factor sweep ----------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    n: float
    state: str
    f_perturbative: float
    f_direct: float | None
    photon_integral: float
    duration: float


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def states(self) -> list[str]:
        return sorted({r.state for r in self.rows})

    def exponents(self) -> list[float]:
        return sorted({r.n for r in self.rows})

    def series(self, state: str, column: str = "f_perturbative") -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.state == state]
        return np.array([r.n for r in rows]), np.array([getattr(r, column) for r in rows])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "state", "f_perturbative", "f_direct", "photon_integral", "T_over_ginv"])
            for r in self.rows:
                w.writerow([f"{r.n:.12g}", r.state, f"{r.f_perturbative:.12g}",
                            "" if r.f_direct is None else f"{r.f_direct:.12g}",
                            f"{r.photon_integral:.12g}", f"{r.duration:.12g}"])
        return path


def _direct_job(args):
    cfg_data, kappas, dt = args
    cfg = ScenarioConfig(cfg_data)
    basis = cfg.basis()
    sched = cfg.schedule()
    psi0 = _initial_columns(cfg, basis)
    return evolve_kappa_batch(sched, cfg.device(0.0), kappas, psi0, dt=dt, basis=basis)


def sweep_quality_factor(cfg: ScenarioConfig, n_values=None, jobs: int = 1,
                         direct: bool | None = None, dt: float | None = None,
                         out_dir: str | Path | None = None) -> SweepResult:
    """Fidelity of every initial state at kappa = g 10^-n for each n."""
    n_values = sorted(float(n) for n in (n_values if n_values is not None else cfg.quality_exponents))
    if not n_values or not all(math.isfinite(n) for n in n_values):
        raise ConfigError("device.quality_exponents", "need a finite, non-empty list")
    dt = dt or cfg.dt
    direct = cfg.data["protocol"]["direct_fidelity"] if direct is None else direct
    basis = cfg.basis()
    sched = cfg.schedule()
    dev = cfg.device(0.0)
    psi0 = _initial_columns(cfg, basis)
    traj = run_gate_protocol(sched, dev, psi0, dt=dt, stride=cfg.stride, basis=basis)
    photon = traj.photon_integral()
    kappas = [10.0 ** (-n) for n in n_values]
    f_direct = None
    if direct:
        ideal, _ = ideal_final_states(sched, dev, psi0, basis)
        groups = [list(range(len(kappas)))[i::max(1, jobs)] for i in range(max(1, jobs))]
        groups = [g for g in groups if g]
        tasks = [(cfg.data, [kappas[i] for i in g], dt) for g in groups]
        if jobs > 1 and len(groups) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                finals = list(ex.map(_direct_job, tasks))
        else:
            finals = [_direct_job(t) for t in tasks]
        f_direct = np.zeros((len(kappas), psi0.shape[1]))
        for g, fin in zip(groups, finals):
            for j, i in enumerate(g):
                f_direct[i] = overlap_fidelity(ideal, fin[j])
    rows = []
    for i, (n, kap) in enumerate(zip(n_values, kappas)):
        fp = np.clip(1.0 - kap * photon, 0.0, 1.0)
        for j, lab in enumerate(cfg.initial_states):
            fd = None if f_direct is None else sig12(min(1.0, f_direct[i, j]))
            rows.append(SweepRow(sig12(n), lab, sig12(fp[j]), fd, sig12(photon[j]), sig12(sched.duration)))
    rows.sort(key=lambda r: (r.n, r.state))
    expected = {(sig12(n), s) for n in n_values for s in cfg.initial_states}
    if {(r.n, r.state) for r in rows} != expected:
        raise SquidHQCError("sweep is missing (n, state) rows")
    result = SweepResult(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.to_csv(out / "sweep.csv")
        emit_plot_data(result, out / "fidelity_vs_n.csv")
    return result


def emit_plot_data(sweep: SweepResult, path, column: str = "f_perturbative") -> Path:
    """Wide CSV: n, then one fidelity column per initial state."""
    path = Path(path)
    states = [s for s in STATES if s in sweep.states()] + [s for s in sweep.states() if s not in STATES]
    table = {(r.n, r.state): getattr(r, column) for r in sweep.rows}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n"] + states)
        for n in sweep.exponents():
            w.writerow([f"{n:.12g}"] + [f"{table[(n, s)]:.12g}" for s in states])
    return path


def load_plot_data(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """(state labels, n values, fidelity matrix) from ``emit_plot_data`` output."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float)
    return header[1:], data[:, 0], data[:, 1:]


# -- oracle suite ------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, fn) -> CheckResult:
    try:
        ok, detail = fn()
    except (SquidHQCError, ValueError, np.linalg.LinAlgError) as exc:
        return CheckResult(name, False, f"{type(exc).__name__}: {exc}")
    return CheckResult(name, bool(ok), detail)


def _random_points(rng, num_squids, n, config):
    pts = []
    for _ in range(n):
        if num_squids == 1:
            xi, th = rng.uniform(0.0, 1.4, 2)
            f0, f1 = rng.uniform(-math.pi, math.pi, 2)
            pts.append(ControlPoint.single(xi, th, f0, f1))
        else:
            x1, x2 = rng.uniform(0.0, 1.4, 2)
            pts.append(ControlPoint.two(xi=(x1, x2), phi0=(0.0, rng.uniform(-math.pi, math.pi))))
    return pts


def verify_all(cfg: ScenarioConfig, quick: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(cfg.data["seed"])
    dev = cfg.device(0.0)
    dev1 = DeviceParams((dev.g[0],), (dev.delta[0],))
    checks: list[CheckResult] = []

    def dark_frames():
        worst_r, worst_p = 0.0, 0.0
        for nsq, fn, d in ((1, analytic_dark_single, dev1), (2, analytic_dark_two_cphase, dev)):
            if nsq == 2 and dev.num_squids != 2:
                continue
            basis = build_basis(nsq)
            for p in _random_points(rng, nsq, 20, cfg):
                h = hamiltonian_at(p, d, basis)
                a = fn(p, basis)
                num = numeric_zero_eigenspace(h, basis)
                worst_r = max(worst_r, a.residual(h))
                worst_p = max(worst_p, float(np.abs(a.projector() - num.projector()).max()))
        ok = worst_r <= TOLERANCES["dark_residual"] and worst_p <= TOLERANCES["projector_distance"]
        return ok, f"max ||H D|| {worst_r:.2e}, projector distance {worst_p:.2e}"

    def connections():
        worst = 0.0
        for p, conf, mu in (
            (ControlPoint.single(0.7, 0.4), "ry", "xi"),
            (ControlPoint.single(0.0, 0.9, 0.0, 0.3), "rz", "phi1"),
            (ControlPoint.two(xi=(0.8, 0.6), phi0=(0.0, 0.4)), "cphase", "phi0_2"),
        ):
            fn = analytic_dark_single if p.num_squids == 1 else analytic_dark_two_cphase
            worst = max(worst, float(np.abs(wz_connection_fd(fn, p, mu).matrix
                                             - wz_connection_analytic(p, conf, mu).matrix).max()))
        return worst <= TOLERANCES["connection"], f"max |A_fd - A_exact| {worst:.2e}"

    def holonomies():
        worst = 0.0
        for kind, path in (("ry", synthesize_ry(0.5)), ("rz", synthesize_rz(-0.7)),
                           ("cphase", synthesize_cphase(math.pi / 6))):
            fn = analytic_dark_single if kind != "cphase" else analytic_dark_two_cphase
            u = path_ordered_holonomy(fn, path).unitary
            worst = max(worst, gate_distance(u, closed_form_gate(kind, path)))
        return worst <= TOLERANCES["holonomy_distance"], f"max gate distance {worst:.2e}"

    def degeneracy():
        basis = build_basis(dev.num_squids)
        rep = detect_accidental_degeneracy(dev, [ControlPoint.origin(dev.num_squids)], basis)
        dim = rep.kernel_dims[0]
        return not rep.flagged[0], f"kernel dimension at O: {dim} (nominal {rep.nominal_dim})"

    def integrator():
        sched = cfg.schedule()
        ham_dev = cfg.device(0.0)
        from .dynamics import max_generator_norm, protocol_hamiltonian

        ham = protocol_hamiltonian(sched, ham_dev, cfg.basis())
        prod = cfg.dt * max_generator_norm(ham, (0.0, sched.duration))
        if prod > MAX_NORM_DT:
            return False, f"dt*max||H|| = {prod:.3g} exceeds {MAX_NORM_DT}"
        h = hamiltonian_at(ControlPoint.single(0.6, 0.3, 0.2, 0.1), dev1, build_basis(1))
        psi0 = build_basis(1).ket("a0")
        from scipy.linalg import expm

        traj = integrate(lambda t: h, psi0, (0.0, 5.0), cfg.dt)
        err = float(np.abs(traj.final[:, 0] - expm(-5j * h) @ psi0).max())
        return err <= 1e-8, f"dt*max||H|| = {prod:.3g}; constant-H error {err:.2e}"

    def adiabatic():
        path = synthesize_ry(0.5)
        sched = PathSchedule(path, 1000.0, dev1)
        traj = run_gate_protocol(sched, dev1, dt=max(cfg.dt, 2e-3) if not quick else 4e-3)
        ideal, _ = ideal_final_states(sched, dev1)
        ov = overlap_fidelity(ideal, traj.final).min()
        return ov >= TOLERANCES["adiabatic_overlap"], f"min overlap at T=1000: {ov:.6f}"

    def fidelity_consistency():
        if quick:
            return True, "skipped (quick)"
        sched = cfg.schedule()
        basis = cfg.basis()
        psi0 = _initial_columns(cfg, basis)
        kappa = 10.0 ** (-max(cfg.quality_exponents))
        traj = run_gate_protocol(sched, dev, psi0, dt=cfg.dt, basis=basis)
        ideal, _ = ideal_final_states(sched, dev, psi0, basis)
        fd = overlap_fidelity(ideal, evolve_kappa_batch(sched, dev, [kappa], psi0, cfg.dt, basis)[0])
        fp = fidelity_perturbative(traj, kappa)
        x = kappa * traj.photon_integral()
        # first order: the gap is second order in kappa int <n> dt
        bound = np.maximum(x**2, 1e-6) + (1.0 - overlap_fidelity(ideal, traj.final))
        diff = np.abs(fd - fp)
        return bool(np.all(diff <= bound)), f"g/kappa=1e{max(cfg.quality_exponents):g}: max |F_d - F_p| {diff.max():.2e}"

    for name, fn in (("dark frames: analytic vs numeric", dark_frames),
                     ("connection: finite difference vs closed form", connections),
                     ("holonomy vs closed-form gates", holonomies),
                     ("accidental degeneracy at O", degeneracy),
                     ("integrator step size and accuracy", integrator),
                     ("adiabatic dynamics vs holonomy", adiabatic),
                     ("perturbative vs direct fidelity", fidelity_consistency)):
        checks.append(_check(name, fn))
    return checks


def format_checks(checks: list[CheckResult]) -> str:
    width = max(len(c.name) for c in checks)
    return "\n".join(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}" for c in checks)


def degeneracy_map(cfg: ScenarioConfig, n: int = 7, out_path=None):
    dev = cfg.device(0.0)
    basis = build_basis(dev.num_squids)
    grid = cphase_grid(n) if dev.num_squids == 2 else single_grid(n)
    grid = [ControlPoint.origin(dev.num_squids)] + grid
    rep = detect_accidental_degeneracy(dev, grid, basis)
    if out_path is not None:
        rep.to_csv(out_path)
    return rep
