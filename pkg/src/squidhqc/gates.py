"""Loops for the R_y, R_z and CPHASE gates, and the CNOT condition check."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .dark import FrameFn, analytic_dark_single, analytic_dark_two_cphase, numeric_frame_field
from .errors import DomainError, InfeasibleTargetError
from .hilbert import build_basis
from .holonomy import (
    ControlPath,
    DEFAULT_STEPS,
    _line_integral,
    cphase_holonomy,
    cphase_loop_angles,
    connection_line_integral,
    loop_angle_ry,
    loop_angle_rz,
    path_ordered_holonomy,
    rectangle,
    ry_gate,
    rz_gate,
    rz_holonomy,
)
from .model import DeviceParams, coordinate_names, reference_device

GATE_KINDS = ("ry", "rz", "cphase", "cnot")
UNITARY_TOL = 1e-6
RY_THETA_MAX = 1.2  # largest theta used by a single R_y winding
RZ_SIN2_MAX = 0.75  # largest sin^2(theta) used by a single R_z winding
CPHASE_XI1_MAX = 1.4
CPHASE_XI2 = math.asin(math.sqrt(2.0 - math.sqrt(2.0)))  # maximises |phi| per sweep
CNOT_CONDITION_TOL = 1e-3
CNOT_DISTANCE_TOL = 1e-2

U_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


@dataclass(frozen=True)
class GateTarget:
    kind: str
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"gate kind must be one of {GATE_KINDS}")
        if self.kind == "cnot":
            if self.angle is not None:
                raise ValueError("cnot takes no angle")
        elif self.angle is None or not math.isfinite(self.angle):
            raise ValueError(f"{self.kind} needs a finite angle")

    @property
    def num_squids(self) -> int:
        return 1 if self.kind in ("ry", "rz") else 2

    def ideal(self) -> np.ndarray:
        if self.kind == "ry":
            return ry_gate(self.angle)
        if self.kind == "rz":
            return rz_holonomy(self.angle)
        if self.kind == "cphase":
            return cphase_holonomy(0.0, self.angle)
        return U_CNOT.copy()


@dataclass
class GateVerdict:
    target: GateTarget
    unitary: np.ndarray
    distance: float
    angles: dict[str, float]
    tolerance: float
    residual: float | None = None  # CNOT condition residual
    extracted: np.ndarray | None = None
    path_file: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        ok = self.distance <= self.tolerance
        if self.residual is not None:
            ok = ok and abs(self.residual) <= CNOT_CONDITION_TOL
        return bool(ok)

    def to_json(self) -> dict:
        def num(x):
            return None if x is None else float(f"{x:.12g}")

        return {
            "target": {"kind": self.target.kind, "angle": num(self.target.angle)},
            "path_file": self.path_file,
            "angles": {k: num(self.angles.get(k)) for k in ("phi", "chi", "eta", "theta_C")},
            "residual": num(self.residual),
            "distance": num(self.distance),
            "pass": self.passed,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2) + "\n")
        return path


def _check_unitary(u: np.ndarray, name: str) -> None:
    err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if err > UNITARY_TOL:
        raise ValueError(f"{name} is not unitary (error {err:.2e})")


def gate_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over alpha of ||u - e^{i alpha} v||_F / sqrt(2k); zero iff u ~ v up to global phase."""
    u, v = np.asarray(u, dtype=complex), np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    _check_unitary(u, "u")
    _check_unitary(v, "v")
    k = u.shape[0]
    overlap = abs(np.trace(u.conj().T @ v))
    return math.sqrt(max(0.0, 2 * k - 2 * overlap)) / math.sqrt(2 * k)


# -- synthesis ---------------------------------------------------------------


def synthesize_ry(target_angle: float, xi_max: float = 1.0) -> ControlPath:
    """Rectangle in (xi, theta), repeated when |target| / xi_max exceeds sin(RY_THETA_MAX)."""
    if target_angle == 0.0:
        return ControlPath.trivial(1)
    if not 0 < xi_max < math.pi / 2:
        raise DomainError("xi_max must lie in (0, pi/2)")
    windings = max(1, math.ceil(abs(target_angle) / (xi_max * math.sin(RY_THETA_MAX)) - 1e-12))
    theta0 = math.asin(abs(target_angle) / (windings * xi_max))
    loop = rectangle(1, ("xi", xi_max), ("theta", theta0)).repeated(windings)
    return loop if target_angle > 0 else loop.reversed()


def synthesize_rz(target_angle: float) -> ControlPath:
    """theta up to theta0, phi1 swept by 2 pi m, theta back down (phases close mod 2 pi)."""
    if target_angle == 0.0:
        return ControlPath.trivial(1)
    windings = max(1, math.ceil(abs(target_angle) / (math.pi * RZ_SIN2_MAX) - 1e-12))
    theta0 = math.asin(math.sqrt(abs(target_angle) / (math.pi * windings)))
    sweep = -math.copysign(2 * math.pi * windings, target_angle)
    nodes = np.zeros((4, 4))
    nodes[1:3, 1] = theta0
    nodes[2:, 3] = sweep
    return ControlPath(nodes, 1)


def _cphase_rate(xi1: float, xi2: float) -> float:
    """d(phi)/d(phi0^(2)) at fixed (xi1, xi2)."""
    s1, s2 = math.sin(xi1) ** 2, math.sin(xi2) ** 2
    return -s1 * (1.0 - s2) * s2 / (2.0 - s1 * s2)


def synthesize_cphase(target_phi: float, xi2: float = CPHASE_XI2) -> ControlPath:
    """Forward phi0^(2) sweep at (xi1*, xi2), return sweep at (0, xi2).

    Both sweeps see the same sin^2(xi2), so eta cancels; xi1* is root-found
    so that the conditional phase equals ``target_phi``.
    """
    if target_phi == 0.0:
        return ControlPath.trivial(2)
    rate_max = abs(_cphase_rate(CPHASE_XI1_MAX, xi2))
    if rate_max == 0.0:
        raise InfeasibleTargetError(f"xi2={xi2} gives no conditional phase")
    windings = max(1, math.ceil(abs(target_phi) / (2 * math.pi * rate_max * 0.95)))
    sweep = -math.copysign(2 * math.pi * windings, target_phi)  # rate < 0
    want = target_phi / sweep
    try:
        xi1 = brentq(lambda x: _cphase_rate(x, xi2) - want, 0.0, CPHASE_XI1_MAX, xtol=1e-15)
    except ValueError as exc:
        raise InfeasibleTargetError(f"no xi1 in [0, {CPHASE_XI1_MAX}] reaches phi={target_phi}") from exc
    names = coordinate_names(2)
    i1, i2, ip = names.index("xi_1"), names.index("xi_2"), names.index("phi0_2")
    v = np.zeros(len(names))
    pts = [v.copy()]
    for col, val in ((i2, xi2), (i1, xi1), (ip, sweep), (i1, 0.0), (ip, 0.0), (i2, 0.0)):
        v[col] = val
        pts.append(v.copy())
    return ControlPath(np.array(pts), 2)


def synthesize(target: GateTarget, **kw) -> ControlPath:
    if target.kind == "ry":
        return synthesize_ry(target.angle, **kw)
    if target.kind == "rz":
        return synthesize_rz(target.angle)
    if target.kind == "cphase":
        return synthesize_cphase(target.angle, **kw)
    return cnot_search(**kw).path


# -- verification ------------------------------------------------------------


def _analytic_frame_fn(kind: str) -> FrameFn:
    if kind in ("ry", "rz"):
        return analytic_dark_single
    return analytic_dark_two_cphase


def verify_gate(target: GateTarget, path: ControlPath, frame_fn: FrameFn | None = None,
                steps: int = DEFAULT_STEPS, tolerance: float = 1e-6) -> GateVerdict:
    """Holonomy of ``path`` against the closed-form gate for its own loop angles and the target."""
    if target.kind == "cnot":
        return verify_cnot(path, steps=steps)
    path.validate(require_loop=True)
    frame_fn = frame_fn or _analytic_frame_fn(target.kind)
    u = path_ordered_holonomy(frame_fn, path, steps=steps).unitary
    if target.kind == "ry":
        angles = {"phi": loop_angle_ry(path)}
    elif target.kind == "rz":
        angles = {"chi": loop_angle_rz(path)}
    else:
        eta, phi = cphase_loop_angles(path)
        angles = {"eta": eta, "phi": phi}
    return GateVerdict(target, u, gate_distance(u, target.ideal()), angles, tolerance)


def closed_form_gate(kind: str, path: ControlPath) -> np.ndarray:
    """The closed-form gate for the loop angles of ``path``."""
    if kind == "ry":
        return ry_gate(loop_angle_ry(path))
    if kind == "rz":
        return rz_holonomy(loop_angle_rz(path))
    if kind == "cphase":
        return cphase_holonomy(*cphase_loop_angles(path))
    raise ValueError(f"no closed form for {kind!r}")


def is_cnot_config(path: ControlPath, atol: float = 1e-12) -> bool:
    names = path.coordinate_names
    if path.num_squids != 2:
        return False
    fixed = [names.index(n) for n in ("theta_1", "phi0_1", "phi1_1", "phi0_2", "phi1_2")]
    return bool(np.abs(path.nodes[:, fixed]).max() <= atol)


def spectator_angle(path: ControlPath) -> float:
    """-oint sin(theta^(2)) dxi^(2): the R_y angle qubit 2 picks up when qubit 1 sits in a1."""
    names = path.coordinate_names
    i_xi, i_th = names.index("xi_2"), names.index("theta_2")
    return -_line_integral(path, lambda x: np.sin(x[:, i_th]), i_xi)


def control_block_angle(path: ControlPath, frame_fn: FrameFn, steps: int = DEFAULT_STEPS) -> float:
    """theta(C): oint of the (a0a0, a0a1) connection element along the loop."""
    return float(connection_line_integral(frame_fn, path, steps)[0, 1].real)


def _rz2(angle: float, qubit: int) -> np.ndarray:
    r = rz_gate(angle)
    return np.kron(r, np.eye(2)) if qubit == 1 else np.kron(np.eye(2), r)


def peel_cnot_dressings(u: np.ndarray, theta_c: float) -> np.ndarray:
    """Undo e^{-i pi/4} R_y^(2)(theta_C) R_z^(1)(pi/4) R_z^(2)(pi/4) [.] R_z^(2)(-pi/4)."""
    ry2 = np.kron(np.eye(2), ry_gate(theta_c))
    left = np.linalg.inv(_rz2(math.pi / 4, 1) @ _rz2(math.pi / 4, 2)) @ np.linalg.inv(ry2)
    return np.exp(0.25j * math.pi) * left @ u @ _rz2(math.pi / 4, 2)


def verify_cnot(path: ControlPath, dev: DeviceParams | None = None, steps: int = 6000,
                tolerance: float = CNOT_DISTANCE_TOL, frame_fn: FrameFn | None = None) -> GateVerdict:
    """Holonomy from numeric frames, the pi/2 condition, and distance to U_CN after peeling."""
    if not is_cnot_config(path):
        raise DomainError("CNOT loops keep theta^(1) and every phase at zero")
    path.validate(require_loop=True)
    dev = dev or reference_device()
    frame_fn = frame_fn or numeric_frame_field(dev, build_basis(2))
    u = path_ordered_holonomy(frame_fn, path, steps=steps).unitary
    phi2 = spectator_angle(path)
    theta_c = control_block_angle(path, frame_fn, steps) if len(path) > 1 else 0.0
    residual = phi2 - theta_c - math.pi / 2
    extracted = peel_cnot_dressings(u, theta_c)
    verdict = GateVerdict(GateTarget("cnot"), u, gate_distance(extracted, U_CNOT),
                          {"phi": phi2, "theta_C": theta_c}, tolerance, residual, extracted)
    if abs(residual) > CNOT_CONDITION_TOL:
        verdict.notes.append(f"condition not met: residual {residual:.3g}")
    return verdict


# -- CNOT continuation search -------------------------------------------------


@dataclass(frozen=True)
class CnotLoopShape:
    """Raise xi^(1), wind an (xi^(2), theta^(2)) rectangle, lower xi^(1); all amplitudes times s."""

    xi1: float = 1.4
    xi2: float = 1.3
    theta2: float = 1.2
    windings: int = 12

    def winding(self, scale: float) -> ControlPath:
        names = coordinate_names(2)
        i1, i2, it = names.index("xi_1"), names.index("xi_2"), names.index("theta_2")
        base = np.zeros(len(names))
        base[i1] = self.xi1 * scale
        pts = [base.copy()]
        for col, val in ((i2, self.xi2 * scale), (it, self.theta2 * scale), (i2, 0.0), (it, 0.0)):
            base[col] = val
            pts.append(base.copy())
        return ControlPath(np.array(pts), 2)

    def path(self, scale: float) -> ControlPath:
        w = self.winding(scale)
        raise_leg = ControlPath(np.array([np.zeros(w.nodes.shape[1]), w.nodes[0]]), 2)
        return raise_leg.then(w.repeated(self.windings)).then(raise_leg.reversed())


@dataclass
class CnotSearchResult:
    scale: float
    path: ControlPath
    verdict: GateVerdict
    evaluations: list[tuple[float, float]]


def cnot_residual(shape: CnotLoopShape, scale: float, frame_fn: FrameFn,
                  steps_per_winding: int = 1500) -> float:
    """Condition residual for the scaled loop.

    Raising and lowering xi^(1) adds nothing to the control-block angle, so one
    winding is integrated and multiplied by the winding number.
    """
    w = shape.winding(scale)
    theta_c = shape.windings * control_block_angle(w, frame_fn, steps_per_winding)
    return shape.windings * spectator_angle(w) - theta_c - math.pi / 2


def cnot_search(shape: CnotLoopShape | None = None, dev: DeviceParams | None = None,
                scan: tuple[float, float, int] = (0.2, 1.0, 9), steps: int = 6000,
                xtol: float = 1e-7) -> CnotSearchResult:
    """Scan the amplitude scale s for a sign change of the CNOT residual, refine it, then verify."""
    shape = shape or CnotLoopShape()
    dev = dev or reference_device()
    frame_fn = numeric_frame_field(dev, build_basis(2))
    evals: list[tuple[float, float]] = []

    def r(s):
        val = cnot_residual(shape, s, frame_fn)
        evals.append((s, val))
        return val

    grid = np.linspace(*scan)
    prev_s, prev_r = grid[0], r(grid[0])
    for s_next in grid[1:]:
        r_next = r(s_next)
        if prev_r * r_next <= 0:
            break
        prev_s, prev_r = s_next, r_next
    else:
        raise InfeasibleTargetError(f"CNOT residual never changes sign over scales {grid.tolist()}")
    s = brentq(r, prev_s, s_next, xtol=xtol)
    path = shape.path(s)
    return CnotSearchResult(s, path, verify_cnot(path, dev, steps=steps, frame_fn=frame_fn), evals)
