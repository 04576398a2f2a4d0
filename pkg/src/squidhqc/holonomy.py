"""Wilczek-Zee connections, path-ordered holonomies and closed-form loop angles.

Sign convention
---------------
With A_mu^{ij} = <D_i| d/d lambda_mu |D_j>, the Schroedinger equation carries
dark-state amplitudes c along a loop as dc = -A c dlambda, i.e. by
``U_s = P exp(-oint A)`` (later factors on the left).  The closed forms
R_y(phi) = exp(i phi sigma_y) with phi = -oint sin(theta) dxi, and their
R_z / CPHASE analogues, describe the adjoint ``U_g = U_s^dagger``
(= exp(A dl_1) exp(A dl_2) ... , earlier factors on the left).
``path_ordered_holonomy`` returns U_g by default (``convention="geometric"``)
and U_s with ``convention="schrodinger"``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .dark import FrameFn, polar_unitary
from .errors import DomainError, StepSizeError
from .hilbert import Basis, build_basis
from .model import COORDS, ControlPoint, coordinate_names

FD_STEP = 1e-4
DEFAULT_STEPS = 2000
AD_EXCLUSION_RADIUS = 0.05
_HALF_PI = math.pi / 2
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# -- paths -------------------------------------------------------------------


@dataclass(frozen=True)
class ControlPath:
    """Polyline through control space; rows are nodes, columns coordinates.

    Phase columns are unwrapped so a path may wind several times.
    """

    nodes: np.ndarray
    num_squids: int

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, ndmin=2)
        if nodes.shape[1] != len(COORDS) * self.num_squids:
            raise ValueError(f"expected {len(COORDS) * self.num_squids} coordinates per node")
        if not np.isfinite(nodes).all():
            raise DomainError("non-finite path coordinates")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_waypoints(cls, waypoints: Sequence[ControlPoint]) -> "ControlPath":
        n = waypoints[0].num_squids
        return cls(np.array([p.to_vector() for p in waypoints]), n)

    @classmethod
    def trivial(cls, num_squids: int = 1) -> "ControlPath":
        return cls(np.zeros((1, len(COORDS) * num_squids)), num_squids)

    @property
    def coordinate_names(self) -> list[str]:
        return coordinate_names(self.num_squids)

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def point(self, i: int) -> ControlPoint:
        return ControlPoint.from_vector(self.nodes[i], self.num_squids)

    def points(self) -> list[ControlPoint]:
        return [self.point(i) for i in range(len(self))]

    def column(self, name: str, squid: int = 1) -> np.ndarray:
        return self.nodes[:, (squid - 1) * len(COORDS) + COORDS.index(name)]

    @property
    def closed(self) -> bool:
        d = self.nodes[-1] - self.nodes[0]
        phase_cols = [i for i, c in enumerate(self.coordinate_names) if c.startswith("phi")]
        d[phase_cols] = (d[phase_cols] + math.pi) % (2 * math.pi) - math.pi
        return bool(np.abs(d).max() < 1e-12)

    @property
    def starts_at_origin(self) -> bool:
        return self.point(0).is_origin(1e-12)

    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.nodes, axis=0), axis=1).sum())

    def reversed(self) -> "ControlPath":
        return ControlPath(self.nodes[::-1], self.num_squids)

    def then(self, other: "ControlPath") -> "ControlPath":
        """This path followed by ``other`` (which must start where this one ends)."""
        if np.abs(self.nodes[-1] - other.nodes[0]).max() > 1e-12:
            raise ValueError("paths do not join")
        return ControlPath(np.vstack([self.nodes, other.nodes[1:]]), self.num_squids)

    def repeated(self, times: int) -> "ControlPath":
        path = self
        for _ in range(times - 1):
            path = path.then(self)
        return path

    def validate(self, require_loop: bool = True) -> None:
        bad = []
        for i, name in enumerate(self.coordinate_names):
            if name.startswith(("xi", "theta")):
                col = self.nodes[:, i]
                if col.min() < 0 or col.max() >= _HALF_PI:
                    bad.append(name)
        if bad:
            raise DomainError(f"coordinates {bad} leave [0, pi/2)")
        if require_loop and not (self.closed and self.starts_at_origin):
            raise DomainError("gate paths must be closed loops starting at O")

    def resample(self, steps: int) -> np.ndarray:
        """About ``steps`` segments spread over the legs by length; every waypoint is kept."""
        seg = np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)
        total = seg.sum()
        if total == 0:
            return self.nodes[:1].copy()
        out = [self.nodes[:1]]
        for k, L in enumerate(seg):
            if L == 0:
                continue
            m = max(1, int(round(steps * L / total)))
            s = np.linspace(0.0, 1.0, m + 1)[1:, None]
            out.append(self.nodes[k] + s * (self.nodes[k + 1] - self.nodes[k]))
        return np.vstack(out)

    def densify(self, h_max: float) -> "ControlPath":
        seg = np.abs(np.diff(self.nodes, axis=0)).max(axis=1)
        out = [self.nodes[:1]]
        for k, L in enumerate(seg):
            m = max(1, int(math.ceil(L / h_max)))
            s = np.linspace(0.0, 1.0, m + 1)[1:, None]
            out.append(self.nodes[k] + s * (self.nodes[k + 1] - self.nodes[k]))
        return ControlPath(np.vstack(out), self.num_squids)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.coordinate_names)
            for row in self.nodes:
                w.writerow([repr(float(x)) for x in row])
        return path

    @classmethod
    def from_csv(cls, path, require_loop: bool = True) -> "ControlPath":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        for n in (1, 2):
            if header == coordinate_names(n):
                p = cls(np.array(body, dtype=float), n)
                p.validate(require_loop)
                return p
        raise DomainError(f"unrecognised path header {header}")


def rectangle(num_squids: int, first: tuple[str, float], second: tuple[str, float],
              base: ControlPoint | None = None) -> ControlPath:
    """O -> first -> first+second -> second -> O, with each move along one coordinate.

    ``first``/``second`` name coordinate columns (``coordinate_names``) and their excursions.
    """
    names = coordinate_names(num_squids)
    v0 = base.to_vector() if base is not None else np.zeros(len(names))
    i, a = names.index(first[0]), first[1]
    j, b = names.index(second[0]), second[1]
    pts = [v0.copy() for _ in range(5)]
    pts[1][i] += a
    pts[2][i] += a
    pts[2][j] += b
    pts[3][j] += b
    return ControlPath(np.array(pts), num_squids)


def check_ad_clearance(path: ControlPath, flagged: Sequence[ControlPoint],
                       radius: float = AD_EXCLUSION_RADIUS) -> float:
    """Smallest max-coordinate distance between path nodes and flagged points; raises if < radius."""
    if not flagged:
        return math.inf
    nodes = path.densify(radius / 2).nodes
    pts = np.array([p.to_vector() for p in flagged])
    d = np.abs(nodes[:, None, :] - pts[None, :, :]).max(axis=2).min()
    if d < radius:
        raise DomainError(
            f"path passes within {d:.3g} of the accidental-degeneracy sub-manifold (radius {radius})"
        )
    return float(d)


# -- connections -------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionSample:
    point: ControlPoint
    coordinate: str
    matrix: np.ndarray

    def antihermiticity_error(self) -> float:
        return float(np.abs(self.matrix + self.matrix.conj().T).max())


def _coord_index(mu, num_squids: int) -> tuple[int, str]:
    names = coordinate_names(num_squids)
    if isinstance(mu, str):
        return names.index(mu), mu
    return int(mu), names[int(mu)]


def _antihermitian(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.conj().T)


def _directional_connection(frame_fn: FrameFn, v0: np.ndarray, direction: np.ndarray,
                            num_squids: int, h: float) -> np.ndarray:
    """Central-difference D^dag dD along ``direction`` (unit vector)."""
    d0 = frame_fn(ControlPoint.from_vector(v0, num_squids)).vectors
    dp = frame_fn(ControlPoint.from_vector(v0 + h * direction, num_squids)).vectors
    dm = frame_fn(ControlPoint.from_vector(v0 - h * direction, num_squids)).vectors
    return _antihermitian(d0.conj().T @ (dp - dm) / (2 * h))


def wz_connection_fd(frame_fn: FrameFn, p: ControlPoint, mu, h: float = FD_STEP) -> ConnectionSample:
    """A_mu(p) by central differences of a smoothly gauged frame field."""
    i, name = _coord_index(mu, p.num_squids)
    v0 = p.to_vector()
    if name.startswith(("xi", "theta")):
        h = min(h, 0.5 * (_HALF_PI - 1e-6 - v0[i]))
        if h <= 0:
            raise StepSizeError(f"{name}={v0[i]} leaves no room for a finite-difference step")
    e = np.zeros_like(v0)
    e[i] = 1.0
    return ConnectionSample(p, name, _directional_connection(frame_fn, v0, e, p.num_squids, h))


_SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_SIGMA_Z = np.diag([1.0 + 0j, -1.0])


def wz_connection_analytic(p: ControlPoint, configuration: str, mu) -> ConnectionSample:
    """Closed-form connection components in the analytic dark-state gauge.

    configuration: "ry" (phi0 = phi1 = 0), "rz" (phi0 = xi = 0) or
    "cphase" (theta^(l) = phi1^(l) = phi0^(1) = 0).
    """
    i, name = _coord_index(mu, p.num_squids)
    tol = 1e-12
    if configuration == "ry":
        if p.num_squids != 1 or abs(p.phi0[0]) > tol or abs(p.phi1[0]) > tol:
            raise DomainError("ry configuration needs one SQUID with phi0 = phi1 = 0")
        if name == "xi":
            m = -1j * math.sin(p.theta[0]) * _SIGMA_Y
        elif name == "theta":
            m = np.zeros((2, 2), complex)
        else:
            raise DomainError(f"{name} is not a control coordinate of the ry configuration")
    elif configuration == "rz":
        if p.num_squids != 1 or abs(p.phi0[0]) > tol or abs(p.xi[0]) > tol:
            raise DomainError("rz configuration needs one SQUID with phi0 = xi = 0")
        if name == "phi1":
            m = 0.5j * math.sin(p.theta[0]) ** 2 * (np.eye(2) - _SIGMA_Z)
        elif name == "theta":
            m = np.zeros((2, 2), complex)
        else:
            raise DomainError(f"{name} is not a control coordinate of the rz configuration")
    elif configuration == "cphase":
        from .dark import is_cphase_config

        if not is_cphase_config(p):
            raise DomainError("cphase configuration needs theta = phi1 = 0 and phi0 of SQUID 1 = 0")
        m = np.zeros((4, 4), complex)
        if name == "phi0_2":
            s1sq, s2sq = math.sin(p.xi[0]) ** 2, math.sin(p.xi[1]) ** 2
            lam_sq = 2.0 - s1sq * s2sq
            m[0, 0] = 1j * (2.0 - s1sq) * s2sq / lam_sq
            m[2, 2] = 1j * s2sq
        elif name not in ("xi_1", "xi_2"):
            raise DomainError(f"{name} is not a control coordinate of the cphase configuration")
    else:
        raise ValueError(f"unknown configuration {configuration!r}")
    return ConnectionSample(p, name, m)


# -- holonomy ----------------------------------------------------------------


@dataclass(frozen=True)
class HolonomyResult:
    unitary: np.ndarray
    steps: int
    convergence: float
    unitarity_error: float
    convention: str

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]


def _transport(frame_fn: FrameFn, nodes: np.ndarray, num_squids: int, h: float,
               origin: np.ndarray) -> tuple[np.ndarray, float]:
    """Schroedinger-convention dark-space propagator along the polyline ``nodes``."""
    first = frame_fn(ControlPoint.from_vector(nodes[0], num_squids)).vectors
    k = first.shape[1]
    u = first.conj().T @ origin
    drift = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        step = b - a
        L = float(np.linalg.norm(step))
        if L == 0.0:
            continue
        conn = _directional_connection(frame_fn, 0.5 * (a + b), step / L, num_squids, h)
        u = expm(-conn * L) @ u
        drift = max(drift, float(np.abs(u.conj().T @ u - np.eye(k)).max()))
        if drift > 1e-6:
            raise StepSizeError(f"transport lost unitarity ({drift:.2e}); use more steps")
        u = polar_unitary(u)
    last = frame_fn(ControlPoint.from_vector(nodes[-1], num_squids)).vectors
    return origin.conj().T @ last @ u, drift


def path_ordered_holonomy(
    frame_fn: FrameFn,
    path: ControlPath,
    steps: int = DEFAULT_STEPS,
    convention: str = "geometric",
    h: float = FD_STEP,
    basis: Basis | None = None,
    estimate_error: bool = True,
) -> HolonomyResult:
    """Holonomy of the dark bundle around ``path``, in the computational basis.

    The connection is sampled at segment midpoints (directional central
    differences of ``frame_fn``), each step is exponentiated, and the running
    product is re-unitarised.  Gauge factors at both ends are included, so
    the result does not depend on the gauge of ``frame_fn`` as long as it is
    smooth along the path.
    """
    if convention not in ("geometric", "schrodinger"):
        raise ValueError("convention must be 'geometric' or 'schrodinger'")
    basis = basis if basis is not None else build_basis(path.num_squids)
    origin = basis.computational_frame()
    nodes = path.resample(steps)
    u, drift = _transport(frame_fn, nodes, path.num_squids, h, origin)
    conv = 0.0
    if estimate_error and len(nodes) > 2:
        u_half, _ = _transport(frame_fn, path.resample(max(1, steps // 2)), path.num_squids, h, origin)
        conv = float(np.abs(u - u_half).max())
    if convention == "geometric":
        u = u.conj().T
    err = float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
    return HolonomyResult(u, len(nodes) - 1, conv, max(err, drift), convention)


def connection_line_integral(frame_fn: FrameFn, path: ControlPath, steps: int = DEFAULT_STEPS,
                             h: float = FD_STEP) -> np.ndarray:
    """oint A along ``path`` (midpoint rule), without path ordering.

    For loops whose connection commutes along the way (one real 2x2 block,
    say) this is the generator of the holonomy with no 2*pi branch ambiguity.
    """
    nodes = path.resample(steps)
    total = None
    for a, b in zip(nodes[:-1], nodes[1:]):
        step = b - a
        L = float(np.linalg.norm(step))
        if L == 0.0:
            continue
        conn = _directional_connection(frame_fn, 0.5 * (a + b), step / L, path.num_squids, h) * L
        total = conn if total is None else total + conn
    if total is None:
        k = frame_fn(path.point(0)).dim
        return np.zeros((k, k), dtype=complex)
    return total


# -- closed-form loop angles -------------------------------------------------


def _line_integral(path: ControlPath, integrand, along: int) -> float:
    """sum over legs of int f(point) d(coordinate ``along``), Gauss-Legendre per leg."""
    total = 0.0
    s = 0.5 * (_GL_X + 1.0)
    w = 0.5 * _GL_W
    for a, b in zip(path.nodes[:-1], path.nodes[1:]):
        d = b[along] - a[along]
        if d == 0.0:
            continue
        pts = a[None, :] + s[:, None] * (b - a)[None, :]
        total += d * float(np.dot(w, integrand(pts)))
    return total


def loop_angle_ry(path: ControlPath) -> float:
    """phi(C) = -oint sin(theta) dxi."""
    i_xi = path.coordinate_names.index("xi")
    i_th = path.coordinate_names.index("theta")
    return -_line_integral(path, lambda x: np.sin(x[:, i_th]), i_xi)


def loop_angle_rz(path: ControlPath) -> float:
    """chi(C) = -1/2 oint sin^2(theta) dphi1."""
    i_th = path.coordinate_names.index("theta")
    i_f1 = path.coordinate_names.index("phi1")
    return -0.5 * _line_integral(path, lambda x: np.sin(x[:, i_th]) ** 2, i_f1)


def cphase_loop_angles(path: ControlPath) -> tuple[float, float]:
    """(eta, phi) with eta = oint sin^2 xi2 dphi0^(2) and
    phi = oint (2 - sin^2 xi1 - Lambda00^2) Lambda00^-2 sin^2 xi2 dphi0^(2).

    The bracket equals -sin^2 xi1 cos^2 xi2, which is what gets integrated.
    """
    names = path.coordinate_names
    i1, i2, ip = names.index("xi_1"), names.index("xi_2"), names.index("phi0_2")

    def phi_integrand(x):
        s1, s2 = np.sin(x[:, i1]) ** 2, np.sin(x[:, i2]) ** 2
        return -s1 * (1.0 - s2) * s2 / (2.0 - s1 * s2)

    eta = _line_integral(path, lambda x: np.sin(x[:, i2]) ** 2, ip)
    return eta, _line_integral(path, phi_integrand, ip)


# -- closed-form gates -------------------------------------------------------


def ry_gate(angle: float) -> np.ndarray:
    """exp(i angle sigma_y)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s], [-s, c]], dtype=complex)


def rz_gate(angle: float) -> np.ndarray:
    """exp(i angle sigma_z)."""
    return np.diag([np.exp(1j * angle), np.exp(-1j * angle)])


def rz_holonomy(chi: float) -> np.ndarray:
    """e^{-i chi} e^{i chi sigma_z} = diag(1, e^{-2 i chi})."""
    return np.exp(-1j * chi) * rz_gate(chi)


def cphase_holonomy(eta: float, phi: float) -> np.ndarray:
    """exp(i eta |a0><a0|_2) exp(i phi |a0 a0><a0 a0|) in the order a0a0, a0a1, a1a0, a1a1."""
    return np.diag([np.exp(1j * (eta + phi)), 1.0, np.exp(1j * eta), 1.0]).astype(complex)
