"""Time evolution under the driven (and photon-lossy) Hamiltonians, and gate fidelities."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dark import (
    FrameFn,
    analytic_dark_two_cphase,
    is_cphase_config,
    numeric_frame_field,
    numeric_zero_eigenspace,
)
from .errors import StepSizeError
from .hilbert import Basis, build_basis, number_operator
from .holonomy import ControlPath, path_ordered_holonomy
from .model import (
    COORDS,
    DeviceParams,
    PulseSchedule,
    hamiltonian_parts,
)

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
DEFAULT_STRIDE = 10
MAX_NORM_DT = 0.01  # required: dt * max ||H|| <= this
ADIABATIC_THRESHOLD = 100.0
_CHUNK = 256


@dataclass(frozen=True)
class DrivenHamiltonian:
    """H(t) = static + sum_k [c_k(t) X_k + conj(c_k(t)) X_k^dag].

    ``static`` may carry the non-Hermitian -i kappa/2 a^dag a term.
    ``coefficients`` maps a 1-D array of times to a (K, len(times)) complex array.
    """

    static: np.ndarray
    drives: tuple[np.ndarray, ...]
    coefficients: Callable[[np.ndarray], np.ndarray]

    def __call__(self, t: float) -> np.ndarray:
        return self.at(np.array([t]))[0]

    def at(self, times: np.ndarray) -> np.ndarray:
        """Stack of H(t) for every t in ``times``."""
        c = self.coefficients(np.asarray(times, dtype=float))
        d = self.static.shape[0]
        if not self.drives:
            return np.broadcast_to(self.static, (c.shape[1], d, d)).copy()
        # c X + conj(c) X^dag = Re(c) (X + X^dag) + Im(c) i (X - X^dag)
        x = np.array(self.drives)
        herm = np.concatenate([x + np.swapaxes(x.conj(), 1, 2), 1j * (x - np.swapaxes(x.conj(), 1, 2))])
        coef = np.concatenate([c.real, c.imag]).T
        return (coef @ herm.reshape(len(herm), d * d)).reshape(-1, d, d) + self.static

    def restricted(self, idx: np.ndarray) -> "DrivenHamiltonian":
        """The same Hamiltonian on the invariant block ``idx``."""
        sub = np.ix_(idx, idx)
        return DrivenHamiltonian(self.static[sub], tuple(x[sub] for x in self.drives), self.coefficients)

    @property
    def dim(self) -> int:
        return self.static.shape[0]


def protocol_hamiltonian(schedule, dev: DeviceParams, basis: Basis | None = None,
                         kappa: float | None = None) -> DrivenHamiltonian:
    """H(t) for a schedule on the given device; ``kappa`` defaults to ``dev.kappa``."""
    basis = basis if basis is not None else build_basis(dev.num_squids)
    parts = hamiltonian_parts(basis, dev)
    kappa = dev.kappa if kappa is None else kappa
    static = parts.static - 0.5j * kappa * parts.number if kappa else parts.static

    def coefficients(times):
        o0, o1 = schedule.rabi_arrays(times)
        return np.vstack([o0, o1])

    return DrivenHamiltonian(static, parts.drive0 + parts.drive1, coefficients)


@dataclass
class Trajectory:
    """Sampled evolution of one or several initial states (columns)."""

    times: np.ndarray
    norm2: np.ndarray  # (samples, m)
    photons: np.ndarray  # (samples, m), <psi|a^dag a|psi> of the unnormalised state
    state_times: np.ndarray
    states: np.ndarray  # (state samples, D, m)
    final: np.ndarray  # (D, m)
    dt: float
    labels: list[str] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def photon_integral(self) -> np.ndarray:
        """int <n> dt per initial state (trapezoid over the stored samples)."""
        return np.trapezoid(self.photons, self.times, axis=0)

    def to_csv(self, path, column: int = 0, basis: Basis | None = None) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t_over_ginv", "norm2", "n_expect"]
            if basis is not None:
                header += [f"pop_{lab}" for lab in basis.labels()]
            w.writerow(header)
            pops = None
            if basis is not None:
                # populations only where full states were stored
                pops = {float(t): np.abs(s[:, column]) ** 2 for t, s in zip(self.state_times, self.states)}
            for t, nn, ph in zip(self.times, self.norm2[:, column], self.photons[:, column]):
                row = [f"{t:.12g}", f"{nn:.12g}", f"{ph:.12g}"]
                if pops is not None:
                    p = pops.get(float(t))
                    row += [f"{x:.12g}" for x in p] if p is not None else [""] * basis.dim
                w.writerow(row)
        return path


def _rk4_chunked(ham: DrivenHamiltonian, psi: np.ndarray, t0: float, dt: float, n_steps: int,
                 stride: int, state_stride: int, number_diag: np.ndarray,
                 damping: np.ndarray | None = None):
    times, norms, phots, st_times, states = [], [], [], [], []

    def record(k, y):
        t = t0 + k * dt
        if k % stride == 0:
            p2 = np.abs(y) ** 2
            times.append(t)
            norms.append(p2.sum(axis=0))
            phots.append(number_diag @ p2)
        if k % state_stride == 0:
            st_times.append(t)
            states.append(y.copy())

    record(0, psi)
    chunk = max(8, min(_CHUNK, 2_000_000 // (2 * ham.dim**2)))
    k = 0
    while k < n_steps:
        m = min(chunk, n_steps - k)
        grid = t0 + dt * (k + 0.5 * np.arange(2 * m + 1))
        gen = -1j * ham.at(grid)
        half, full = 0.5 * dt, dt / 6.0
        for j in range(m):
            g0, gh, g1 = gen[2 * j], gen[2 * j + 1], gen[2 * j + 2]
            if damping is None:
                k1 = g0 @ psi
                k2 = gh @ (psi + half * k1)
                k3 = gh @ (psi + half * k2)
                k4 = g1 @ (psi + dt * k3)
            else:
                k1 = g0 @ psi + damping * psi
                y = psi + half * k1
                k2 = gh @ y + damping * y
                y = psi + half * k2
                k3 = gh @ y + damping * y
                y = psi + dt * k3
                k4 = g1 @ y + damping * y
            psi = psi + full * (k1 + 2.0 * (k2 + k3) + k4)
            n = k + j + 1
            if n % stride == 0 or n % state_stride == 0:
                record(n, psi)
        if not np.isfinite(psi).all():
            raise StepSizeError(f"non-finite amplitudes at t={t0 + (k + m) * dt:.6g}")
        k += m
    if (n_steps % stride) != 0:
        times.append(t0 + n_steps * dt)
        p2 = np.abs(psi) ** 2
        norms.append(p2.sum(axis=0))
        phots.append(number_diag @ p2)
    return (np.array(times), np.array(norms), np.array(phots), np.array(st_times),
            np.array(states), psi)


def max_generator_norm(ham, t_span, samples: int = 257) -> float:
    ts = np.linspace(t_span[0], t_span[1], samples)
    mats = ham.at(ts) if isinstance(ham, DrivenHamiltonian) else np.array([ham(t) for t in ts])
    return float(max(np.linalg.norm(m, 2) for m in mats))


def integrate(
    hamiltonian,
    psi0: np.ndarray,
    t_span: tuple[float, float],
    dt: float = DEFAULT_DT,
    stride: int = DEFAULT_STRIDE,
    state_stride: int | None = None,
    number_diag: np.ndarray | None = None,
    check_step: bool = True,
    subspace: np.ndarray | None = None,
    column_kappa: np.ndarray | None = None,
) -> Trajectory:
    """Fixed-step RK4 for i dpsi/dt = H(t) psi.

    ``hamiltonian`` is a ``DrivenHamiltonian`` or any callable t -> matrix.
    ``psi0`` may hold several initial states as columns.  ``number_diag`` is
    the diagonal of a^dag a used for the photon-number samples.  With
    ``subspace`` (indices of a block H leaves invariant) only that block is
    propagated; stored states are embedded back into the full space.
    ``column_kappa`` adds -i kappa_j/2 a^dag a to the generator of column j,
    so one pass can cover a whole loss sweep.
    """
    psi = np.array(psi0, dtype=complex)
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    n_steps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    dt = (t1 - t0) / n_steps
    if not isinstance(hamiltonian, DrivenHamiltonian):
        hamiltonian = _CallableHamiltonian(hamiltonian, psi.shape[0])
    if check_step and t1 > t0:
        hnorm = max_generator_norm(hamiltonian, (t0, t1))
        if column_kappa is not None and number_diag is not None:
            hnorm += 0.5 * float(np.max(column_kappa)) * float(np.max(number_diag))
        if dt * hnorm > MAX_NORM_DT:
            raise StepSizeError(
                f"dt={dt:.3g} too coarse: dt*max||H|| = {dt * hnorm:.3g} > {MAX_NORM_DT}"
            )
    full_dim = psi.shape[0]
    number_diag = np.zeros(full_dim) if number_diag is None else np.asarray(number_diag, dtype=float)
    if subspace is not None:
        subspace = np.asarray(subspace)
        outside = np.delete(psi, subspace, axis=0)
        if outside.size and np.abs(outside).max() > 1e-12:
            raise ValueError("initial state has weight outside the requested subspace")
        hamiltonian = hamiltonian.restricted(subspace)
        psi = psi[subspace]
        number_diag = number_diag[subspace]
    damping = None
    if column_kappa is not None:
        column_kappa = np.asarray(column_kappa, dtype=float)
        if column_kappa.shape != (psi.shape[1],):
            raise ValueError("column_kappa needs one value per state column")
        damping = -0.5 * number_diag[:, None] * column_kappa[None, :]
    state_stride = state_stride or max(stride, n_steps // 200 or 1)
    out = _rk4_chunked(hamiltonian, psi, t0, dt, n_steps, stride, state_stride, number_diag, damping)
    times, norms, phots, st_t, states, final = out
    if subspace is not None:
        states = _embed(states, subspace, full_dim, axis=1)
        final = _embed(final, subspace, full_dim, axis=0)
    return Trajectory(times, norms, phots, st_t, states, final, dt)


def _embed(a: np.ndarray, idx: np.ndarray, dim: int, axis: int) -> np.ndarray:
    shape = list(a.shape)
    shape[axis] = dim
    out = np.zeros(shape, dtype=complex)
    sl = [slice(None)] * a.ndim
    sl[axis] = idx
    out[tuple(sl)] = a
    return out


class _CallableHamiltonian(DrivenHamiltonian):
    def __init__(self, fn, dim):
        object.__setattr__(self, "static", np.zeros((dim, dim), complex))
        object.__setattr__(self, "drives", ())
        object.__setattr__(self, "coefficients", None)
        object.__setattr__(self, "_fn", fn)

    def at(self, times):
        return np.array([np.asarray(self._fn(t), dtype=complex) for t in np.atleast_1d(times)])


# -- schedules built from control paths --------------------------------------


def _smooth_progress(u):
    """Monotone 0 -> 1 with zero slope at both ends."""
    return u - np.sin(2 * np.pi * u) / (2 * np.pi)


@dataclass(frozen=True)
class PathSchedule:
    """Traverse a control path in time ``duration``, easing in and out of every waypoint."""

    path: ControlPath
    duration: float
    dev: DeviceParams

    @property
    def num_squids(self) -> int:
        return self.path.num_squids

    def points_at(self, times) -> np.ndarray:
        nodes = self.path.nodes
        seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if seg.sum() == 0:
            return np.repeat(nodes[:1], times.size, axis=0)
        edges = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum() * self.duration
        k = np.clip(np.searchsorted(edges, times, side="right") - 1, 0, len(seg) - 1)
        span = edges[k + 1] - edges[k]
        u = np.where(span > 0, (times - edges[k]) / np.where(span > 0, span, 1.0), 1.0)
        s = _smooth_progress(np.clip(u, 0.0, 1.0))[:, None]
        return nodes[k] + s * (nodes[k + 1] - nodes[k])

    def rabi_arrays(self, times):
        pts = self.points_at(times)
        n = self.num_squids
        o0 = np.zeros((n, len(pts)), complex)
        o1 = np.zeros_like(o0)
        for l in range(n):
            xi, th, f0, f1 = (pts[:, l * len(COORDS) + i] for i in range(len(COORDS)))
            g = self.dev.g[l]
            o0[l] = g * np.tan(xi) * np.exp(1j * f0)
            o1[l] = g * np.tan(th) / np.cos(xi) * np.exp(1j * f1)
        return o0, o1

    def control_path(self, dev: DeviceParams | None = None, samples: int | None = None) -> ControlPath:
        return self.path


def schedule_control_path(schedule: PulseSchedule, dev: DeviceParams, samples: int = 4001) -> ControlPath:
    """Control-space image of a pulse schedule (continuous phases, coordinates per SQUID)."""
    if isinstance(schedule, PathSchedule):
        return schedule.path
    ts = np.linspace(0.0, schedule.duration, samples)
    o0, o1 = schedule.rabi_arrays(ts)
    n = schedule.num_squids
    ph0 = np.zeros((n, samples))
    ph1 = np.zeros((n, samples))
    for ch in schedule.channels:
        (ph0 if ch.channel == "omega0" else ph1)[ch.squid] = ch.phase(ts)
    cols = []
    for l in range(n):
        g = dev.g[l]
        xi = np.arctan(np.abs(o0[l]) / g)
        theta = np.arctan(np.abs(o1[l]) * np.cos(xi) / g)
        cols += [xi, theta, ph0[l], ph1[l]]
    return ControlPath(np.array(cols).T, n)


# -- protocols and fidelities ------------------------------------------------


def computational_states(basis: Basis) -> tuple[np.ndarray, list[str]]:
    return basis.computational_frame(), basis.computational_labels()


def run_gate_protocol(
    schedule,
    dev: DeviceParams,
    psi0: np.ndarray | None = None,
    dt: float = DEFAULT_DT,
    stride: int = DEFAULT_STRIDE,
    basis: Basis | None = None,
    kappa: float | None = None,
    check_adiabatic: bool = False,
) -> Trajectory:
    """Integrate the schedule from ``psi0`` (default: every computational state, as columns)."""
    basis = basis if basis is not None else build_basis(dev.num_squids)
    labels = []
    if psi0 is None:
        psi0, labels = computational_states(basis)
    if check_adiabatic:
        rep = adiabaticity_check(schedule, dev, basis=basis)
        if rep.warning:
            warnings.warn(rep.warning, RuntimeWarning, stacklevel=2)
    ham = protocol_hamiltonian(schedule, dev, basis, kappa)
    sub = basis.invariant_subspace()
    inside = np.abs(np.delete(np.atleast_2d(np.asarray(psi0).T).T, sub, axis=0)).max(initial=0.0) == 0.0
    traj = integrate(ham, psi0, (0.0, schedule.duration), dt, stride,
                     number_diag=np.diag(number_operator(basis)).real,
                     subspace=sub if inside else None)
    traj.labels = labels
    return traj


def fidelity_perturbative(traj: Trajectory, kappa: float) -> np.ndarray:
    """F = 1 - kappa int_0^T <n> dt from a lossless trajectory, clipped to [0, 1]."""
    return np.clip(1.0 - kappa * traj.photon_integral(), 0.0, 1.0)


def default_frame_fn(dev: DeviceParams, path: ControlPath, basis: Basis | None = None) -> FrameFn:
    """Analytic CPHASE frames when the whole path is in that configuration, numeric otherwise."""
    if path.num_squids == 2 and all(is_cphase_config(p) for p in (path.point(0), path.point(len(path) // 2))):
        nodes = path.nodes
        if np.abs(nodes[:, [1, 3, 2, 5, 7]]).max() == 0.0:
            return lambda p: analytic_dark_two_cphase(p, basis)
    return numeric_frame_field(dev, basis)


def ideal_final_states(schedule, dev: DeviceParams, psi0: np.ndarray | None = None,
                       basis: Basis | None = None, steps: int = 2000,
                       frame_fn: FrameFn | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(states, U): adiabatic-transport prediction for the end of the schedule.

    U is the Schroedinger-convention holonomy in the computational basis; the
    returned states are U applied to the computational components of ``psi0``.
    """
    basis = basis if basis is not None else build_basis(dev.num_squids)
    if psi0 is None:
        psi0 = basis.computational_frame()
    path = schedule_control_path(schedule, dev)
    frame_fn = frame_fn or default_frame_fn(dev, path, basis)
    u = path_ordered_holonomy(frame_fn, path, steps=steps, convention="schrodinger",
                              basis=basis, estimate_error=False).unitary
    comp = basis.computational_frame()
    return comp @ (u @ (comp.conj().T @ psi0)), u


def fidelity_direct(schedule, dev_with_kappa: DeviceParams, psi0: np.ndarray,
                    ideal_final: np.ndarray, dt: float = DEFAULT_DT,
                    basis: Basis | None = None) -> np.ndarray:
    """|<ideal|psi_eff(T)>|^2 under the no-jump Hamiltonian (one value per column)."""
    traj = run_gate_protocol(schedule, dev_with_kappa, psi0, dt=dt, basis=basis)
    return overlap_fidelity(ideal_final, traj.final)


def evolve_kappa_batch(schedule, dev: DeviceParams, kappas, psi0: np.ndarray | None = None,
                       dt: float = DEFAULT_DT, basis: Basis | None = None) -> np.ndarray:
    """Final no-jump states for every kappa in ``kappas``: array (len(kappas), D, m)."""
    basis = basis if basis is not None else build_basis(dev.num_squids)
    if psi0 is None:
        psi0 = basis.computational_frame()
    psi0 = psi0 if psi0.ndim == 2 else psi0[:, None]
    kappas = np.asarray(kappas, dtype=float)
    m = psi0.shape[1]
    cols = np.tile(psi0, (1, len(kappas)))
    ham = protocol_hamiltonian(schedule, dev, basis, kappa=0.0)
    traj = integrate(ham, cols, (0.0, schedule.duration), dt, stride=max(1, int(round(1.0 / dt))),
                     number_diag=np.diag(number_operator(basis)).real,
                     subspace=basis.invariant_subspace(), column_kappa=np.repeat(kappas, m))
    return traj.final.reshape(psi0.shape[0], len(kappas), m).transpose(1, 0, 2)


def overlap_fidelity(ideal: np.ndarray, final: np.ndarray) -> np.ndarray:
    ideal = ideal if ideal.ndim == 2 else ideal[:, None]
    final = final if final.ndim == 2 else final[:, None]
    return np.abs(np.einsum("dm,dm->m", ideal.conj(), final)) ** 2


@dataclass(frozen=True)
class FidelityReport:
    label: str
    f_perturbative: float
    f_direct: float | None
    kappa: float
    duration: float
    photon_integral: float


@dataclass(frozen=True)
class AdiabaticityReport:
    min_gap: float
    duration: float
    threshold: float

    @property
    def product(self) -> float:
        return self.min_gap * self.duration

    @property
    def warning(self) -> str | None:
        if self.product < self.threshold:
            return (f"adiabaticity: min gap {self.min_gap:.3g} g times T = {self.product:.3g}"
                    f" is below {self.threshold:g}")
        return None


def adiabaticity_check(schedule, dev: DeviceParams, samples: int = 241,
                       threshold: float = ADIABATIC_THRESHOLD,
                       basis: Basis | None = None) -> AdiabaticityReport:
    """Smallest dark/bright gap along the schedule, and its product with T."""
    basis = basis if basis is not None else build_basis(dev.num_squids)
    ham = protocol_hamiltonian(schedule, dev, basis, kappa=0.0)
    sub = basis.invariant_subspace()
    nominal = 2**dev.num_squids
    gaps = []
    for h in ham.at(np.linspace(0.0, schedule.duration, samples)):
        w = np.sort(np.abs(np.linalg.eigvalsh(h[np.ix_(sub, sub)])))
        gaps.append(w[nominal])
    return AdiabaticityReport(float(min(gaps)), schedule.duration, threshold)


def dark_leakage(traj: Trajectory, schedule, dev: DeviceParams, basis: Basis | None = None,
                 column: int = 0) -> np.ndarray:
    """1 - |P_dark psi|^2 / |psi|^2 at the stored state samples."""
    basis = basis if basis is not None else build_basis(dev.num_squids)
    ham = protocol_hamiltonian(schedule, dev, basis, kappa=0.0)
    out = []
    for t, psi in zip(traj.state_times, traj.states):
        fr = numeric_zero_eigenspace(ham(t), basis)
        v = psi[:, column]
        out.append(1.0 - np.linalg.norm(fr.vectors.conj().T @ v) ** 2 / np.vdot(v, v).real)
    return np.array(out)
