"""Interaction-picture Hamiltonians, control coordinates and pulse schedules.

All rates are in units of a reference coupling ``g`` and all times in units
of ``1/g``.  ``DeviceParams.from_si`` converts rates given in s^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError
from .hilbert import Basis, level_transition, number_operator, photon_annihilator

SINGULAR_MARGIN = 1e-6
ENVELOPE_CUTOFF = 1e-6


@dataclass(frozen=True)
class DeviceParams:
    g: tuple[float, ...]
    delta: tuple[float, ...]
    kappa: float = 0.0
    g_ref_si: float | None = None  # s^-1 value of the unit rate, if known

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        object.__setattr__(self, "delta", tuple(float(x) for x in self.delta))
        if len(self.g) != len(self.delta) or len(self.g) not in (1, 2):
            raise ValueError("g and delta must both have one entry per SQUID (1 or 2)")
        if any(x <= 0 for x in self.g):
            raise ValueError("couplings g must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def num_squids(self) -> int:
        return len(self.g)

    @classmethod
    def from_si(cls, g, delta, kappa=0.0, g_ref=None) -> "DeviceParams":
        """Normalise s^-1 rates by ``g_ref`` (default: the first coupling)."""
        g_ref = float(g_ref if g_ref is not None else g[0])
        return cls(
            tuple(x / g_ref for x in g),
            tuple(x / g_ref for x in delta),
            kappa / g_ref,
            g_ref_si=g_ref,
        )

    def with_kappa(self, kappa: float) -> "DeviceParams":
        return DeviceParams(self.g, self.delta, kappa, self.g_ref_si)


def reference_device(kappa: float = 0.0) -> DeviceParams:
    """g1 = 2 g2 = g = 1.8e8 s^-1, zero detunings."""
    return DeviceParams.from_si((1.8e8, 0.9e8), (0.0, 0.0), kappa * 1.8e8)


COORDS = ("xi", "theta", "phi0", "phi1")


@dataclass(frozen=True)
class ControlPoint:
    """Angles (xi, theta, phi0, phi1) for every SQUID.

    Phases are kept unwrapped so that a path can wind; ``wrapped()`` maps
    them into [0, 2 pi).
    """

    xi: tuple[float, ...]
    theta: tuple[float, ...]
    phi0: tuple[float, ...]
    phi1: tuple[float, ...]

    def __post_init__(self):
        n = len(self.xi)
        for name in COORDS:
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != n:
                raise ValueError("every coordinate needs one entry per SQUID")
            if not all(math.isfinite(v) for v in vals):
                raise DomainError(f"non-finite {name}")
            object.__setattr__(self, name, vals)

    @property
    def num_squids(self) -> int:
        return len(self.xi)

    @classmethod
    def origin(cls, num_squids: int = 1) -> "ControlPoint":
        z = (0.0,) * num_squids
        return cls(z, z, z, z)

    @classmethod
    def single(cls, xi=0.0, theta=0.0, phi0=0.0, phi1=0.0) -> "ControlPoint":
        return cls((xi,), (theta,), (phi0,), (phi1,))

    @classmethod
    def two(cls, xi=(0.0, 0.0), theta=(0.0, 0.0), phi0=(0.0, 0.0), phi1=(0.0, 0.0)) -> "ControlPoint":
        return cls(tuple(xi), tuple(theta), tuple(phi0), tuple(phi1))

    def to_vector(self) -> np.ndarray:
        return np.array(
            [getattr(self, c)[l] for l in range(self.num_squids) for c in COORDS]
        )

    @classmethod
    def from_vector(cls, v, num_squids: int) -> "ControlPoint":
        v = np.asarray(v, dtype=float).reshape(num_squids, len(COORDS))
        return cls(*(tuple(v[:, k]) for k in range(len(COORDS))))

    def wrapped(self) -> "ControlPoint":
        tau = 2 * math.pi
        return ControlPoint(
            self.xi, self.theta,
            tuple(p % tau for p in self.phi0),
            tuple(p % tau for p in self.phi1),
        )

    def in_domain(self) -> bool:
        lim = math.pi / 2
        return all(0.0 <= x < lim for x in self.xi + self.theta)

    def is_origin(self, atol: float = 0.0) -> bool:
        return all(abs(x) <= atol for x in self.xi + self.theta)


def coordinate_names(num_squids: int) -> list[str]:
    if num_squids == 1:
        return list(COORDS)
    return [f"{c}_{l + 1}" for l in range(num_squids) for c in COORDS]


@dataclass(frozen=True)
class RabiSet:
    omega0: tuple[complex, ...]
    omega1: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "omega0", tuple(complex(x) for x in self.omega0))
        object.__setattr__(self, "omega1", tuple(complex(x) for x in self.omega1))
        if len(self.omega0) != len(self.omega1):
            raise ValueError("omega0 and omega1 need one entry per SQUID")
        if not all(np.isfinite(x) for x in self.omega0 + self.omega1):
            raise ValueError("Rabi frequencies must be finite")

    @classmethod
    def zero(cls, num_squids: int) -> "RabiSet":
        return cls((0j,) * num_squids, (0j,) * num_squids)


def rabi_from_control_point(p: ControlPoint, dev: DeviceParams) -> RabiSet:
    """Omega0 = g tan(xi) e^{i phi0}, Omega1 = g tan(theta) sec(xi) e^{i phi1} per SQUID.

    Both channels of SQUID l use that SQUID's own coupling g^(l).
    """
    if p.num_squids != dev.num_squids:
        raise ValueError("control point and device disagree on the number of SQUIDs")
    lim = math.pi / 2 - SINGULAR_MARGIN
    o0, o1 = [], []
    for l in range(p.num_squids):
        xi, th = p.xi[l], p.theta[l]
        if abs(xi) >= lim or abs(th) >= lim:
            raise DomainError(f"xi={xi}, theta={th} too close to pi/2 (tan/sec diverge)")
        g = dev.g[l]
        o0.append(g * math.tan(xi) * np.exp(1j * p.phi0[l]))
        o1.append(g * math.tan(th) / math.cos(xi) * np.exp(1j * p.phi1[l]))
    return RabiSet(tuple(o0), tuple(o1))


@dataclass(frozen=True)
class HamiltonianParts:
    """Constant operator pieces; H = static + sum_l (Omega X_l + h.c.)."""

    basis: Basis
    static: np.ndarray
    drive0: tuple[np.ndarray, ...]  # |e><a0| per SQUID
    drive1: tuple[np.ndarray, ...]  # |e><a1| per SQUID
    number: np.ndarray = field(repr=False)

    def hamiltonian(self, rabi: RabiSet) -> np.ndarray:
        h = self.static.copy()
        for om, x in zip(rabi.omega0 + rabi.omega1, self.drive0 + self.drive1):
            if om != 0:
                term = om * x
                h += term + term.conj().T
        return h


@lru_cache(maxsize=32)
def _parts(basis: Basis, g: tuple, delta: tuple) -> HamiltonianParts:
    a = photon_annihilator(basis)
    static = np.zeros((basis.dim, basis.dim), dtype=complex)
    d0, d1 = [], []
    for l in range(basis.num_squids):
        cav = g[l] * a @ level_transition(basis, l, "e", "g")
        static += cav + cav.conj().T
        static += delta[l] * level_transition(basis, l, "e", "g") @ level_transition(basis, l, "g", "e")
        d0.append(level_transition(basis, l, "e", "a0"))
        d1.append(level_transition(basis, l, "e", "a1"))
    parts = HamiltonianParts(basis, static, tuple(d0), tuple(d1), number_operator(basis))
    for arr in (parts.static, parts.number, *parts.drive0, *parts.drive1):
        arr.setflags(write=False)
    return parts


def hamiltonian_parts(basis: Basis, dev: DeviceParams) -> HamiltonianParts:
    if basis.num_squids != dev.num_squids:
        raise ValueError("basis and device disagree on the number of SQUIDs")
    return _parts(basis, dev.g, dev.delta)


def single_qubit_hamiltonian(rabi: RabiSet, dev: DeviceParams, basis: Basis) -> np.ndarray:
    if basis.num_squids != 1:
        raise ValueError("single-qubit Hamiltonian needs a one-SQUID basis")
    return hamiltonian_parts(basis, dev).hamiltonian(rabi)


def two_qubit_hamiltonian(rabi: RabiSet, dev: DeviceParams, basis: Basis) -> np.ndarray:
    if basis.num_squids != 2:
        raise ValueError("two-qubit Hamiltonian needs a two-SQUID basis")
    return hamiltonian_parts(basis, dev).hamiltonian(rabi)


def hamiltonian_at(p: ControlPoint, dev: DeviceParams, basis: Basis) -> np.ndarray:
    return hamiltonian_parts(basis, dev).hamiltonian(rabi_from_control_point(p, dev))


def effective_hamiltonian(h: np.ndarray, kappa: float, basis: Basis) -> np.ndarray:
    """No-jump generator H - i (kappa/2) a^dag a."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if kappa == 0:
        return h
    return h - 0.5j * kappa * number_operator(basis)


# -- pulse schedules ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantPhase:
    value: float = 0.0

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value)


@dataclass(frozen=True)
class TanhPhase:
    """phase(t) = scale * pi * [1 + tanh((t - center) / width)]."""

    scale_pi: float
    width: float
    center: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale_pi * np.pi * (1.0 + np.tanh((t - self.center) / self.width))


@dataclass(frozen=True)
class GaussianChannel:
    """Omega(t) = amp * exp(-((t - center)/width)^2) * exp(i phase(t))."""

    channel: str  # "omega0" or "omega1"
    squid: int  # 0-based
    amp: float
    center: float
    width: float
    phase: ConstantPhase | TanhPhase = ConstantPhase()

    def __post_init__(self):
        if self.channel not in ("omega0", "omega1"):
            raise ValueError(f"unknown channel {self.channel!r}")
        if self.width <= 0:
            raise ValueError("Gaussian width must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        env = self.amp * np.exp(-(((t - self.center) / self.width) ** 2))
        env = np.where(np.abs(env) < ENVELOPE_CUTOFF, 0.0, env)
        return env * np.exp(1j * self.phase(t))


@dataclass(frozen=True)
class PulseSchedule:
    num_squids: int
    channels: tuple[GaussianChannel, ...]
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for ch in self.channels:
            if not 0 <= ch.squid < self.num_squids:
                raise ValueError(f"channel on SQUID {ch.squid + 1} but only {self.num_squids} SQUID(s)")

    def rabi_arrays(self, times) -> tuple[np.ndarray, np.ndarray]:
        """Complex (num_squids, len(times)) arrays for Omega0 and Omega1."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        o0 = np.zeros((self.num_squids, times.size), dtype=complex)
        o1 = np.zeros_like(o0)
        for ch in self.channels:
            (o0 if ch.channel == "omega0" else o1)[ch.squid] += ch(times)
        return o0, o1

    def endpoint_amplitude(self) -> float:
        o0, o1 = self.rabi_arrays([0.0, self.duration])
        return float(max(np.abs(o0).max(initial=0.0), np.abs(o1).max(initial=0.0)))

    def scaled(self, factor: float) -> "PulseSchedule":
        """Stretch every time scale by ``factor``."""
        chans = []
        for ch in self.channels:
            ph = ch.phase
            if isinstance(ph, TanhPhase):
                ph = TanhPhase(ph.scale_pi, ph.width * factor, ph.center * factor)
            chans.append(GaussianChannel(ch.channel, ch.squid, ch.amp, ch.center * factor,
                                         ch.width * factor, ph))
        return PulseSchedule(self.num_squids, tuple(chans), self.duration * factor)


def schedule_sample(s, t: float) -> RabiSet:
    if not 0.0 <= t <= s.duration:
        raise ValueError(f"t={t} outside [0, {s.duration}]")
    o0, o1 = s.rabi_arrays([t])
    return RabiSet(tuple(o0[:, 0]), tuple(o1[:, 0]))


def reference_cphase_schedule(tau: float = 144.0, phase_center: float | None = None) -> PulseSchedule:
    """CPHASE pulse pair in units of 1/g, with g the coupling of SQUID 1.

    Omega0^(1) = 2.5 g G(t), Omega0^(2) = g G(t) exp(i phi(t)) with
    G(t) = exp(-((t - 3 tau)/tau)^2) and phi(t) = pi [1 + tanh((t - t_c)/(0.75 tau))].
    The phase step is centred on the pulse peak (t_c = 3 tau) unless
    ``phase_center`` says otherwise; the run lasts 6 tau.
    """
    center = 3.0 * tau
    t_c = center if phase_center is None else phase_center
    chans = (
        GaussianChannel("omega0", 0, 2.5, center, tau),
        GaussianChannel("omega0", 1, 1.0, center, tau, TanhPhase(1.0, 0.75 * tau, t_c)),
    )
    return PulseSchedule(2, chans, 6.0 * tau)
