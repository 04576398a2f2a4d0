"""Dark (zero-eigenvalue) frames: analytic formulas, numeric kernels, gauge fixing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import DegeneracyResolutionError, DomainError, GaugeDiscontinuityError
from .hilbert import Basis, build_basis
from .model import ControlPoint, DeviceParams, coordinate_names, hamiltonian_at

KERNEL_TOL = 1e-9
# eigenvalues between tol and tol * AMBIGUITY_FACTOR make the kernel dimension ill-defined
AMBIGUITY_FACTOR = 1e3
MIN_OVERLAP_SV = 1e-6


@dataclass(frozen=True)
class DarkFrame:
    """Orthonormal columns spanning the dark subspace at ``point``."""

    vectors: np.ndarray
    basis: Basis | None = field(default=None, repr=False)
    point: ControlPoint | None = None
    gauge_anchor: str = "native"

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T

    def residual(self, h: np.ndarray) -> float:
        """max_i ||H D_i||."""
        return float(np.linalg.norm(h @ self.vectors, axis=0).max())

    def orthonormality_error(self) -> float:
        gram = self.vectors.conj().T @ self.vectors
        return float(np.abs(gram - np.eye(self.dim)).max())


def _basis_for(num_squids: int, basis: Basis | None) -> Basis:
    if basis is None:
        return build_basis(num_squids)
    if basis.num_squids != num_squids:
        raise ValueError("basis has the wrong number of SQUIDs")
    return basis


def analytic_dark_single(p: ControlPoint, basis: Basis | None = None) -> DarkFrame:
    """|D0>, |D1> of the single-SQUID Hamiltonian, as functions of (xi, theta, phi0, phi1)."""
    if p.num_squids != 1:
        raise ValueError("single-qubit dark states need a one-SQUID control point")
    basis = _basis_for(1, basis)
    xi, th, f0, f1 = p.xi[0], p.theta[0], p.phi0[0], p.phi1[0]
    sx, cx, st, ct = math.sin(xi), math.cos(xi), math.sin(th), math.cos(th)
    a0, a1, g1 = basis.index("a0", 0), basis.index("a1", 0), basis.index("g", 1)
    d = np.zeros((basis.dim, 2), dtype=complex)
    d[a0, 0] = cx
    d[g1, 0] = -sx * np.exp(1j * f0)
    d[a0, 1] = -st * sx * np.exp(1j * (f1 - f0))
    d[g1, 1] = -st * cx * np.exp(1j * f1)
    d[a1, 1] = ct
    return DarkFrame(d, basis, p, "analytic")


def is_cphase_config(p: ControlPoint, atol: float = 1e-12) -> bool:
    return p.num_squids == 2 and all(
        abs(x) <= atol for x in p.theta + p.phi1 + (p.phi0[0],)
    )


def analytic_dark_two_cphase(p: ControlPoint, basis: Basis | None = None) -> DarkFrame:
    """|D00>, |D01>, |D10>, |D11> for theta^(l) = phi1^(l) = phi0^(1) = 0."""
    if not is_cphase_config(p):
        raise DomainError("CPHASE dark states need theta = phi1 = 0 and phi0 of SQUID 1 = 0")
    basis = _basis_for(2, basis)
    s1, c1 = math.sin(p.xi[0]), math.cos(p.xi[0])
    s2, c2 = math.sin(p.xi[1]), math.cos(p.xi[1])
    ph = np.exp(1j * p.phi0[1])
    lam = math.sqrt(2.0 - s1**2 * s2**2)
    r2 = math.sqrt(2.0)
    ix = basis.index
    d = np.zeros((basis.dim, 4), dtype=complex)
    d[ix(("g", "g"), 2), 0] = s1 * s2 * ph / lam
    d[ix(("a0", "g"), 1), 0] = -r2 * c1 * s2 * ph / lam
    d[ix(("a0", "a0"), 0), 0] = r2 * c1 * c2 / lam
    d[ix(("g", "a0"), 1), 0] = -r2 * s1 * c2 / lam
    d[ix(("a0", "a1"), 0), 1] = c1
    d[ix(("g", "a1"), 1), 1] = -s1
    d[ix(("a1", "a0"), 0), 2] = c2
    d[ix(("a1", "g"), 1), 2] = -s2 * ph
    d[ix(("a1", "a1"), 0), 3] = 1.0
    return DarkFrame(d, basis, p, "analytic")


def lambda00(xi1: float, xi2: float) -> float:
    return math.sqrt(2.0 - math.sin(xi1) ** 2 * math.sin(xi2) ** 2)


def _restricted_eigh(h: np.ndarray, subspace: np.ndarray | None):
    if subspace is None:
        w, v = np.linalg.eigh(h)
        return w, v
    hs = h[np.ix_(subspace, subspace)]
    w, vs = np.linalg.eigh(hs)
    v = np.zeros((h.shape[0], vs.shape[1]), dtype=complex)
    v[subspace] = vs
    return w, v


def kernel_dimensions(eigvals: np.ndarray, tol_rel: float = KERNEL_TOL, scale: float = 1.0):
    """(dim at tol, dim at the widened tolerance)."""
    a = np.abs(eigvals)
    return int((a <= tol_rel * scale).sum()), int((a <= tol_rel * scale * AMBIGUITY_FACTOR).sum())


def numeric_zero_eigenspace(
    h: np.ndarray,
    basis: Basis | None = None,
    tol_rel: float = KERNEL_TOL,
    scale: float = 1.0,
    restrict: bool = True,
    point: ControlPoint | None = None,
) -> DarkFrame:
    """Orthonormal basis of eigenvectors with |E| <= tol_rel * scale.

    With a basis and ``restrict`` the eigenproblem is solved inside the
    excitation sector holding the computational kets (subspace I), which
    keeps decoupled photon-number sectors out of the frame.
    """
    sub = basis.invariant_subspace() if (basis is not None and restrict) else None
    w, v = _restricted_eigh(h, sub)
    dim, dim_wide = kernel_dimensions(w, tol_rel, scale)
    if dim != dim_wide:
        raise DegeneracyResolutionError(
            f"eigenvalues between {tol_rel * scale:.1e} and {tol_rel * scale * AMBIGUITY_FACTOR:.1e}"
            f" make the kernel dimension ambiguous ({dim} or {dim_wide})",
            candidate_dims=(dim, dim_wide),
        )
    keep = np.abs(w) <= tol_rel * scale
    return DarkFrame(v[:, keep], basis, point, "numeric")


def polar_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def gauge_align(frame: DarkFrame, reference) -> DarkFrame:
    """Rotate ``frame`` inside its span to best match ``reference``.

    Returns frame @ W with W the unitary polar factor of frame^dag reference,
    which maximises Re tr(reference^dag frame W).
    """
    ref = reference.vectors if isinstance(reference, DarkFrame) else np.asarray(reference)
    if ref.shape != frame.vectors.shape:
        raise ValueError(f"frame shapes differ: {frame.vectors.shape} vs {ref.shape}")
    m = frame.vectors.conj().T @ ref
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.min() < MIN_OVERLAP_SV:
        raise GaugeDiscontinuityError(
            f"overlap with reference frame is singular (smallest singular value {sv.min():.2e});"
            " reduce the step"
        )
    w = polar_unitary(m)
    anchor = reference.gauge_anchor if isinstance(reference, DarkFrame) else "array"
    return DarkFrame(frame.vectors @ w, frame.basis, frame.point, f"aligned:{anchor}")


def alignment_residual(frame: DarkFrame, reference: DarkFrame) -> float:
    return float(np.abs(frame.vectors - reference.vectors).max())


FrameFn = Callable[[ControlPoint], DarkFrame]


def numeric_frame_field(
    dev: DeviceParams,
    basis: Basis | None = None,
    anchor: FrameFn | None = None,
    tol_rel: float = KERNEL_TOL,
) -> FrameFn:
    """Frame function built from numeric kernels, in a smooth single-valued gauge.

    Each kernel is aligned to ``anchor(point)`` when given, otherwise to the
    computational kets (the frame at O).  Aligning to the analytic frame
    reproduces the analytic gauge exactly.
    """
    basis = _basis_for(dev.num_squids, basis)
    origin = basis.computational_frame()

    def frame_fn(p: ControlPoint) -> DarkFrame:
        h = hamiltonian_at(p, dev, basis)
        fr = numeric_zero_eigenspace(h, basis, tol_rel, point=p)
        if fr.dim != origin.shape[1]:
            raise DegeneracyResolutionError(
                f"kernel dimension {fr.dim} at {p} (expected {origin.shape[1]}):"
                " point lies on or near the accidental-degeneracy sub-manifold",
                candidate_dims=(fr.dim, origin.shape[1]),
            )
        ref = anchor(p) if anchor is not None else DarkFrame(origin, basis, None, "origin")
        return gauge_align(fr, ref)

    return frame_fn


def energy_gap(h: np.ndarray, frame: DarkFrame, basis: Basis | None = None) -> float:
    """Smallest |E| of h on the complement of the dark span (inside subspace I if a basis is given)."""
    basis = basis if basis is not None else frame.basis
    if basis is not None:
        sub = basis.invariant_subspace()
        emb = np.eye(h.shape[0], dtype=complex)[:, sub]
    else:
        emb = np.eye(h.shape[0], dtype=complex)
    # orthonormal complement of the frame within the embedding space
    proj = emb - frame.vectors @ (frame.vectors.conj().T @ emb)
    u, s, _ = np.linalg.svd(proj, full_matrices=False)
    q = u[:, s > 0.5]
    w = np.linalg.eigvalsh(q.conj().T @ h @ q)
    return float(np.abs(w).min()) if w.size else math.inf


@dataclass
class DegeneracyReport:
    num_squids: int
    points: list[ControlPoint]
    kernel_dims: np.ndarray
    min_gaps: np.ndarray
    ambiguous: np.ndarray
    nominal_dim: int

    @property
    def flagged(self) -> np.ndarray:
        return (self.kernel_dims > self.nominal_dim) | self.ambiguous

    def flagged_points(self) -> list[ControlPoint]:
        return [p for p, f in zip(self.points, self.flagged) if f]

    def to_csv(self, path) -> Path:
        path = Path(path)
        names = coordinate_names(self.num_squids)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["kernel_dim", "min_gap_over_g", "flagged"])
            for p, d, gap, f in zip(self.points, self.kernel_dims, self.min_gaps, self.flagged):
                w.writerow([f"{x:.12g}" for x in p.to_vector()] + [int(d), f"{gap:.12g}", int(f)])
        return path


def detect_accidental_degeneracy(
    dev: DeviceParams,
    grid: Iterable[ControlPoint],
    basis: Basis | None = None,
    tol_rel: float = KERNEL_TOL,
) -> DegeneracyReport:
    """Kernel dimension and dark/bright gap at every grid point (inside subspace I)."""
    basis = _basis_for(dev.num_squids, basis)
    nominal = 2**dev.num_squids
    sub = basis.invariant_subspace()
    points, dims, gaps, amb = [], [], [], []
    for p in grid:
        h = hamiltonian_at(p, dev, basis)
        w = np.sort(np.abs(np.linalg.eigvalsh(h[np.ix_(sub, sub)])))
        d, d_wide = kernel_dimensions(w, tol_rel)
        points.append(p)
        dims.append(max(d, d_wide) if d != d_wide else d)
        amb.append(d != d_wide)
        gaps.append(float(w[nominal]) if w.size > nominal else math.inf)
    return DegeneracyReport(
        dev.num_squids, points, np.array(dims), np.array(gaps), np.array(amb, dtype=bool), nominal
    )


def cphase_grid(n: int = 7, xi_max: float = 1.3, phase: float = 0.0) -> list[ControlPoint]:
    """Square grid in (xi1, xi2) at fixed phi0^(2), CPHASE configuration."""
    xs = np.linspace(0.0, xi_max, n)
    return [ControlPoint.two(xi=(a, b), phi0=(0.0, phase)) for a in xs for b in xs]


def single_grid(n: int = 7, max_angle: float = 1.3, phi0: float = 0.0, phi1: float = 0.0) -> list[ControlPoint]:
    xs = np.linspace(0.0, max_angle, n)
    return [ControlPoint.single(a, b, phi0, phi1) for a in xs for b in xs]
