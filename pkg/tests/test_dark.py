from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squidhqc.dark import (
    DarkFrame,
    alignment_residual,
    analytic_dark_single,
    analytic_dark_two_cphase,
    cphase_grid,
    detect_accidental_degeneracy,
    energy_gap,
    gauge_align,
    lambda00,
    numeric_frame_field,
    numeric_zero_eigenspace,
    single_grid,
)
from squidhqc.errors import DegeneracyResolutionError, DomainError, GaugeDiscontinuityError
from squidhqc.hilbert import build_basis
from squidhqc.model import ControlPoint, DeviceParams, hamiltonian_at, reference_device

B1, B2 = build_basis(1), build_basis(2)
DEV1 = DeviceParams((1.0,), (0.0,))
ang = st.floats(0.0, math.pi / 2 - 1e-3)
ph = st.floats(0.0, 2 * math.pi)


def projector_distance(a: DarkFrame, b: DarkFrame) -> float:
    return float(np.abs(a.projector() - b.projector()).max())


def test_single_at_origin_and_quarter_pi():
    fr = analytic_dark_single(ControlPoint.origin(1), B1)
    assert np.array_equal(fr.vectors, B1.computational_frame())
    fr = analytic_dark_single(ControlPoint.single(math.pi / 4), B1)
    d0 = (B1.ket("a0", 0) - B1.ket("g", 1)) / math.sqrt(2)
    assert np.allclose(fr.vectors[:, 0], d0)
    assert np.allclose(fr.vectors[:, 1], B1.ket("a1", 0))


def test_two_at_origin_and_lambda():
    fr = analytic_dark_two_cphase(ControlPoint.origin(2), B2)
    assert np.array_equal(fr.vectors, B2.computational_frame())
    assert lambda00(math.pi / 4, math.pi / 4) == pytest.approx(math.sqrt(1.75))
    with pytest.raises(DomainError):
        analytic_dark_two_cphase(ControlPoint.two(theta=(0.1, 0.0)), B2)
    with pytest.raises(DomainError):
        analytic_dark_two_cphase(ControlPoint.two(phi0=(0.3, 0.0)), B2)


@settings(max_examples=50, deadline=None)
@given(ang, ang, ph, ph)
def test_single_dark_states_annihilated(xi, th, f0, f1):
    p = ControlPoint.single(xi, th, f0, f1)
    fr = analytic_dark_single(p, B1)
    h = hamiltonian_at(p, DEV1, B1)
    scale = max(1.0, np.linalg.norm(h, 2))
    assert fr.residual(h) <= 1e-10 * scale
    assert fr.orthonormality_error() <= 1e-10
    assert projector_distance(fr, numeric_zero_eigenspace(h, B1, scale=scale)) <= 1e-7


@settings(max_examples=50, deadline=None)
@given(ang, ang, ph)
def test_two_qubit_dark_states_annihilated(x1, x2, f):
    p = ControlPoint.two(xi=(x1, x2), phi0=(0.0, f))
    fr = analytic_dark_two_cphase(p, B2)
    h = hamiltonian_at(p, reference_device(), B2)
    scale = max(1.0, np.linalg.norm(h, 2))
    assert fr.residual(h) <= 1e-9 * scale
    assert fr.orthonormality_error() <= 1e-10
    num = numeric_zero_eigenspace(h, B2, scale=scale)
    assert num.dim == 4
    assert projector_distance(fr, num) <= 1e-7


def test_numeric_kernel_examples():
    p = ControlPoint.two(xi=(0.5, 0.7))
    assert numeric_zero_eigenspace(hamiltonian_at(p, reference_device(), B2), B2).dim == 4
    assert numeric_zero_eigenspace(np.zeros((5, 5))).dim == 5
    equal = DeviceParams((1.0, 1.0), (0.0, 0.0))
    assert numeric_zero_eigenspace(hamiltonian_at(ControlPoint.origin(2), equal, B2), B2).dim == 6


def test_ambiguous_window_raises_with_both_dims():
    h = np.diag([0.0, 1e-8, 1.0])
    with pytest.raises(DegeneracyResolutionError) as info:
        numeric_zero_eigenspace(h)
    assert info.value.candidate_dims == (1, 2)


def test_gauge_align_examples():
    fr = analytic_dark_single(ControlPoint.single(0.4, 0.3, 0.2, 0.1), B1)
    same = gauge_align(fr, fr)
    assert alignment_residual(same, fr) < 1e-12
    shifted = DarkFrame(fr.vectors * np.exp(1j * np.array([0.7, -1.9])), B1)
    assert alignment_residual(gauge_align(shifted, fr), fr) < 1e-12
    # idempotent
    once = gauge_align(shifted, fr)
    assert alignment_residual(gauge_align(once, fr), once) < 1e-12


def test_gauge_align_rejects_orthogonal_frames():
    a = DarkFrame(B1.computational_frame(), B1)
    b = DarkFrame(np.eye(B1.dim)[:, [B1.index("g", 1), B1.index("e", 0)]].astype(complex), B1)
    with pytest.raises(GaugeDiscontinuityError):
        gauge_align(a, b)


def test_numeric_frame_field_is_single_valued_at_origin():
    ff = numeric_frame_field(reference_device(), B2)
    assert np.allclose(ff(ControlPoint.origin(2)).vectors, B2.computational_frame(), atol=1e-14)
    p = ControlPoint.two(xi=(0.9, 0.4), theta=(0.0, 0.5))
    fr = ff(p)
    assert fr.residual(hamiltonian_at(p, reference_device(), B2)) < 1e-12


def test_numeric_frame_field_reproduces_analytic_gauge():
    ff = numeric_frame_field(DEV1, B1, anchor=lambda q: analytic_dark_single(q, B1))
    p = ControlPoint.single(0.8, 0.6, 0.3, -0.4)
    assert alignment_residual(ff(p), analytic_dark_single(p, B1)) < 1e-10


def test_energy_gap_examples():
    p = ControlPoint.single(math.pi / 4)
    h = hamiltonian_at(p, DEV1, B1)
    fr = numeric_zero_eigenspace(h, B1)
    assert energy_gap(h, fr, B1) == pytest.approx(math.sqrt(2))
    h0 = hamiltonian_at(ControlPoint.origin(1), DEV1, B1)
    assert energy_gap(h0, numeric_zero_eigenspace(h0, B1), B1) == pytest.approx(1.0)
    assert energy_gap(3 * h, fr, B1) == pytest.approx(3 * math.sqrt(2))


def test_degeneracy_maps():
    rep = detect_accidental_degeneracy(DEV1, single_grid(5), B1)
    assert not rep.flagged.any() and set(rep.kernel_dims) == {2}
    equal = DeviceParams((1.0, 1.0), (0.0, 0.0))
    rep = detect_accidental_degeneracy(equal, cphase_grid(5), B2)
    flagged = rep.flagged_points()
    assert flagged and flagged[0].is_origin()
    assert rep.kernel_dims[0] == 6
    # identical SQUIDs: exchange symmetry keeps the equal-angle diagonal degenerate
    for i, p in enumerate(rep.points):
        symmetric = p.xi[0] == p.xi[1] and p.phi0[0] == p.phi0[1]
        assert rep.kernel_dims[i] == (6 if symmetric else 4)
    o = [ControlPoint.origin(2)]
    for dev in (DeviceParams((1.0, 1.0), (0.3, 0.3)), reference_device()):
        assert not detect_accidental_degeneracy(dev, o, B2).flagged.any()


def test_degeneracy_csv(tmp_path):
    rep = detect_accidental_degeneracy(reference_device(), cphase_grid(3), B2)
    path = rep.to_csv(tmp_path / "deg.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0][-3:] == ["kernel_dim", "min_gap_over_g", "flagged"]
    assert rows[0][0] == "xi_1"
    assert len(rows) == 10
