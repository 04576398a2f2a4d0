from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unitary
from squidhqc.errors import DomainError, InfeasibleTargetError
from squidhqc.gates import (
    U_CNOT,
    CnotLoopShape,
    GateTarget,
    _rz2,
    closed_form_gate,
    gate_distance,
    is_cnot_config,
    peel_cnot_dressings,
    synthesize,
    synthesize_cphase,
    verify_cnot,
    verify_gate,
)
from squidhqc.holonomy import ControlPath, ry_gate


def test_gate_distance_examples():
    assert gate_distance(np.eye(2), np.eye(2)) == 0.0
    assert gate_distance(np.eye(2), 1j * np.eye(2)) < 1e-8
    # orthogonal in Hilbert-Schmidt: distance 1
    assert gate_distance(np.eye(2), np.diag([1, -1])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gate_distance(np.eye(2), np.ones((2, 2)))
    with pytest.raises(ValueError):
        gate_distance(np.eye(2), np.eye(4))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]), st.floats(0, 2 * math.pi))
def test_gate_distance_is_a_phase_invariant_metric(seed, k, alpha):
    rng = np.random.default_rng(seed)
    a, b, c = (random_unitary(rng, k) for _ in range(3))
    assert gate_distance(a, b) == pytest.approx(gate_distance(b, a), abs=1e-12)
    assert gate_distance(a, np.exp(1j * alpha) * b) == pytest.approx(gate_distance(a, b), abs=1e-7)
    assert gate_distance(a, c) <= gate_distance(a, b) + gate_distance(b, c) + 1e-7
    assert 0.0 <= gate_distance(a, b) <= 1.0


def test_gate_target_validation():
    with pytest.raises(ValueError):
        GateTarget("swap", 1.0)
    with pytest.raises(ValueError):
        GateTarget("ry")
    with pytest.raises(ValueError):
        GateTarget("cnot", 0.3)
    assert GateTarget("cphase", 0.5).num_squids == 2


@pytest.mark.parametrize(
    "kind,angle",
    [("ry", 0.5), ("ry", -2.0), ("ry", 3.0), ("rz", 0.7), ("rz", -1.3), ("rz", 4.0),
     ("cphase", math.pi), ("cphase", -0.4), ("cphase", 1.0)],
)
def test_synthesis_round_trip(kind, angle):
    target = GateTarget(kind, angle)
    path = synthesize(target)
    path.validate()
    verdict = verify_gate(target, path)
    assert verdict.passed, verdict.distance
    assert np.abs(closed_form_gate(kind, path) - target.ideal()).max() < 1e-12
    key = {"ry": "phi", "rz": "chi", "cphase": "phi"}[kind]
    assert verdict.angles[key] == pytest.approx(angle, abs=1e-9)


def test_zero_targets_give_trivial_loops():
    for kind in ("ry", "rz", "cphase"):
        path = synthesize(GateTarget(kind, 0.0))
        assert len(path) == 1
        assert verify_gate(GateTarget(kind, 0.0), path).distance < 1e-8


def test_cphase_eta_cancels():
    eta = verify_gate(GateTarget("cphase", 0.8), synthesize_cphase(0.8)).angles["eta"]
    assert abs(eta) < 1e-9


def test_infeasible_cphase():
    with pytest.raises(InfeasibleTargetError):
        synthesize_cphase(1.0, xi2=0.0)


def test_cnot_matrix_properties():
    assert np.array_equal(U_CNOT @ U_CNOT.conj().T, np.eye(4))
    assert np.array_equal(U_CNOT.imag, np.zeros((4, 4)))
    assert np.array_equal(U_CNOT @ U_CNOT, np.eye(4))


def test_peeling_inverts_dressing():
    theta = 0.37
    ry2 = np.kron(np.eye(2), ry_gate(theta))
    dressed = (np.exp(-0.25j * math.pi) * ry2 @ _rz2(math.pi / 4, 1) @ _rz2(math.pi / 4, 2)
               @ U_CNOT @ _rz2(-math.pi / 4, 2))
    assert np.abs(peel_cnot_dressings(dressed, theta) - U_CNOT).max() < 1e-14


def test_trivial_cnot_loop_residual():
    v = verify_cnot(ControlPath.trivial(2))
    assert v.residual == pytest.approx(-math.pi / 2)
    assert not v.passed


def test_cnot_configuration_check():
    shape = CnotLoopShape()
    assert is_cnot_config(shape.path(0.5))
    bad = synthesize_cphase(0.5)
    assert not is_cnot_config(bad)
    with pytest.raises(DomainError):
        verify_cnot(bad)


def test_verdict_json(tmp_path):
    target = GateTarget("ry", 0.5)
    v = verify_gate(target, synthesize(target))
    v.path_file = "ry_path.csv"
    data = json.loads(v.write_json(tmp_path / "v.json").read_text())
    assert set(data) == {"target", "path_file", "angles", "residual", "distance", "pass"}
    assert set(data["angles"]) == {"phi", "chi", "eta", "theta_C"}
    assert data["target"] == {"kind": "ry", "angle": 0.5}
    assert data["pass"] is True and data["residual"] is None
