from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from squidhqc.dynamics import evolve_kappa_batch, ideal_final_states, run_gate_protocol
from squidhqc.hilbert import build_basis
from squidhqc.model import reference_cphase_schedule, reference_device

FROZEN = Path(__file__).parent / "frozen"

# kappa values (units of g) shared by the fidelity tests; one batched integration covers all
KAPPA_SWEEP = (1e-3, 5e-4, 2.5e-4, 1.25e-4, 1e-4, 1e-5)


def frozen(name: str) -> dict:
    return json.loads((FROZEN / name).read_text())


@pytest.fixture(scope="session")
def basis2():
    return build_basis(2)


@pytest.fixture(scope="session")
def cphase_run():
    """Lossless CPHASE-scenario trajectory for the four computational states."""
    sched = reference_cphase_schedule()
    dev = reference_device()
    start = time.perf_counter()
    traj = run_gate_protocol(sched, dev)
    elapsed = time.perf_counter() - start
    ideal, u = ideal_final_states(sched, dev)
    return {"schedule": sched, "dev": dev, "traj": traj, "ideal": ideal, "u": u, "seconds": elapsed}


@pytest.fixture(scope="session")
def cphase_lossy(cphase_run):
    """No-jump final states for every kappa in KAPPA_SWEEP, shape (nk, D, 4)."""
    finals = evolve_kappa_batch(cphase_run["schedule"], cphase_run["dev"], KAPPA_SWEEP)
    return dict(zip(KAPPA_SWEEP, finals))


def random_unitary(rng, k):
    z = (rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
