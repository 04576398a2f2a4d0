"""Independent oracle for the two-SQUID CPHASE scenario.

Builds the Hamiltonian from Kronecker products (not from the package), integrates
with scipy's adaptive DOP853 and writes the values the tests freeze:
final computational amplitudes, int <n> dt per state, and no-jump fidelities.

    python tests/oracles/cphase_scenario_ivp.py > tests/frozen/cphase_scenario.json
"""

from __future__ import annotations

import json

import numpy as np
from scipy.integrate import simpson, solve_ivp

LEVELS = ["a0", "a1", "g", "e"]
N_MAX = 2
TAU = 144.0
T = 6 * TAU
G = (1.0, 0.5)
STATES = [("a0", "a0"), ("a0", "a1"), ("a1", "a0"), ("a1", "a1")]


def ket(level):
    v = np.zeros(4)
    v[LEVELS.index(level)] = 1.0
    return v


def op(up, lo):
    return np.outer(ket(up), ket(lo)).astype(complex)


I4, IC = np.eye(4), np.eye(N_MAX + 1)
a = np.diag(np.sqrt(np.arange(1, N_MAX + 1)), 1).astype(complex)
num = a.conj().T @ a


def on1(m):
    return np.kron(np.kron(m, I4), IC)


def on2(m):
    return np.kron(np.kron(I4, m), IC)


A = np.kron(np.kron(I4, I4), a)
N = np.kron(np.kron(I4, I4), num)
H_cav = G[0] * A @ on1(op("e", "g")) + G[1] * A @ on2(op("e", "g"))
H_cav = H_cav + H_cav.conj().T
X1, X2 = on1(op("e", "a0")), on2(op("e", "a0"))


def hamiltonian(t):
    env = np.exp(-(((t - 3 * TAU) / TAU) ** 2))
    o1 = 2.5 * env
    o2 = env * np.exp(1j * np.pi * (1 + np.tanh((t - 3 * TAU) / (0.75 * TAU))))
    h = o1 * X1 + o2 * X2
    return H_cav + h + h.conj().T


def index(l1, l2, n):
    return (LEVELS.index(l1) * 4 + LEVELS.index(l2)) * (N_MAX + 1) + n


def evolve(kappa):
    d = H_cav.shape[0]
    psi0 = np.zeros((d, 4), complex)
    for k, (l1, l2) in enumerate(STATES):
        psi0[index(l1, l2, 0), k] = 1.0
    decay = -0.5j * kappa * N

    def rhs(t, y):
        return (-1j * (hamiltonian(t) + decay) @ y.reshape(d, 4)).ravel()

    return solve_ivp(rhs, (0.0, T), psi0.ravel(), method="DOP853", rtol=1e-11, atol=1e-13,
                     dense_output=True), d


def main():
    sol, d = evolve(0.0)
    ts = np.linspace(0.0, T, 86401)
    ys = sol.sol(ts).reshape(d, 4, -1)
    nexp = np.einsum("i,ikt->kt", np.diag(N).real, np.abs(ys) ** 2)
    final = sol.y[:, -1].reshape(d, 4)
    amps = [final[index(l1, l2, 0), k] for k, (l1, l2) in enumerate(STATES)]
    out = {
        "photon_integral": [float(simpson(nexp[k], x=ts)) for k in range(4)],
        "final_amplitudes_re": [float(c.real) for c in amps],
        "final_amplitudes_im": [float(c.imag) for c in amps],
        "direct_fidelity": {},
    }
    for kappa in (1e-3, 1e-4, 1e-5):
        sk, _ = evolve(kappa)
        fk = sk.y[:, -1].reshape(d, 4)
        # ideal: lossless final computational amplitude
        out["direct_fidelity"][f"{kappa:g}"] = [
            float(abs(np.conj(amps[k]) / abs(amps[k]) * fk[index(l1, l2, 0), k]) ** 2)
            for k, (l1, l2) in enumerate(STATES)
        ]
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
