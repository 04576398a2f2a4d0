"""Truncated SQUID(s) x cavity Hilbert space and elementary operators.

Each rf-SQUID carries the four levels ``a0, a1, g, e``; the cavity is a
single mode truncated at ``n_max`` photons.  Basis kets are ordered
lexicographically by (SQUID 1 level, SQUID 2 level, photon number) with the
level order ``a0 < a1 < g < e``.  Operators are dense ``complex128`` arrays and
states are plain 1-D (or column-stacked 2-D) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import TruncationError

LEVELS = ("a0", "a1", "g", "e")
MIN_PHOTONS = {1: 1, 2: 2}


@dataclass(frozen=True, order=True)
class BasisState:
    levels: tuple[str, ...]
    photons: int

    def __post_init__(self):
        for lv in self.levels:
            if lv not in LEVELS:
                raise ValueError(f"unknown SQUID level {lv!r}")
        if self.photons < 0:
            raise ValueError("photon number must be non-negative")

    @property
    def label(self) -> str:
        return ".".join(self.levels) + f".n{self.photons}"

    @classmethod
    def from_label(cls, label: str) -> "BasisState":
        *levels, n = label.split(".")
        if not n.startswith("n"):
            raise ValueError(f"malformed basis label {label!r}")
        return cls(tuple(levels), int(n[1:]))

    @property
    def excitations(self) -> int:
        # conserved by every term of the interaction Hamiltonians
        return sum(lv != "g" for lv in self.levels) + self.photons


@dataclass(frozen=True)
class Basis:
    num_squids: int
    n_max: int
    states: tuple[BasisState, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, levels, photons: int = 0) -> int:
        if isinstance(levels, BasisState):
            return self._index[levels]
        if isinstance(levels, str):
            levels = (levels,)
        try:
            return self._index[BasisState(tuple(levels), photons)]
        except KeyError:
            raise KeyError(f"{levels}, n={photons} not in basis (n_max={self.n_max})") from None

    def ket(self, levels, photons: int = 0) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(levels, photons)] = 1.0
        return v

    def labels(self) -> list[str]:
        return [s.label for s in self.states]

    def computational_labels(self) -> list[str]:
        """Short labels ``a0a1`` etc. of the qubit computational states."""
        return ["".join(c) for c in product(("a0", "a1"), repeat=self.num_squids)]

    def computational_indices(self) -> np.ndarray:
        """Indices of |a_i ...>|0>_c in lexicographic qubit order."""
        return np.array(
            [self.index(c, 0) for c in product(("a0", "a1"), repeat=self.num_squids)]
        )

    def computational_frame(self) -> np.ndarray:
        """Columns are the computational kets; the dark frame at the origin."""
        idx = self.computational_indices()
        frame = np.zeros((self.dim, len(idx)), dtype=complex)
        frame[idx, np.arange(len(idx))] = 1.0
        return frame

    def invariant_subspace(self) -> np.ndarray:
        """Indices of the excitation sector containing the computational kets.

        For two SQUIDs this is the 16-state subspace I; for one SQUID it is
        {|a0,0>, |a1,0>, |g,1>, |e,0>}.
        """
        return np.array(
            [i for i, s in enumerate(self.states) if s.excitations == self.num_squids]
        )


def build_basis(num_squids: int, n_max: int | None = None) -> Basis:
    if num_squids not in MIN_PHOTONS:
        raise ValueError("num_squids must be 1 or 2")
    if n_max is None:
        n_max = MIN_PHOTONS[num_squids]
    if n_max < MIN_PHOTONS[num_squids]:
        raise TruncationError(
            f"n_max={n_max} cannot hold the {MIN_PHOTONS[num_squids]}-photon dark-state "
            f"components of a {num_squids}-SQUID system"
        )
    states = tuple(
        BasisState(tuple(levels), n)
        for levels in product(LEVELS, repeat=num_squids)
        for n in range(n_max + 1)
    )
    return Basis(num_squids, n_max, states)


def photon_annihilator(basis: Basis) -> np.ndarray:
    a = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, s in enumerate(basis.states):
        if s.photons > 0:
            i = basis.index(s.levels, s.photons - 1)
            a[i, j] = np.sqrt(s.photons)
    return a


def number_operator(basis: Basis) -> np.ndarray:
    return np.diag([complex(s.photons) for s in basis.states])


def level_transition(basis: Basis, squid_index: int, upper: str, lower: str) -> np.ndarray:
    """Matrix of |upper><lower| on SQUID ``squid_index`` (0-based), identity elsewhere."""
    if not 0 <= squid_index < basis.num_squids:
        raise IndexError(f"squid_index {squid_index} out of range for {basis.num_squids} SQUID(s)")
    if upper == lower:
        raise ValueError("transition levels must differ")
    if upper not in LEVELS or lower not in LEVELS:
        raise ValueError(f"unknown level in ({upper!r}, {lower!r})")
    op = np.zeros((basis.dim, basis.dim), dtype=complex)
    for j, s in enumerate(basis.states):
        if s.levels[squid_index] == lower:
            levels = list(s.levels)
            levels[squid_index] = upper
            op[basis.index(levels, s.photons), j] = 1.0
    return op


def expectation(op: np.ndarray, psi: np.ndarray) -> complex:
    psi = np.asarray(psi)
    if op.shape[1] != psi.shape[0]:
        raise ValueError(f"dimension mismatch: operator {op.shape}, state {psi.shape}")
    return complex(np.vdot(psi, op @ psi))


def is_hermitian(op: np.ndarray, rtol: float = 1e-12) -> bool:
    scale = max(np.abs(op).max(), 1.0)
    return bool(np.abs(op - op.conj().T).max() <= rtol * scale)
