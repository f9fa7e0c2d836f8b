"""k-local Pauli Hamiltonians on qubit registers.

Basis index convention: site 0 is the most significant bit, and bit 0 is the
sigma^z = +1 state.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .entropy import SimplicialComplex
from .operators import HermitianOperator
from .rbm import RbmParams
from .tables import ProbabilityTable

MAX_DENSE_QUBITS = 14


class RegisterTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class PauliTerm:
    sites: tuple[int, ...]
    axes: tuple[str, ...]
    coefficient: float

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        axes = tuple(str(a).lower() for a in self.axes)
        if not sites:
            raise ValueError("a Pauli term needs at least one site")
        if len(sites) != len(axes):
            raise ValueError(f"{len(sites)} sites but {len(axes)} axes")
        if len(set(sites)) != len(sites):
            raise ValueError(f"duplicate site in term {sites}")
        if any(a not in "xyz" or len(a) != 1 for a in axes):
            raise ValueError(f"axes must be x, y or z, got {axes}")
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def locality(self) -> int:
        return len(self.sites)


@dataclass(frozen=True)
class PauliHamiltonian:
    qubits: int
    terms: tuple[PauliTerm, ...] = ()

    def __post_init__(self):
        if self.qubits < 1:
            raise ValueError("need at least one qubit")
        terms = tuple(self.terms)
        for t in terms:
            if max(t.sites) >= self.qubits or min(t.sites) < 0:
                raise ValueError(f"term sites {t.sites} outside register of {self.qubits}")
        object.__setattr__(self, "terms", terms)

    def is_diagonal(self) -> bool:
        return all(set(t.axes) <= {"z"} for t in self.terms)

    def to_json(self) -> str:
        return json.dumps({
            "qubits": self.qubits,
            "terms": [
                {"sites": list(t.sites), "axes": list(t.axes), "coeff": t.coefficient}
                for t in self.terms
            ],
        })

    @classmethod
    def from_json(cls, text: str) -> "PauliHamiltonian":
        d = json.loads(text)
        terms = []
        for i, t in enumerate(d.get("terms", [])):
            try:
                terms.append(PauliTerm(tuple(t["sites"]), tuple(t["axes"]), t["coeff"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"terms[{i}]: {e}") from None
        return cls(int(d["qubits"]), tuple(terms))


def _term_action(term: PauliTerm, n: int):
    """Pauli string P as P|b> = phase(b) |b xor flip>."""
    idx = np.arange(2**n)
    flip = 0
    phase = np.ones(2**n, dtype=complex)
    for s, ax in zip(term.sites, term.axes):
        bit = n - 1 - s
        z = 1 - 2 * ((idx >> bit) & 1)
        if ax in "xy":
            flip |= 1 << bit
        if ax == "z":
            phase *= z
        elif ax == "y":
            # Y|0> = i|1>, Y|1> = -i|0>
            phase *= 1j * z
    return flip, phase


def _check_register(n: int):
    if n > MAX_DENSE_QUBITS:
        raise RegisterTooLarge(f"{n} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")


def diagonal_energies(h: PauliHamiltonian) -> np.ndarray:
    """Classical energies of every basis state for a z-only Hamiltonian."""
    if not h.is_diagonal():
        raise ValueError("Hamiltonian has x or y terms")
    _check_register(h.qubits)
    e = np.zeros(2**h.qubits)
    for t in h.terms:
        _, phase = _term_action(t, h.qubits)
        e += t.coefficient * phase.real
    return e


def build_dense(h: PauliHamiltonian) -> HermitianOperator:
    n = h.qubits
    _check_register(n)
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for t in h.terms:
        flip, phase = _term_action(t, n)
        m[cols ^ flip, cols] += t.coefficient * phase
    return HermitianOperator(m)


def thermal_diagonal(h: PauliHamiltonian, beta: float) -> ProbabilityTable:
    """Computational-basis populations of exp(-beta H)/Z, one variable per qubit."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    _check_register(h.qubits)
    names = tuple(f"q{i}" for i in range(h.qubits))
    shape = (2,) * h.qubits
    if h.is_diagonal():
        e = diagonal_energies(h)
        w = np.exp(-beta * (e - e.min()))
    else:
        lam, v = np.linalg.eigh(build_dense(h).matrix)
        w = (np.abs(v) ** 2) @ np.exp(-beta * (lam - lam.min()))
    return ProbabilityTable.from_weights(names, w.reshape(shape))


def rbm_to_pauli(params: RbmParams) -> PauliHamiltonian:
    """z-only Hamiltonian on n + p qubits: visible spins first, then hidden."""
    n = params.n
    terms = [PauliTerm((i,), ("z",), c) for i, c in enumerate(params.a) if c != 0]
    terms += [PauliTerm((n + j,), ("z",), c) for j, c in enumerate(params.b) if c != 0]
    terms += [
        PauliTerm((i, n + j), ("z", "z"), params.W[i, j])
        for i in range(n)
        for j in range(params.p)
        if params.W[i, j] != 0
    ]
    return PauliHamiltonian(n + params.p, tuple(terms))


def klocal_to_complex(h: PauliHamiltonian) -> SimplicialComplex:
    """Face-closed complex with one simplex per term support, vertices named ``q{i}``."""
    return SimplicialComplex.from_maximal(
        [tuple(f"q{s}" for s in t.sites) for t in h.terms]
    )
