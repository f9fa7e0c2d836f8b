"""Sliced propagators, sums over discrete paths, and partition functions.

A ``TransferChain`` holds P kernels; kernel k maps slice boundary k to
boundary k + 1. Summing the product of kernel entries over every choice of
interior boundary indices (a path) gives the same number as the matrix
product of the kernels. Both routes are provided: ``amplitude_by_enumeration``
walks the paths explicitly and ``amplitude_by_contraction`` multiplies.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import reduce

import numpy as np

from ._parallel import complex_fsum, map_blocks
from .operators import (
    as_beta,
    as_complex_matrix,
    as_operator,
    frobenius_distance,
    matrix_exponential,
)
from .tables import ProbabilityTable

ENUMERATION_BUDGET = 10**7
BLOCK_SIZE = 1 << 14


class EnumerationBudgetExceeded(RuntimeError):
    pass


class NegativeKernelEntry(ValueError):
    """A kernel entry is negative or complex, so paths have no probability reading."""

    def __init__(self, entries):
        self.entries = entries
        shown = ", ".join(f"kernel {k}[{i},{j}] = {v}" for k, i, j, v in entries[:5])
        more = f" (+{len(entries) - 5} more)" if len(entries) > 5 else ""
        super().__init__(f"non-stoquastic kernel entries: {shown}{more}")


class SliceScheme(Enum):
    EXACT = "exact"
    SPLIT_FIRST_ORDER = "first"
    SPLIT_STRANG = "strang"


@dataclass(frozen=True, eq=False)
class TransferChain:
    kernels: tuple
    labels: tuple = ()
    scheme: SliceScheme | None = None

    def __post_init__(self):
        kernels = tuple(as_complex_matrix(k) for k in self.kernels)
        if not kernels:
            raise ValueError("a chain needs at least one kernel")
        for i, (a, b) in enumerate(zip(kernels, kernels[1:])):
            if a.shape[1] != b.shape[0]:
                raise ValueError(
                    f"kernel {i} has {a.shape[1]} columns but kernel {i + 1} has {b.shape[0]} rows"
                )
        for k in kernels:
            k.flags.writeable = False
        labels = tuple(self.labels) or tuple(f"b{i}" for i in range(len(kernels) + 1))
        if len(labels) != len(kernels) + 1:
            raise ValueError(f"need {len(kernels) + 1} boundary labels, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"boundary labels must be unique: {labels}")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "labels", labels)

    @property
    def P(self) -> int:
        return len(self.kernels)

    @property
    def boundary_dims(self) -> tuple[int, ...]:
        return (self.kernels[0].shape[0],) + tuple(k.shape[1] for k in self.kernels)

    def to_json(self) -> str:
        dims = self.boundary_dims
        payload = {
            "P": self.P,
            "d": dims[0] if len(set(dims)) == 1 else list(dims),
            "scheme": self.scheme.value if self.scheme else None,
            "labels": list(self.labels),
            "kernels": [
                [[[float(z.real), float(z.imag)] for z in row] for row in k] for k in self.kernels
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "TransferChain":
        payload = json.loads(text)
        kernels = [
            np.array([[complex(re, im) for re, im in row] for row in k], dtype=complex)
            for k in payload["kernels"]
        ]
        if len(kernels) != payload["P"]:
            raise ValueError(f"P = {payload['P']} but {len(kernels)} kernels given")
        scheme = SliceScheme(payload["scheme"]) if payload.get("scheme") else None
        return cls(tuple(kernels), tuple(payload.get("labels") or ()), scheme)


def _split_kernel(h, beta, scheme: SliceScheme) -> np.ndarray:
    if scheme is SliceScheme.EXACT:
        return matrix_exponential(h, beta)
    d, o = h.diagonal_part(), h.off_diagonal_part()
    if scheme is SliceScheme.SPLIT_FIRST_ORDER:
        return matrix_exponential(d, beta) @ matrix_exponential(o, beta)
    half = matrix_exponential(d, beta / 2)
    return half @ matrix_exponential(o, beta) @ half


def build_chain(h, beta, P: int, scheme: SliceScheme = SliceScheme.EXACT) -> TransferChain:
    """P identical slice kernels for exp(-(beta/P) H) under ``scheme``."""
    if P < 1:
        raise ValueError(f"slice count must be >= 1, got {P}")
    h = as_operator(h)
    kernel = _split_kernel(h, as_beta(beta) / P, SliceScheme(scheme))
    return TransferChain((kernel,) * P, scheme=SliceScheme(scheme))


def _check_path(chain: TransferChain, path):
    dims = chain.boundary_dims
    if len(path) != len(dims):
        raise ValueError(f"path needs {len(dims)} indices, got {len(path)}")
    for k, (i, d) in enumerate(zip(path, dims)):
        if not 0 <= i < d:
            raise IndexError(f"path index {i} at boundary {k} out of range [0, {d})")


def path_weight(chain: TransferChain, path) -> complex:
    _check_path(chain, path)
    w = 1.0 + 0j
    for k, kern in enumerate(chain.kernels):
        w *= kern[path[k], path[k + 1]]
    return complex(w)


def _interior_block_sum(chain, start, end, interior_dims, lo, hi):
    idx = np.unravel_index(np.arange(lo, hi), interior_dims)
    n = hi - lo
    cols = [np.full(n, start)] + list(idx) + [np.full(n, end)]
    w = np.ones(n, dtype=complex)
    for k, kern in enumerate(chain.kernels):
        w *= kern[cols[k], cols[k + 1]]
    return complex_fsum(w)


def amplitude_by_enumeration(chain: TransferChain, start: int, end: int,
                             budget: int = ENUMERATION_BUDGET) -> complex:
    """Sum of path weights over every interior index assignment.

    The path space is cut into fixed-size blocks; each block is summed with
    ``math.fsum`` and the block sums are combined in block order, so the
    result does not depend on the worker count.
    """
    dims = chain.boundary_dims
    _check_path(chain, (start,) + tuple(0 for _ in dims[1:-1]) + (end,))
    interior = dims[1:-1]
    total = int(np.prod(interior, dtype=np.int64)) if interior else 1
    if total > budget:
        raise EnumerationBudgetExceeded(
            f"{total} paths exceed the enumeration budget of {budget}; use contraction"
        )
    if not interior:
        return complex(chain.kernels[0][start, end])
    bounds = [(lo, min(lo + BLOCK_SIZE, total)) for lo in range(0, total, BLOCK_SIZE)]
    sums = map_blocks(
        lambda b: _interior_block_sum(chain, start, end, interior, *b), bounds
    )
    return complex_fsum(sums)


def contract(chain: TransferChain) -> np.ndarray:
    return reduce(np.matmul, chain.kernels)


def amplitude_by_contraction(chain: TransferChain, start: int, end: int) -> complex:
    return complex(contract(chain)[start, end])


def partition_function(h, beta) -> complex:
    """Z = Tr exp(-beta H)."""
    return complex(np.trace(matrix_exponential(h, beta)))


def trotter_error(h, beta, P: int, scheme: SliceScheme) -> float:
    chain = build_chain(h, beta, P, scheme)
    return frobenius_distance(contract(chain), matrix_exponential(h, beta))


def check_stoquastic(chain: TransferChain):
    bad = []
    for k, kern in enumerate(chain.kernels):
        mask = (kern.imag != 0) | (kern.real < 0)
        for i, j in zip(*np.nonzero(mask)):
            bad.append((k, int(i), int(j), complex(kern[i, j])))
    if bad:
        raise NegativeKernelEntry(bad)


def path_distribution(chain: TransferChain, start: int | None = None, end: int | None = None,
                      budget: int = ENUMERATION_BUDGET) -> ProbabilityTable:
    """Normalized path weights as a joint table over all slice boundaries.

    ``start``/``end`` = None leaves that endpoint free (it is summed into the
    table like any interior index); an integer conditions on it, which shows
    up as a point mass on that boundary variable.
    """
    check_stoquastic(chain)
    dims = chain.boundary_dims
    total = int(np.prod(dims, dtype=np.int64))
    if total > budget:
        raise EnumerationBudgetExceeded(
            f"{total} paths exceed the enumeration budget of {budget}"
        )
    joint = chain.kernels[0].real.copy()
    for kern in chain.kernels[1:]:
        joint = joint[..., None] * kern.real.reshape((1,) * (joint.ndim - 1) + kern.shape)
    if start is not None:
        _check_path(chain, (start,) + (0,) * (len(dims) - 1))
        mask = np.zeros(dims[0])
        mask[start] = 1.0
        joint = joint * mask.reshape((-1,) + (1,) * (len(dims) - 1))
    if end is not None:
        _check_path(chain, (0,) * (len(dims) - 1) + (end,))
        mask = np.zeros(dims[-1])
        mask[end] = 1.0
        joint = joint * mask
    if not joint.sum() > 0:
        raise ValueError("every path has zero weight")
    return ProbabilityTable.from_weights(chain.labels, joint)
