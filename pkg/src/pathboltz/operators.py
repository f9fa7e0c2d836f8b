"""Dense complex operators and their exponentials in complex "time" beta.

Matrices are plain complex numpy arrays. ``HermitianOperator`` wraps one that
has passed the Hermiticity check, and ``EvolutionParameter`` tags a complex
beta as thermal (real, positive), real-time (``beta = i t`` with hbar = 1) or
general.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


class ExponentialError(ArithmeticError):
    """Eigendecomposition residual too large to trust."""

    def __init__(self, residual: float):
        super().__init__(f"eigendecomposition residual {residual:.3e} exceeds tolerance")
        self.residual = residual


class ExponentialOverflow(ArithmeticError):
    """exp(-beta H) has entries beyond double range."""


def as_complex_matrix(m) -> np.ndarray:
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def _require_square(m: np.ndarray):
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")


def check_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = as_complex_matrix(m)
    _require_square(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def check_unitary(m, tol: float = UNITARY_TOL) -> bool:
    m = as_complex_matrix(m)
    _require_square(m)
    dev = m.conj().T @ m - np.eye(m.shape[0])
    return bool(np.max(np.abs(dev), initial=0.0) <= tol)


def frobenius_distance(a, b) -> float:
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        _require_square(m)
        if not check_hermitian(m):
            dev = np.max(np.abs(m - m.conj().T))
            raise ValueError(f"matrix is not Hermitian (max |M - M^H| = {dev:.3e})")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def diagonal_part(self) -> "HermitianOperator":
        return HermitianOperator(np.diag(np.diag(self.matrix)))

    def off_diagonal_part(self) -> "HermitianOperator":
        return HermitianOperator(self.matrix - np.diag(np.diag(self.matrix)))

    def is_diagonal(self) -> bool:
        return not np.any(self.matrix - np.diag(np.diag(self.matrix)))


class Interpretation(Enum):
    THERMAL = "thermal"
    REAL_TIME = "real_time"
    GENERAL = "general"


@dataclass(frozen=True)
class EvolutionParameter:
    beta: complex
    kind: Interpretation = Interpretation.GENERAL

    def __post_init__(self):
        beta = complex(self.beta)
        if not np.isfinite(beta):
            raise ValueError("beta must be finite")
        if self.kind is Interpretation.THERMAL and (beta.imag != 0 or beta.real <= 0):
            raise ValueError(f"thermal beta must be real and positive, got {beta}")
        if self.kind is Interpretation.REAL_TIME and beta.real != 0:
            raise ValueError(f"real-time beta must be purely imaginary, got {beta}")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def thermal(cls, beta: float) -> "EvolutionParameter":
        return cls(complex(beta, 0.0), Interpretation.THERMAL)

    @classmethod
    def real_time(cls, t: float) -> "EvolutionParameter":
        return cls(complex(0.0, t), Interpretation.REAL_TIME)

    def scaled(self, factor: float) -> "EvolutionParameter":
        kind = self.kind if factor > 0 else Interpretation.GENERAL
        return EvolutionParameter(self.beta * factor, kind)

    def conjugate(self) -> "EvolutionParameter":
        kind = Interpretation.GENERAL if self.kind is Interpretation.REAL_TIME else self.kind
        return EvolutionParameter(self.beta.conjugate(), kind)


def as_beta(beta) -> complex:
    if isinstance(beta, EvolutionParameter):
        return beta.beta
    return complex(beta)


def as_operator(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


def matrix_exponential(h, beta) -> np.ndarray:
    """exp(-beta H) through the eigendecomposition H = V diag(lam) V^H."""
    h = as_operator(h)
    b = as_beta(beta)
    lam, v = np.linalg.eigh(h.matrix)
    scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    residual = float(np.linalg.norm(h.matrix @ v - v * lam)) / scale
    if residual > 1e-8 * h.dim:
        raise ExponentialError(residual)
    with np.errstate(over="ignore", invalid="ignore"):
        u = (v * np.exp(-b * lam)) @ v.conj().T
    if not np.all(np.isfinite(u)):
        raise ExponentialOverflow(f"exp(-beta H) overflows (max |beta * eigenvalue| = {np.max(np.abs(b * lam)):.3e})")
    return u


def write_matrix_csv(m, fh=None) -> str:
    """Matrix CSV: ``rows,cols`` header and shape, then ``re,im`` per entry (row-major)."""
    m = as_complex_matrix(m)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rows", "cols"])
    w.writerow(m.shape)
    w.writerow(["re", "im"])
    for z in m.ravel():
        w.writerow([format(z.real, ".17g"), format(z.imag, ".17g")])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


class MatrixFormatError(ValueError):
    pass


def read_matrix_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2 or [c.strip() for c in rows[0]] != ["rows", "cols"]:
        raise MatrixFormatError("line 1: expected header 'rows,cols'")
    try:
        nr, nc = (int(c) for c in rows[1])
    except ValueError:
        raise MatrixFormatError(f"line 2: bad shape {rows[1]!r}") from None
    body = rows[2:]
    first_entry_line = 3
    if body and [c.strip() for c in body[0]] == ["re", "im"]:
        body = body[1:]
        first_entry_line = 4
    if len(body) != nr * nc:
        raise MatrixFormatError(f"expected {nr * nc} entries, found {len(body)}")
    vals = []
    for i, r in enumerate(body):
        try:
            re, im = (float(c) for c in r)
        except ValueError:
            raise MatrixFormatError(
                f"line {first_entry_line + i}: expected 're,im', got {','.join(r)!r}"
            ) from None
        vals.append(complex(re, im))
    return as_complex_matrix(np.array(vals, dtype=complex).reshape(nr, nc))
