"""Normalized joint distributions over named discrete variables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMALIZATION_TOL = 1e-12


class UnnormalizedTable(ValueError):
    pass


@dataclass(frozen=True)
class ProbabilityTable:
    """Joint distribution; ``masses`` has one axis per variable, in order."""

    variables: tuple[str, ...]
    masses: np.ndarray

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float)
        variables = tuple(self.variables)
        if masses.ndim != len(variables):
            raise ValueError(
                f"{len(variables)} variables but masses have {masses.ndim} axes"
            )
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        if not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        total = masses.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise UnnormalizedTable(f"masses sum to {total!r}, not 1")
        masses.flags.writeable = False
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_weights(cls, variables, weights) -> "ProbabilityTable":
        """Normalize nonnegative weights into a table."""
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise ValueError("weights must have positive total mass")
        return cls(tuple(variables), weights / total)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return self.masses.shape

    def axis(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; have {self.variables}") from None

    def marginal(self, keep) -> "ProbabilityTable":
        """Sum out every variable not in ``keep``; result follows ``keep`` order."""
        keep = list(keep)
        axes = [self.axis(k) for k in keep]
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated variable in {keep}")
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        summed = self.masses.sum(axis=drop)
        remaining = [i for i in range(len(self.variables)) if i in axes]
        order = [remaining.index(a) for a in axes]
        summed = np.transpose(summed, order) if summed.ndim else summed
        return ProbabilityTable(tuple(keep), summed / summed.sum())

    def rows(self):
        """Yield ``(index_tuple, mass)`` in C order."""
        for idx in np.ndindex(*self.cardinalities):
            yield idx, float(self.masses[idx])


def total_variation(p, q) -> float:
    p = p.masses if isinstance(p, ProbabilityTable) else np.asarray(p)
    q = q.masses if isinstance(q, ProbabilityTable) else np.asarray(q)
    if p.size != q.size:
        raise ValueError("tables have different sizes")
    return 0.5 * float(np.abs(p.ravel() - q.ravel()).sum())
