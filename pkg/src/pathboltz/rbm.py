"""Restricted Boltzmann machines over +/-1 spins.

Energy E(v, h) = a.v + b.h + v.W.h with every spin a sigma^z eigenvalue. The
parameters are dimensionless (beta already absorbed), so the Gibbs weight is
exp(-E). To convert from {0, 1} units s, use v = 1 - 2 s.

Configurations are indexed with spin 0 as the most significant bit and bit
value 0 meaning spin +1, which matches the qubit ordering of
``pathboltz.ising``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import LayeredNetwork, LayerKind, LayerSpec
from .tables import ProbabilityTable

SPIN_BUDGET = 24


class EnumerationBudgetExceeded(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RbmParams:
    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        W = np.array(self.W, dtype=float)
        if a.size < 1 or b.size < 1:
            raise ValueError("need at least one visible and one hidden spin")
        if W.shape != (a.size, b.size):
            raise ValueError(f"W must have shape {(a.size, b.size)}, got {W.shape}")
        for x in (a, b, W):
            if not np.all(np.isfinite(x)):
                raise ValueError("RBM parameters must be finite")
            x.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def p(self) -> int:
        return self.b.size

    @classmethod
    def zeros(cls, n: int, p: int) -> "RbmParams":
        return cls(np.zeros(n), np.zeros(p), np.zeros((n, p)))

    @classmethod
    def random(cls, n: int, p: int, rng, scale: float = 1.0) -> "RbmParams":
        return cls(
            rng.uniform(-scale, scale, n),
            rng.uniform(-scale, scale, p),
            rng.uniform(-scale, scale, (n, p)),
        )

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "p": self.p, "a": self.a.tolist(), "b": self.b.tolist(), "W": self.W.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "RbmParams":
        d = json.loads(text)
        for key in ("n", "p", "a", "b", "W"):
            if key not in d:
                raise ValueError(f"RBM spec is missing field {key!r}")
        params = cls(d["a"], d["b"], d["W"])
        if (params.n, params.p) != (d["n"], d["p"]):
            raise ValueError(f"fields n, p = {d['n']}, {d['p']} disagree with a, b lengths")
        return params


def spin_configurations(k: int) -> np.ndarray:
    """All 2^k configurations as rows of +/-1, spin 0 most significant, 0 -> +1."""
    idx = np.arange(2**k)[:, None]
    bits = (idx >> np.arange(k - 1, -1, -1)) & 1
    return 1 - 2 * bits


def spin_label(spins) -> str:
    return "".join("+" if s > 0 else "-" for s in spins)


def _as_spins(s, length: int, what: str) -> np.ndarray:
    s = np.asarray(s)
    if s.shape != (length,):
        raise ValueError(f"{what} must have {length} spins, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError(f"{what} entries must be +1 or -1")
    return s


def energy(params: RbmParams, v, h) -> float:
    v = _as_spins(v, params.n, "v")
    h = _as_spins(h, params.p, "h")
    return float(params.a @ v + params.b @ h + v @ params.W @ h)


def _check_budget(k: int):
    if k > SPIN_BUDGET:
        raise EnumerationBudgetExceeded(f"{k} spins exceed the enumeration budget of {SPIN_BUDGET}")


def energy_table(params: RbmParams) -> np.ndarray:
    """E(v, h) for every configuration pair, shape (2^n, 2^p)."""
    _check_budget(params.n + params.p)
    V = spin_configurations(params.n)
    H = spin_configurations(params.p)
    return (V @ params.a)[:, None] + (H @ params.b)[None, :] + V @ params.W @ H.T


def gibbs_table(params: RbmParams) -> ProbabilityTable:
    e = energy_table(params)
    return ProbabilityTable.from_weights(("v", "h"), np.exp(-(e - e.min())))


def visible_marginal(params: RbmParams) -> ProbabilityTable:
    """p(v) proportional to exp(-a.v) prod_j 2 cosh(b_j + (W^T v)_j), summed in log space."""
    _check_budget(params.n)
    V = spin_configurations(params.n)
    field = params.b[None, :] + V @ params.W
    log_w = -(V @ params.a) + np.sum(np.logaddexp(field, -field), axis=1)
    return ProbabilityTable.from_weights(("v",), np.exp(log_w - log_w.max()))


def ansatz(params: RbmParams) -> np.ndarray:
    """psi(v) = sqrt(p(v)), nonnegative, unit 2-norm."""
    return np.sqrt(visible_marginal(params).masses)


def conditional_up_probability(local_field):
    """P(spin = +1) for a spin with energy ``local_field * spin``."""
    return 0.5 * (1.0 - np.tanh(local_field))


def gibbs_sample(params: RbmParams, sweeps: int, burn_in: int = 0, seed: int = 0) -> ProbabilityTable:
    """Block Gibbs sampler; one sweep resamples all hidden then all visible spins.

    Each of the ``sweeps`` post-burn-in states (v, h) is tallied once.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    _check_budget(params.n + params.p)
    rng = np.random.default_rng(seed)
    n, p = params.n, params.p
    a, b, W = params.a, params.b, params.W
    v_weights = 1 << np.arange(n - 1, -1, -1)
    h_weights = 1 << np.arange(p - 1, -1, -1)
    counts = np.zeros((2**n, 2**p), dtype=np.int64)
    v = np.where(rng.random(n) < 0.5, 1, -1)
    h = np.ones(p, dtype=int)
    chunk = 4096
    total = burn_in + sweeps
    done = 0
    while done < total:
        m = min(chunk, total - done)
        uh = rng.random((m, p))
        uv = rng.random((m, n))
        for t in range(m):
            h = np.where(uh[t] < conditional_up_probability(b + v @ W), 1, -1)
            v = np.where(uv[t] < conditional_up_probability(a + W @ h), 1, -1)
            if done + t >= burn_in:
                counts[((1 - v) // 2) @ v_weights, ((1 - h) // 2) @ h_weights] += 1
        done += m
    return ProbabilityTable(("v", "h"), counts / counts.sum())


def as_layered(params: RbmParams) -> LayeredNetwork:
    """Two-layer network over configuration bases: biases a.v, b.h and weights v.W.h."""
    _check_budget(params.n + params.p)
    V = spin_configurations(params.n)
    H = spin_configurations(params.p)
    layers = (
        LayerSpec("v", 2**params.n, LayerKind.VISIBLE),
        LayerSpec("h", 2**params.p, LayerKind.HIDDEN),
    )
    return LayeredNetwork(layers, (V @ params.a, H @ params.b), (V @ params.W @ H.T,))
