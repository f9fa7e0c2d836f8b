"""Layered networks: the Hamiltonian over visible and hidden bases.

Diagonal matrix elements of H are the per-state biases, off-diagonal blocks
between neighbouring layers are the weights. From one network we get

* the dense Hamiltonian (``assemble_hamiltonian``),
* the inter-layer blocks of exp(-dbeta H) as a transfer chain (``slice_blocks``),
* the feed-forward map h_{a+1} = f(W^T h_a + b_{a+1}) (``forward_map``),
* a nonnegative chain whose path product is exp(-E(path)) (``classical_chain``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .operators import HermitianOperator, as_beta, matrix_exponential
from .path_integral import TransferChain
from .tables import ProbabilityTable


class KLocalUnsupportedHere(ValueError):
    pass


class LayerKind(Enum):
    VISIBLE = "visible"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    dim: int
    kind: LayerKind = LayerKind.HIDDEN

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"layer {self.name!r} must have dim >= 1")
        object.__setattr__(self, "kind", LayerKind(self.kind))


@dataclass(frozen=True)
class HigherWeight:
    """k-body coupling: one real tensor axis per named layer."""

    layers: tuple[str, ...]
    tensor: np.ndarray


@dataclass(frozen=True, eq=False)
class LayeredNetwork:
    layers: tuple[LayerSpec, ...]
    biases: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    higher: tuple[HigherWeight, ...] = field(default=())

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        names = [l.name for l in layers]
        if len(set(names)) != len(names):
            raise ValueError(f"layer names must be unique: {names}")
        biases = tuple(np.array(b, dtype=float) for b in self.biases)
        if len(biases) != len(layers):
            raise ValueError(f"need {len(layers)} bias vectors, got {len(biases)}")
        for l, b in zip(layers, biases):
            if b.shape != (l.dim,):
                raise ValueError(f"bias of layer {l.name!r} must have length {l.dim}")
        weights = []
        for w in self.weights:
            w = np.array(w)
            w = w.astype(complex) if np.iscomplexobj(w) else w.astype(float)
            weights.append(w)
        if len(weights) != len(layers) - 1:
            raise ValueError(f"need {len(layers) - 1} weight blocks, got {len(weights)}")
        for a, w in enumerate(weights):
            shape = (layers[a].dim, layers[a + 1].dim)
            if w.shape != shape:
                raise ValueError(
                    f"weights {names[a]}->{names[a + 1]} must have shape {shape}, got {w.shape}"
                )
        higher = []
        for hw in self.higher:
            hl = tuple(hw.layers)
            if len(hl) < 3:
                raise ValueError("higher-order weights need k >= 3 layers")
            if len(set(hl)) != len(hl) or any(n not in names for n in hl):
                raise ValueError(f"higher-order weight references bad layers {hl}")
            t = np.array(hw.tensor, dtype=float)
            shape = tuple(layers[names.index(n)].dim for n in hl)
            if t.shape != shape:
                raise ValueError(f"tensor on {hl} must have shape {shape}, got {t.shape}")
            higher.append(HigherWeight(hl, t))
        for arr in (*biases, *weights):
            if not np.all(np.isfinite(arr)):
                raise ValueError("network parameters must be finite")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "higher", tuple(higher))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(l.dim for l in self.layers)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.concatenate([[0], np.cumsum(self.dims)]).astype(int))

    def has_complex_weights(self) -> bool:
        return any(np.iscomplexobj(w) and np.any(w.imag) for w in self.weights)

    def replace(self, biases=None, weights=None) -> "LayeredNetwork":
        return LayeredNetwork(
            self.layers,
            self.biases if biases is None else biases,
            self.weights if weights is None else weights,
            self.higher,
        )

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        weights = {}
        for a, w in enumerate(self.weights):
            key = f"{self.names[a]}->{self.names[a + 1]}"
            wc = np.asarray(w, dtype=complex)
            weights[key] = [[[float(z.real), float(z.imag)] for z in row] for row in wc]
        return {
            "layers": [{"name": l.name, "dim": l.dim, "kind": l.kind.value} for l in self.layers],
            "biases": {l.name: [float(x) for x in b] for l, b in zip(self.layers, self.biases)},
            "weights": weights,
            "higher": [{"layers": list(h.layers), "tensor": h.tensor.tolist()} for h in self.higher],
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "LayeredNetwork":
        try:
            layers = tuple(
                LayerSpec(str(l["name"]), int(l["dim"]), LayerKind(l.get("kind", "hidden")))
                for l in d["layers"]
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"field 'layers': {e}") from None
        names = [l.name for l in layers]
        raw_biases = d.get("biases", {})
        unknown = set(raw_biases) - set(names)
        if unknown:
            raise ValueError(f"field 'biases': unknown layers {sorted(unknown)}")
        biases = tuple(
            np.array(raw_biases.get(l.name, np.zeros(l.dim)), dtype=float) for l in layers
        )
        raw_w = dict(d.get("weights", {}))
        weights = []
        for a in range(len(layers) - 1):
            key = f"{names[a]}->{names[a + 1]}"
            shape = (layers[a].dim, layers[a + 1].dim)
            if key not in raw_w:
                weights.append(np.zeros(shape))
                continue
            try:
                arr = np.array(raw_w.pop(key), dtype=float)
            except (TypeError, ValueError) as e:
                raise ValueError(f"field 'weights.{key}': {e}") from None
            if arr.shape == shape + (2,):
                arr = arr[..., 0] + 1j * arr[..., 1]
                if not np.any(arr.imag):
                    arr = arr.real
            weights.append(arr)
        if raw_w:
            raise ValueError(
                f"field 'weights': non-adjacent or unknown layer pairs {sorted(raw_w)}"
            )
        higher = tuple(
            HigherWeight(tuple(h["layers"]), np.array(h["tensor"], dtype=float))
            for h in d.get("higher", [])
        )
        return cls(layers, biases, tuple(weights), higher)

    @classmethod
    def from_json(cls, text: str) -> "LayeredNetwork":
        return cls.from_dict(json.loads(text))


def _require_two_local(net: LayeredNetwork):
    if net.higher:
        raise KLocalUnsupportedHere(
            "network has k-local (k >= 3) weights; use pathboltz.ising for k-local Hamiltonians"
        )


def assemble_hamiltonian(net: LayeredNetwork) -> HermitianOperator:
    """Block-tridiagonal Hamiltonian: biases on the diagonal, weights next to it."""
    _require_two_local(net)
    off = net.offsets
    h = np.diag(np.concatenate(net.biases)).astype(complex)
    for a, w in enumerate(net.weights):
        rows = slice(off[a], off[a + 1])
        cols = slice(off[a + 1], off[a + 2])
        h[rows, cols] = w
        h[cols, rows] = np.conj(w).T
    return HermitianOperator(h)


def block(matrix: np.ndarray, net: LayeredNetwork, a: int, b: int) -> np.ndarray:
    off = net.offsets
    return matrix[off[a]:off[a + 1], off[b]:off[b + 1]]


def slice_blocks(net: LayeredNetwork, delta_beta) -> TransferChain:
    """Chain of the (layer k, layer k+1) blocks of exp(-delta_beta H)."""
    if len(net.layers) < 2:
        raise ValueError("slice_blocks needs at least two layers")
    u = matrix_exponential(assemble_hamiltonian(net), as_beta(delta_beta))
    kernels = tuple(block(u, net, a, a + 1) for a in range(len(net.layers) - 1))
    return TransferChain(kernels, net.names)


def full_resolution_chain(net: LayeredNetwork, beta, slices: int) -> TransferChain:
    """``slices`` full D x D kernels of exp(-(beta/slices) H); every boundary spans all layers."""
    if slices < 1:
        raise ValueError("slices must be >= 1")
    u = matrix_exponential(assemble_hamiltonian(net), as_beta(beta) / slices)
    return TransferChain((u,) * slices)


class ActivationKind(Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    LOGISTIC = "logistic"
    SOFTPLUS = "softplus"


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


_ACTIVATIONS = {
    ActivationKind.IDENTITY: (lambda z: z, lambda z: np.ones_like(z)),
    ActivationKind.TANH: (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    ActivationKind.LOGISTIC: (_logistic, lambda z: _logistic(z) * (1.0 - _logistic(z))),
    ActivationKind.SOFTPLUS: (lambda z: np.logaddexp(0.0, z), _logistic),
}


def activation_functions(kind: ActivationKind):
    """Return ``(f, f')`` for an activation."""
    return _ACTIVATIONS[ActivationKind(kind)]


def forward_map(net: LayeredNetwork, activation: ActivationKind, x) -> np.ndarray:
    """Propagate ``x`` through every layer; accepts one vector or a batch of rows."""
    f, _ = activation_functions(activation)
    x = np.asarray(x)
    if x.shape[-1] != net.dims[0]:
        raise ValueError(f"input has length {x.shape[-1]}, first layer has dim {net.dims[0]}")
    if net.has_complex_weights() and ActivationKind(activation) is not ActivationKind.IDENTITY:
        raise ValueError("complex weights are only supported with the identity activation")
    h = x
    for a, w in enumerate(net.weights):
        h = f(_ordered_matmul(h, w) + net.biases[a + 1])
    return h


def _ordered_matmul(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """h @ w with each inner sum taken over sorted terms.

    The result then does not depend on how the inner (summed) basis states are
    labeled, so relabeling hidden states leaves outputs bit-identical.
    """
    terms = h[..., :, None] * w
    return np.sort(terms, axis=-2).sum(axis=-2)


def _bias_coefficients(n_layers: int) -> list[float]:
    if n_layers == 1:
        return [1.0]
    return [1.0] + [0.5] * (n_layers - 2) + [1.0]


def classical_chain(net: LayeredNetwork) -> TransferChain:
    """Nonnegative kernels exp(-[c_a b_a(mu) + W(mu, nu) + c_{a+1} b_{a+1}(nu)]).

    Interior layers split their bias between the two kernels that touch them
    (c = 1/2) and terminal layers put it all in their one kernel (c = 1), so a
    full path carries exp(-E(path)) with each node energy counted once.
    """
    _require_two_local(net)
    if len(net.layers) < 2:
        raise ValueError("classical_chain needs at least two layers")
    if net.has_complex_weights():
        raise ValueError("classical_chain requires real weights")
    c = _bias_coefficients(len(net.layers))
    kernels = []
    for a, w in enumerate(net.weights):
        energy = c[a] * net.biases[a][:, None] + np.real(w) + c[a + 1] * net.biases[a + 1][None, :]
        kernels.append(np.exp(-energy))
    return TransferChain(tuple(kernels), net.names)


def classical_joint(net: LayeredNetwork, budget: int = 10**7) -> ProbabilityTable:
    """Boltzmann table exp(-E)/Z over layer states, including k-local tensors."""
    if net.has_complex_weights():
        raise ValueError("classical_joint requires real weights")
    dims = net.dims
    if int(np.prod(dims, dtype=np.int64)) > budget:
        raise ValueError(f"{np.prod(dims)} layer-state combinations exceed budget {budget}")
    n = len(dims)
    energy = np.zeros(dims)
    for a, b in enumerate(net.biases):
        energy = energy + b.reshape([-1 if i == a else 1 for i in range(n)])
    for a, w in enumerate(net.weights):
        shape = [1] * n
        shape[a], shape[a + 1] = dims[a], dims[a + 1]
        energy = energy + np.real(w).reshape(shape)
    names = net.names
    for hw in net.higher:
        axes = [names.index(l) for l in hw.layers]
        order = np.argsort(axes)
        t = np.transpose(hw.tensor, order)
        shape = [dims[i] if i in axes else 1 for i in range(n)]
        energy = energy + t.reshape(shape)
    return ProbabilityTable.from_weights(names, np.exp(-(energy - energy.min())))

