"""Fit network biases and weights so the network reproduces target behaviour.

Three kinds of target:

* ``MapPairs``: input/target vector pairs for the forward map (squared error).
* ``TargetPropagator``: a visible-in x visible-out matrix; row alpha of the
  network propagator is the forward map of basis vector e_alpha (squared
  Frobenius error).
* ``TargetGibbs``: a table over layer states; the model is the path
  distribution of ``classical_chain`` (KL divergence target || model).

Parameters are real: every layer's bias vector followed by every weight block,
flattened in layer order.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .network import (
    ActivationKind,
    LayeredNetwork,
    activation_functions,
    classical_chain,
    forward_map,
)
from .path_integral import path_distribution
from .tables import ProbabilityTable


class LossKind(Enum):
    SQUARED_ERROR = "sq"
    KULLBACK_LEIBLER = "kl"


class Optimizer(Enum):
    GRADIENT_DESCENT = "gd"
    ADAM = "adam"


class GradientMode(Enum):
    ANALYTIC = "analytic"
    CENTRAL_DIFFERENCE = "central"


class AnalyticGradientUnavailable(ValueError):
    pass


class SupportMismatch(ValueError):
    """Target puts mass where the model has none, so KL is infinite."""


class FitDiverged(ArithmeticError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class MapPairs:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)


@dataclass(frozen=True)
class TargetPropagator:
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.atleast_2d(np.asarray(self.matrix, dtype=complex)))


@dataclass(frozen=True)
class TargetGibbs:
    table: ProbabilityTable


@dataclass(frozen=True)
class FitConfig:
    loss: LossKind = LossKind.SQUARED_ERROR
    optimizer: Optimizer = Optimizer.ADAM
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    steps: int = 1000
    seed: int = 0
    gradient_mode: GradientMode = GradientMode.ANALYTIC
    fd_step: float = 1e-5
    init: bool = False

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        object.__setattr__(self, "gradient_mode", GradientMode(self.gradient_mode))
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("finite-difference step must be > 0")


# -- parameter packing -------------------------------------------------------

def pack(net: LayeredNetwork) -> np.ndarray:
    if net.has_complex_weights():
        raise ValueError("the trainer works with real parameters only")
    parts = [b.ravel() for b in net.biases] + [np.real(w).ravel() for w in net.weights]
    return np.concatenate(parts).astype(float)


def unpack(net: LayeredNetwork, theta) -> LayeredNetwork:
    theta = np.asarray(theta, dtype=float)
    biases, weights = [], []
    i = 0
    for d in net.dims:
        biases.append(theta[i:i + d])
        i += d
    for w in net.weights:
        weights.append(theta[i:i + w.size].reshape(w.shape))
        i += w.size
    if i != theta.size:
        raise ValueError(f"parameter vector has {theta.size} entries, network needs {i}")
    return net.replace(tuple(biases), tuple(weights))


def initialize(net: LayeredNetwork, seed: int) -> LayeredNetwork:
    """Weights uniform in [-0.1, 0.1] from ``seed``, biases zero."""
    rng = np.random.default_rng(seed)
    weights = tuple(rng.uniform(-0.1, 0.1, np.shape(w)) for w in net.weights)
    return net.replace(tuple(np.zeros(d) for d in net.dims), weights)


# -- losses ------------------------------------------------------------------

def network_propagator(net: LayeredNetwork, activation=ActivationKind.IDENTITY) -> np.ndarray:
    """Row alpha is the forward map of visible basis vector e_alpha."""
    return forward_map(net, activation, np.eye(net.dims[0]))


def _check_data(net: LayeredNetwork, data):
    if isinstance(data, MapPairs):
        if data.inputs.shape[1] != net.dims[0] or data.targets.shape[1] != net.dims[-1]:
            raise ValueError(
                f"pairs have widths {data.inputs.shape[1]}->{data.targets.shape[1]}, "
                f"network terminals are {net.dims[0]}->{net.dims[-1]}"
            )
    elif isinstance(data, TargetPropagator):
        if data.matrix.shape != (net.dims[0], net.dims[-1]):
            raise ValueError(
                f"target propagator has shape {data.matrix.shape}, "
                f"network needs {(net.dims[0], net.dims[-1])}"
            )
    elif isinstance(data, TargetGibbs):
        if data.table.variables != net.names or data.table.cardinalities != net.dims:
            raise ValueError(
                f"target table over {data.table.variables} {data.table.cardinalities} does not "
                f"match layers {net.names} {net.dims}"
            )
    else:
        raise TypeError(f"unknown training data {type(data).__name__}")


def _log_model(net: LayeredNetwork) -> np.ndarray:
    """log p(path) of the classical chain, computed from log-kernels."""
    kernels = classical_chain(net).kernels
    log_w = np.log(kernels[0].real)
    for k in kernels[1:]:
        lk = np.log(k.real)
        log_w = log_w[..., None] + lk.reshape((1,) * (log_w.ndim - 1) + lk.shape)
    m = log_w.max()
    return log_w - (m + math.log(np.exp(log_w - m).sum()))


def loss(net: LayeredNetwork, data, activation=ActivationKind.IDENTITY) -> float:
    _check_data(net, data)
    if isinstance(data, MapPairs):
        r = forward_map(net, activation, data.inputs) - data.targets
        return float(np.sum(np.abs(r) ** 2))
    if isinstance(data, TargetPropagator):
        r = network_propagator(net, activation) - data.matrix
        return float(np.sum(np.abs(r) ** 2))
    t = data.table.masses
    model = path_distribution(classical_chain(net)).masses
    support = t > 0
    if np.any(support & (model <= 0)):
        raise SupportMismatch("target has mass outside the model support")
    log_p = _log_model(net)
    kl = float(np.sum(t[support] * (np.log(t[support]) - log_p[support])))
    return max(kl, 0.0)


def _expected_loss_kind(data) -> LossKind:
    return LossKind.KULLBACK_LEIBLER if isinstance(data, TargetGibbs) else LossKind.SQUARED_ERROR


# -- gradients ---------------------------------------------------------------

def _backprop(net, activation, x, target):
    f, df = activation_functions(activation)
    hs, zs = [x], []
    for a, w in enumerate(net.weights):
        z = hs[-1] @ w + net.biases[a + 1]
        zs.append(z)
        hs.append(f(z))
    delta = 2.0 * np.real(hs[-1] - target)
    grad_b = [np.zeros(d) for d in net.dims]
    grad_w = [None] * len(net.weights)
    for a in range(len(net.weights) - 1, -1, -1):
        dz = delta * df(zs[a])
        grad_b[a + 1] = dz.sum(axis=0)
        grad_w[a] = hs[a].T @ dz
        delta = dz @ net.weights[a].T
    return np.concatenate([g.ravel() for g in grad_b] + [g.ravel() for g in grad_w])


def _gibbs_gradient(net, table):
    t = table.masses
    p = path_distribution(classical_chain(net)).masses
    diff = t - p
    n = diff.ndim
    grads = []
    for a in range(n):
        grads.append(diff.sum(axis=tuple(i for i in range(n) if i != a)))
    for a in range(n - 1):
        grads.append(diff.sum(axis=tuple(i for i in range(n) if i not in (a, a + 1))))
    return np.concatenate([g.ravel() for g in grads])


def analytic_gradient(net, data, activation=ActivationKind.IDENTITY) -> np.ndarray:
    _check_data(net, data)
    if net.has_complex_weights():
        raise ValueError("the trainer works with real parameters only")
    if isinstance(data, MapPairs):
        return _backprop(net, activation, data.inputs, data.targets)
    if isinstance(data, TargetPropagator):
        if ActivationKind(activation) is not ActivationKind.IDENTITY:
            raise AnalyticGradientUnavailable(
                "analytic gradient for a target propagator needs the identity activation; "
                "use the central-difference gradient mode"
            )
        return _backprop(net, activation, np.eye(net.dims[0]), data.matrix)
    return _gibbs_gradient(net, data.table)


def central_difference_gradient(net, data, activation=ActivationKind.IDENTITY, h=1e-5) -> np.ndarray:
    theta = pack(net)
    g = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        g[i] = (loss(unpack(net, up), data, activation) - loss(unpack(net, down), data, activation)) / (2 * h)
    return g


def gradient(net, data, cfg: FitConfig, activation=ActivationKind.IDENTITY) -> np.ndarray:
    if cfg.gradient_mode is GradientMode.ANALYTIC:
        return analytic_gradient(net, data, activation)
    return central_difference_gradient(net, data, activation, cfg.fd_step)


# -- optimisation --------------------------------------------------------------

@dataclass
class FitResult:
    network: LayeredNetwork
    trace: list = field(default_factory=list)
    best_loss: float = math.inf
    learning_rate: float = 0.0


def fit(net: LayeredNetwork, data, cfg: FitConfig, activation=ActivationKind.IDENTITY) -> FitResult:
    """Descend the loss for ``cfg.steps`` steps and return the best parameters seen.

    A step that produces a non-finite loss, or multiplies the loss by more
    than 10, is rejected and the learning rate halved. ``trace[k]`` is the
    loss after step k (``trace[0]`` is the starting loss).
    """
    if cfg.loss is not _expected_loss_kind(data):
        raise ValueError(f"loss {cfg.loss.value!r} does not match {type(data).__name__} data")
    if cfg.init:
        net = initialize(net, cfg.seed)
    theta = pack(net)
    current = loss(net, data, activation)
    if not math.isfinite(current):
        raise FitDiverged("initial loss is not finite", [current])
    trace = [current]
    best, best_theta = current, theta.copy()
    lr = cfg.learning_rate
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    t = 0
    halvings = 0
    for _ in range(cfg.steps):
        g = gradient(unpack(net, theta), data, cfg, activation)
        if not np.all(np.isfinite(g)):
            raise FitDiverged("gradient is not finite", trace)
        if cfg.optimizer is Optimizer.ADAM:
            m_new = cfg.beta1 * m + (1 - cfg.beta1) * g
            v_new = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            m_hat = m_new / (1 - cfg.beta1 ** (t + 1))
            v_hat = v_new / (1 - cfg.beta2 ** (t + 1))
            proposal = theta - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        else:
            proposal = theta - lr * g
        try:
            new = loss(unpack(net, proposal), data, activation)
        except SupportMismatch:
            new = math.inf
        if not math.isfinite(new) or new > 10.0 * current:
            halvings += 1
            lr *= 0.5
            if halvings > 60:
                raise FitDiverged("learning rate halved 60 times without a stable step", trace)
            trace.append(current)
            continue
        theta, current = proposal, new
        if cfg.optimizer is Optimizer.ADAM:
            m, v, t = m_new, v_new, t + 1
        trace.append(current)
        if current < best:
            best, best_theta = current, theta.copy()
    return FitResult(unpack(net, best_theta), trace, best, lr)


# -- files -------------------------------------------------------------------

def read_pairs_csv(text: str, n_in: int, n_out: int) -> MapPairs:
    xs, ys = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != n_in + n_out:
            raise ValueError(f"line {lineno}: expected {n_in + n_out} values, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value in {row!r}") from None
        xs.append(vals[:n_in])
        ys.append(vals[n_in:])
    if not xs:
        raise ValueError("pairs file has no rows")
    return MapPairs(np.array(xs), np.array(ys))


def write_pairs_csv(pairs: MapPairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for x, y in zip(pairs.inputs, pairs.targets):
        w.writerow([format(v, ".17g") for v in (*x, *y)])
    return buf.getvalue()

