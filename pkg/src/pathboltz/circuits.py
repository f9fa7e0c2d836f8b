"""Rotation-gate circuit template for a layered network, plus a statevector backend.

One qubit per basis state of every layer gets Ry(bias * t). Every nonzero
weight entry gets its own ancilla, rotated by Ry(weight * t) under the
control of the two node qubits that the weight couples. All qubits are
measured at the end. hbar = 1 and angles are not reduced mod 2 pi.

Qubit 0 is the most significant bit of a basis index.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .network import LayeredNetwork, _require_two_local

MAX_EMIT_QUBITS = 20
MAX_SIM_QUBITS = 14


class RegisterTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str  # "ry", "ccry" or "measure"
    qubits: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        arity = {"ry": 1, "ccry": 3, "measure": 1}
        if self.kind not in arity:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(qubits) != arity[self.kind]:
            raise ValueError(f"{self.kind} acts on {arity[self.kind]} qubits, got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit in {self.kind} {qubits}")
        if self.kind == "measure":
            if self.theta is not None:
                raise ValueError("measure takes no angle")
        elif self.theta is None or not np.isfinite(self.theta):
            raise ValueError(f"{self.kind} needs a finite angle")
        object.__setattr__(self, "qubits", qubits)
        if self.theta is not None:
            object.__setattr__(self, "theta", float(self.theta))

    @property
    def target(self) -> int:
        return self.qubits[-1]


def ry(theta, target) -> Gate:
    return Gate("ry", (target,), theta)


def ccry(theta, control_a, control_b, target) -> Gate:
    return Gate("ccry", (control_a, control_b, target), theta)


def measure(target) -> Gate:
    return Gate("measure", (target,))


@dataclass(frozen=True)
class CircuitDescription:
    num_qubits: int
    labels: tuple[str, ...]
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        labels = tuple(self.labels)
        gates = tuple(self.gates)
        if len(labels) != self.num_qubits:
            raise ValueError(f"{self.num_qubits} qubits but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError("qubit labels must be unique")
        measured = set()
        for g in gates:
            if any(not 0 <= q < self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g} outside register of {self.num_qubits}")
            if measured.intersection(g.qubits):
                raise ValueError(f"gate {g} acts on an already measured qubit")
            if g.kind == "measure":
                measured.add(g.target)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "gates", gates)

    def census(self) -> dict:
        out = {"ry": 0, "ccry": 0, "measure": 0}
        for g in self.gates:
            out[g.kind] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "qubits": self.num_qubits,
            "labels": list(self.labels),
            "gates": [
                {"kind": g.kind, "theta": g.theta, "qubits": list(g.qubits)} for g in self.gates
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "CircuitDescription":
        gates = tuple(Gate(g["kind"], tuple(g["qubits"]), g.get("theta")) for g in d["gates"])
        return cls(int(d["qubits"]), tuple(d["labels"]), gates)

    @classmethod
    def from_json(cls, text: str) -> "CircuitDescription":
        return cls.from_dict(json.loads(text))


def emit_circuit(net: LayeredNetwork, t: float) -> CircuitDescription:
    _require_two_local(net)
    if net.has_complex_weights():
        raise ValueError("rotation angles must be real; network has complex weights")
    nodes = [
        (f"{layer.name}[{mu}]", layer_idx, mu)
        for layer_idx, layer in enumerate(net.layers)
        for mu in range(layer.dim)
    ]
    qubit_of = {(a, mu): q for q, (_, a, mu) in enumerate(nodes)}
    edges = [
        (a, mu, nu, float(np.real(w[mu, nu])))
        for a, w in enumerate(net.weights)
        for mu, nu in zip(*np.nonzero(w))
    ]
    n = len(nodes) + len(edges)
    if n > MAX_EMIT_QUBITS:
        raise RegisterTooLarge(f"template needs {n} qubits, limit is {MAX_EMIT_QUBITS}")
    labels = [label for label, _, _ in nodes]
    gates = [ry(float(net.biases[a][mu]) * t, qubit_of[(a, mu)]) for _, a, mu in nodes]
    for k, (a, mu, nu, w) in enumerate(edges):
        ancilla = len(nodes) + k
        labels.append(f"a{k + 1}:{net.names[a]}[{mu}]-{net.names[a + 1]}[{nu}]")
        gates.append(ccry(w * t, qubit_of[(a, mu)], qubit_of[(a + 1, nu)], ancilla))
    gates += [measure(q) for q in range(n)]
    return CircuitDescription(n, tuple(labels), tuple(gates))


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def simulate_statevector(circuit: CircuitDescription) -> np.ndarray:
    """Apply the unitary gates to |0...0>; measurements are left to ``sample``."""
    n = circuit.num_qubits
    if n > MAX_SIM_QUBITS:
        raise RegisterTooLarge(f"{n} qubits exceed the simulator limit of {MAX_SIM_QUBITS}")
    state = np.zeros((2,) * n, dtype=complex)
    state[(0,) * n] = 1.0
    for g in circuit.gates:
        if g.kind == "measure":
            continue
        u = _ry_matrix(g.theta)
        if g.kind == "ry":
            state = np.moveaxis(np.tensordot(u, state, axes=([1], [g.target])), 0, g.target)
        else:
            ca, cb, tq = g.qubits
            sel = [slice(None)] * n
            sel[ca] = 1
            sel[cb] = 1
            sub = state[tuple(sel)]
            # tq's axis index shifts down for each control axis removed before it
            axis = tq - (ca < tq) - (cb < tq)
            state[tuple(sel)] = np.moveaxis(np.tensordot(u, sub, axes=([1], [axis])), 0, axis)
    return state.reshape(-1)


def probabilities(circuit: CircuitDescription) -> np.ndarray:
    return np.abs(simulate_statevector(circuit)) ** 2


def sample(circuit: CircuitDescription, shots: int, seed: int = 0) -> dict[str, int]:
    """Multinomial draw of measured bitstrings (qubit 0 leftmost), zero counts omitted."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = probabilities(circuit)
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(shots, p)
    n = circuit.num_qubits
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


HEADER = "PBQASM 1.0;"


def serialize(circuit: CircuitDescription) -> str:
    lines = [HEADER, f"qreg q[{circuit.num_qubits}];"]
    lines += [f"// q[{i}] = {label}" for i, label in enumerate(circuit.labels)]
    for g in circuit.gates:
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.kind == "measure":
            lines.append(f"measure {args};")
        else:
            lines.append(f"{g.kind}({g.theta!r}) {args};")
    return "\n".join(lines) + "\n"


_GATE_RE = re.compile(r"^(ry|ccry)\(([^)]*)\)\s+(.*);$|^(measure)\s+(.*);$")
_LABEL_RE = re.compile(r"^// q\[(\d+)\] = (.*)$")
_QUBIT_RE = re.compile(r"q\[(\d+)\]")


def parse(text: str) -> CircuitDescription:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ValueError(f"line 1: expected {HEADER!r}")
    m = re.fullmatch(r"qreg q\[(\d+)\];", lines[1].strip()) if len(lines) > 1 else None
    if not m:
        raise ValueError("line 2: expected 'qreg q[N];'")
    n = int(m.group(1))
    labels = {}
    gates = []
    for lineno, raw in enumerate(lines[2:], start=3):
        line = raw.strip()
        if not line:
            continue
        lm = _LABEL_RE.match(line)
        if lm:
            labels[int(lm.group(1))] = lm.group(2)
            continue
        gm = _GATE_RE.match(line)
        if not gm:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        if gm.group(4):
            gates.append(Gate("measure", tuple(int(q) for q in _QUBIT_RE.findall(gm.group(5)))))
        else:
            qubits = tuple(int(q) for q in _QUBIT_RE.findall(gm.group(3)))
            gates.append(Gate(gm.group(1), qubits, float(gm.group(2))))
    label_tuple = tuple(labels.get(i, f"q{i}") for i in range(n))
    return CircuitDescription(n, label_tuple, tuple(gates))
