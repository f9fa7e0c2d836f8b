"""Entropies of layered path distributions.

All entropies are in nats. Besides plain Shannon entropy and marginals this
module has three network-level functionals:

* ``chain_entropy``: node entropies minus adjacent-pair entropies along a chain
  of variables, S[x] + sum S[h_i] - S[x, h_1] - sum S[h_i, h_{i+1}].
* ``tree_bethe_entropy``: sum of edge entropies minus (degree - 1) times each
  node entropy. Exact when the joint is a Markov tree on the given edges.
* ``kikuchi_entropy``: sum over simplices of (-1)^rank * S * M, with M the
  multiplicity map stored on the complex.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from .tables import NORMALIZATION_TOL, ProbabilityTable, UnnormalizedTable


def shannon(dist: ProbabilityTable) -> float:
    p = dist.masses
    if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
        raise UnnormalizedTable(f"table sums to {p.sum()!r}")
    nz = p[p > 0]
    # + 0.0 turns the -0.0 of a point mass into 0.0
    return float(-np.sum(nz * np.log(nz))) + 0.0


def marginalize(joint: ProbabilityTable, keep) -> ProbabilityTable:
    return joint.marginal(keep)


def _entropy_of(joint: ProbabilityTable, names) -> float:
    return shannon(joint.marginal(names))


def mutual_information(joint: ProbabilityTable, a: str, b: str) -> float:
    return _entropy_of(joint, [a]) + _entropy_of(joint, [b]) - _entropy_of(joint, [a, b])


@dataclass(frozen=True)
class EntropyTerm:
    kind: str
    variables: tuple[str, ...]
    entropy: float
    weight: float

    @property
    def contribution(self) -> float:
        return self.weight * self.entropy


def chain_entropy_terms(joint: ProbabilityTable, order=None) -> list[EntropyTerm]:
    order = tuple(order or joint.variables)
    if len(order) < 2:
        raise ValueError("a chain needs at least two variables")
    terms = [EntropyTerm("node", (v,), _entropy_of(joint, [v]), 1.0) for v in order]
    terms += [
        EntropyTerm("pair", (a, b), _entropy_of(joint, [a, b]), -1.0)
        for a, b in zip(order, order[1:])
    ]
    return terms


def chain_entropy(joint: ProbabilityTable, order=None) -> float:
    """Node entropies minus adjacent-pair entropies along the chain ``order``.

    Equals the sum of adjacent mutual informations minus the entropies of the
    interior variables; with only two variables it is their mutual information.
    """
    return float(sum(t.contribution for t in chain_entropy_terms(joint, order)))


def chain_mi_decomposition(joint: ProbabilityTable, order=None) -> dict:
    order = tuple(order or joint.variables)
    mis = [mutual_information(joint, a, b) for a, b in zip(order, order[1:])]
    interior = [_entropy_of(joint, [v]) for v in order[1:-1]]
    return {
        "mutual_informations": mis,
        "interior_entropies": interior,
        "total": float(sum(mis) - sum(interior)),
    }


def _tree_graph(variables, tree) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(variables)
    for a, b in tree:
        if a not in g or b not in g:
            raise KeyError(f"edge ({a}, {b}) names an unknown variable")
        if g.has_edge(a, b) or a == b:
            raise ValueError(f"edge set has a cycle at ({a}, {b})")
        g.add_edge(a, b)
    if not nx.is_forest(g):
        raise ValueError("edge set has a cycle")
    if not nx.is_connected(g):
        raise ValueError("edge set does not span all variables")
    return g


def bethe_terms(joint: ProbabilityTable, tree) -> list[EntropyTerm]:
    g = _tree_graph(joint.variables, tree)
    terms = [EntropyTerm("edge", (a, b), _entropy_of(joint, [a, b]), 1.0) for a, b in tree]
    terms += [
        EntropyTerm("node", (v,), _entropy_of(joint, [v]), -(g.degree[v] - 1.0))
        for v in joint.variables
    ]
    return terms


def tree_bethe_entropy(joint: ProbabilityTable, tree) -> float:
    return float(sum(t.contribution for t in bethe_terms(joint, tree)))


class MultiplicityMode(Enum):
    CONTAINMENT = "containment"
    MOEBIUS = "moebius"


@dataclass(frozen=True)
class SimplicialComplex:
    """Face-closed set of simplices (frozensets of vertex names) with multiplicities."""

    simplices: frozenset
    multiplicity: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        simplices = frozenset(frozenset(s) for s in self.simplices)
        if frozenset() in simplices:
            raise ValueError("the empty simplex is not allowed")
        for s in simplices:
            for face in _proper_faces(s):
                if face not in simplices:
                    raise ValueError(f"complex is not closed: {sorted(face)} missing from {sorted(s)}")
        object.__setattr__(self, "simplices", simplices)

    @classmethod
    def from_maximal(cls, supports, mode: MultiplicityMode | None = None) -> "SimplicialComplex":
        closed = set()
        for s in supports:
            s = frozenset(s)
            closed.add(s)
            closed.update(_proper_faces(s))
        cx = cls(frozenset(closed))
        return cx.with_multiplicities(mode) if mode else cx

    def with_multiplicities(self, mode: MultiplicityMode) -> "SimplicialComplex":
        return SimplicialComplex(self.simplices, multiplicities(self, mode))

    @property
    def vertices(self) -> set:
        return {v for s in self.simplices for v in s}

    def of_rank(self, r: int) -> list:
        return sorted((s for s in self.simplices if len(s) == r + 1), key=_sort_key)

    @property
    def max_rank(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    def maximal(self) -> list:
        return [s for s in self.simplices if not any(s < t for t in self.simplices)]

    def counts(self) -> dict:
        """Number of simplices per rank."""
        out = {}
        for s in self.simplices:
            out[len(s) - 1] = out.get(len(s) - 1, 0) + 1
        return dict(sorted(out.items()))


def _proper_faces(s):
    items = sorted(s, key=str)
    for k in range(1, len(items)):
        for c in itertools.combinations(items, k):
            yield frozenset(c)


def _sort_key(s):
    return (len(s), sorted(map(str, s)))


def rank(s) -> int:
    return len(s) - 1


def counting_numbers(cx: SimplicialComplex) -> dict:
    """Moebius overcounting numbers: 1 on maximal simplices, 1 - sum over strict cofaces below."""
    c = {}
    for s in sorted(cx.simplices, key=len, reverse=True):
        c[s] = 1 - sum(c[t] for t in cx.simplices if s < t)
    return c


def multiplicities(cx: SimplicialComplex, mode: MultiplicityMode) -> dict:
    """Multiplicity M per simplex, to be used with the (-1)^rank sign.

    CONTAINMENT counts how many simplices of equal or higher rank contain the
    simplex (itself included). MOEBIUS stores (-1)^rank times the Moebius
    counting number, so the signed sum reproduces the usual cluster expansion
    sum_s c(s) S(s).
    """
    mode = MultiplicityMode(mode)
    if mode is MultiplicityMode.CONTAINMENT:
        return {s: sum(1 for t in cx.simplices if s <= t) for s in cx.simplices}
    return {s: (-1) ** rank(s) * c for s, c in counting_numbers(cx).items()}


def kikuchi_terms(joint: ProbabilityTable, cx: SimplicialComplex) -> list[EntropyTerm]:
    missing = cx.vertices - set(joint.variables)
    if missing:
        raise KeyError(f"complex vertices {sorted(map(str, missing))} are not table variables")
    if not cx.multiplicity:
        raise ValueError("complex carries no multiplicities; call with_multiplicities first")
    terms = []
    for r in range(cx.max_rank + 1):
        for s in cx.of_rank(r):
            names = [v for v in joint.variables if v in s]
            terms.append(
                EntropyTerm(f"rank{r}", tuple(names), _entropy_of(joint, names),
                            float((-1) ** r * cx.multiplicity[s]))
            )
    return terms


def kikuchi_entropy(joint: ProbabilityTable, cx: SimplicialComplex) -> float:
    return float(sum(t.contribution for t in kikuchi_terms(joint, cx)))


def network_complex(net, mode: MultiplicityMode = MultiplicityMode.MOEBIUS) -> SimplicialComplex:
    """Complex of a layered network: layers as vertices, adjacent blocks as edges, k-local tensors as simplices."""
    names = net.names
    supports = [(n,) for n in names]
    supports += [(names[a], names[a + 1]) for a in range(len(names) - 1)]
    supports += [tuple(h.layers) for h in net.higher]
    return SimplicialComplex.from_maximal(supports, mode)
