"""Directed graphs over named variables and the structure-recovery metrics"""
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from core.errors import DimensionError, GraphMismatchError

Edge = Tuple[str, str]

# Cost of turning i->j into j->i. Set to 2 to score a reversal as delete + insert.
REVERSAL_COST = 1


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """
    Dense boolean adjacency over ordered labels; adjacency[i, j] is the edge i -> j.
    Self-loops are rejected; cycles are allowed (inferred graphs may contain them).
    """
    node_labels: Tuple[str, ...]
    adjacency: np.ndarray

    def __post_init__(self):
        labels = tuple(self.node_labels)
        adjacency = np.array(self.adjacency, dtype=bool)
        if len(labels) < 1:
            raise DimensionError("A graph needs at least one node")
        if len(set(labels)) != len(labels):
            raise ValueError(f"Duplicate node labels: {labels}")
        if adjacency.shape != (len(labels), len(labels)):
            raise DimensionError(
                f"Adjacency shape {adjacency.shape} does not match {len(labels)} labels"
            )
        if adjacency.diagonal().any():
            raise ValueError("Self-loops are not allowed")
        adjacency.setflags(write=False)
        object.__setattr__(self, "node_labels", labels)
        object.__setattr__(self, "adjacency", adjacency)

    @classmethod
    def empty(cls, labels: Sequence[str]) -> "DirectedGraph":
        return cls(tuple(labels), np.zeros((len(labels), len(labels)), dtype=bool))

    @classmethod
    def from_edges(cls, labels: Sequence[str], edges: Iterable[Edge]) -> "DirectedGraph":
        labels = tuple(labels)
        index = {label: i for i, label in enumerate(labels)}
        adjacency = np.zeros((len(labels), len(labels)), dtype=bool)
        for src, dst in edges:
            if src not in index or dst not in index:
                raise GraphMismatchError(f"Edge {src} -> {dst} uses an unknown node")
            adjacency[index[src], index[dst]] = True
        return cls(labels, adjacency)

    @classmethod
    def from_weights(cls, labels: Sequence[str], weights: np.ndarray,
                     threshold: float = 0.0) -> "DirectedGraph":
        """Edges are the entries with |w_ij| > threshold"""
        adjacency = np.abs(np.asarray(weights, dtype=float)) > threshold
        np.fill_diagonal(adjacency, False)
        return cls(tuple(labels), adjacency)

    @property
    def size(self) -> int:
        return len(self.node_labels)

    def index_of(self, label: str) -> int:
        try:
            return self.node_labels.index(label)
        except ValueError:
            raise GraphMismatchError(f"Unknown node {label!r}") from None

    def edges(self) -> List[Edge]:
        rows, cols = np.nonzero(self.adjacency)
        return [(self.node_labels[i], self.node_labels[j]) for i, j in zip(rows, cols)]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum())

    def parents(self, label: str) -> List[str]:
        j = self.index_of(label)
        return [self.node_labels[i] for i in np.nonzero(self.adjacency[:, j])[0]]

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.node_labels)
        graph.add_edges_from(self.edges())
        return graph

    def topological_order(self) -> List[str]:
        """Deterministic order: ties broken by label position"""
        position = {label: i for i, label in enumerate(self.node_labels)}
        return list(nx.lexicographical_topological_sort(self.to_networkx(), key=position.get))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.node_labels == other.node_labels and np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.node_labels, self.adjacency.tobytes()))

    def __repr__(self) -> str:
        edges = ", ".join(f"{s}->{d}" for s, d in self.edges())
        return f"DirectedGraph(nodes={list(self.node_labels)}, edges=[{edges}])"


def is_acyclic(g: DirectedGraph) -> bool:
    return nx.is_directed_acyclic_graph(g.to_networkx())


def _check_comparable(inferred: DirectedGraph, truth: DirectedGraph) -> None:
    if inferred.node_labels != truth.node_labels:
        raise GraphMismatchError(
            f"Incomparable graphs: {list(inferred.node_labels)} vs {list(truth.node_labels)}"
        )


def _pair_edit_cost(inferred_ij: bool, inferred_ji: bool, truth_ij: bool, truth_ji: bool) -> int:
    if (inferred_ij, inferred_ji) == (truth_ij, truth_ji):
        return 0
    inferred_count = int(inferred_ij) + int(inferred_ji)
    truth_count = int(truth_ij) + int(truth_ji)
    if inferred_count == 1 and truth_count == 1:
        return REVERSAL_COST
    return abs(inferred_count - truth_count)


def shd(inferred: DirectedGraph, truth: DirectedGraph) -> int:
    """Structural Hamming distance: insertions, deletions and reversals turning inferred into truth"""
    _check_comparable(inferred, truth)
    a, b = inferred.adjacency, truth.adjacency
    total = 0
    for i in range(inferred.size):
        for j in range(i + 1, inferred.size):
            total += _pair_edit_cost(bool(a[i, j]), bool(a[j, i]), bool(b[i, j]), bool(b[j, i]))
    return total


def _true_positives(inferred: DirectedGraph, truth: DirectedGraph) -> int:
    return int(np.logical_and(inferred.adjacency, truth.adjacency).sum())


def precision(inferred: DirectedGraph, truth: DirectedGraph) -> float:
    """
    Fraction of inferred directed edges present in truth with the right orientation.
    Both empty -> 1.0; inferred empty but truth not -> 0.0.
    """
    _check_comparable(inferred, truth)
    n_inferred = inferred.edge_count
    if n_inferred == 0:
        return 1.0 if truth.edge_count == 0 else 0.0
    return _true_positives(inferred, truth) / n_inferred


def recall(inferred: DirectedGraph, truth: DirectedGraph) -> float:
    _check_comparable(inferred, truth)
    if truth.edge_count == 0:
        return 1.0
    return _true_positives(inferred, truth) / truth.edge_count


def f1(inferred: DirectedGraph, truth: DirectedGraph) -> float:
    prec = precision(inferred, truth)
    rec = recall(inferred, truth)
    return 0.0 if prec + rec == 0.0 else 2 * prec * rec / (prec + rec)


def format_edge_list(g: DirectedGraph) -> str:
    lines = ["[nodes]"]
    lines.extend(g.node_labels)
    lines.append("[edges]")
    lines.extend(f"{src} -> {dst}" for src, dst in g.edges())
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> DirectedGraph:
    labels: List[str] = []
    edges: List[Edge] = []
    section: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line in ("[nodes]", "[edges]"):
            section = line
        elif section == "[nodes]":
            labels.append(line)
        elif section == "[edges]":
            src, sep, dst = line.partition("->")
            if not sep:
                raise ValueError(f"Malformed edge line: {raw!r}")
            edges.append((src.strip(), dst.strip()))
        else:
            raise ValueError(f"Content before the [nodes] section: {raw!r}")
    return DirectedGraph.from_edges(labels, edges)
