"""
Discrete Bayesian network over a learned DAG.

CPTs are Laplace-smoothed maximum likelihood estimates; inference enumerates the full
joint, which stays cheap because the mind's graphs have at most four nodes.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import CyclicGraphError, DataError, DimensionError, UnknownVariableError
from core.graphs import DirectedGraph, is_acyclic

logger = logging.getLogger(__name__)

MOVABILITY = "movability"
DEFAULT_ARITY = 2
ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class BayesNet:
    """
    cpds[name] has shape (configs, arity): row c is P(name | parents = c), where the parent
    configuration index is mixed-radix over graph.parents(name) in label order (first parent
    most significant).
    """
    graph: DirectedGraph
    cpds: Dict[str, np.ndarray]
    laplace_alpha: float = 1.0
    arities: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in self.graph.node_labels:
            if name not in self.cpds:
                raise DataError(f"Missing CPT for node {name!r}")
            table = self.cpds[name]
            expected_rows = int(np.prod([self.arity(p) for p in self.graph.parents(name)], dtype=np.int64))
            if table.shape != (expected_rows, self.arity(name)):
                raise DimensionError(
                    f"CPT for {name!r} has shape {table.shape}, expected {(expected_rows, self.arity(name))}"
                )
            if not np.allclose(table.sum(axis=1), 1.0, atol=ROW_SUM_TOL, rtol=0.0):
                raise DataError(f"CPT rows for {name!r} do not sum to 1")

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.graph.node_labels

    def arity(self, name: str) -> int:
        return self.arities.get(name, DEFAULT_ARITY)

    def parent_config_index(self, name: str, assignment: Mapping[str, int]) -> int:
        index = 0
        for parent in self.graph.parents(name):
            index = index * self.arity(parent) + int(assignment[parent])
        return index

    def conditional(self, name: str, value: int, assignment: Mapping[str, int]) -> float:
        """P(name = value | parents as in assignment)"""
        return float(self.cpds[name][self.parent_config_index(name, assignment), value])


def _resolve_arities(graph: DirectedGraph, arities: Optional[Mapping[str, int]]) -> Dict[str, int]:
    resolved = {name: DEFAULT_ARITY for name in graph.node_labels}
    for name, k in (arities or {}).items():
        if name not in resolved:
            raise UnknownVariableError(f"Arity given for unknown variable {name!r}")
        if int(k) < 1:
            raise DataError(f"Arity of {name!r} must be positive, got {k}")
        resolved[name] = int(k)
    return resolved


def fit_cpds(graph: DirectedGraph, data: np.ndarray, alpha: float = 1.0,
             arities: Optional[Mapping[str, int]] = None) -> BayesNet:
    """P(v = k | c) = (count(v = k, c) + alpha) / (count(c) + alpha * K); empty configs with alpha = 0 are uniform"""
    if not is_acyclic(graph):
        raise CyclicGraphError(f"CPTs need a DAG, got {graph!r}")
    if alpha < 0:
        raise DataError(f"alpha must be >= 0, got {alpha}")
    data = np.asarray(data)
    if data.ndim != 2 or data.shape[1] != graph.size:
        raise DimensionError(f"Data shape {data.shape} does not align with {graph.size} graph nodes")
    resolved = _resolve_arities(graph, arities)
    values = data.astype(np.int64)
    if not np.array_equal(values, data):
        raise DataError("Data must hold integer category codes")
    for j, name in enumerate(graph.node_labels):
        column = values[:, j]
        if column.size and (column.min() < 0 or column.max() >= resolved[name]):
            raise DataError(f"Column {name!r} has values outside 0..{resolved[name] - 1}")

    cpds: Dict[str, np.ndarray] = {}
    for j, name in enumerate(graph.node_labels):
        parents = graph.parents(name)
        parent_cols = [graph.index_of(p) for p in parents]
        radix = [resolved[p] for p in parents]
        k = resolved[name]
        n_configs = int(np.prod(radix, dtype=np.int64))
        config = np.zeros(values.shape[0], dtype=np.int64)
        for col, r in zip(parent_cols, radix):
            config = config * r + values[:, col]
        counts = np.zeros((n_configs, k))
        np.add.at(counts, (config, values[:, j]), 1.0)

        smoothed = counts + alpha
        totals = smoothed.sum(axis=1, keepdims=True)
        table = np.full((n_configs, k), 1.0 / k)
        np.divide(smoothed, totals, out=table, where=totals > 0)
        cpds[name] = table

    logger.debug(f"[Bayes] Fitted CPTs for {list(graph.node_labels)} on {values.shape[0]} rows (alpha={alpha})")
    return BayesNet(graph=graph, cpds=cpds, laplace_alpha=float(alpha), arities=resolved)


def _check_assignment(net: BayesNet, assignment: Mapping[str, int]) -> None:
    for name, value in assignment.items():
        if name not in net.variables:
            raise UnknownVariableError(f"Unknown variable {name!r}; known: {list(net.variables)}")
        if not 0 <= int(value) < net.arity(name):
            raise DataError(f"Value {value} out of range for {name!r}")


def joint_probability(net: BayesNet, assignment: Mapping[str, int]) -> float:
    """Probability of a complete assignment: product of the CPT entries"""
    _check_assignment(net, assignment)
    missing = [name for name in net.variables if name not in assignment]
    if missing:
        raise DataError(f"Assignment is missing {missing}")
    prob = 1.0
    for name in net.variables:
        prob *= net.conditional(name, int(assignment[name]), assignment)
    return prob


def query(net: BayesNet, target: str, evidence: Optional[Mapping[str, int]] = None) -> np.ndarray:
    """Exact posterior distribution of target given evidence, by enumeration over the full joint"""
    evidence = dict(evidence or {})
    if target not in net.variables:
        raise UnknownVariableError(f"Unknown target {target!r}; known: {list(net.variables)}")
    _check_assignment(net, evidence)

    names: Sequence[str] = net.variables
    free = [name for name in names if name not in evidence]
    posterior = np.zeros(net.arity(target))
    for values in itertools.product(*(range(net.arity(name)) for name in free)):
        assignment = dict(evidence)
        assignment.update(zip(free, values))
        posterior[int(assignment[target])] += joint_probability(net, assignment)

    total = posterior.sum()
    if total <= 0.0:
        raise DataError(f"Evidence {evidence} has zero probability under the network")
    return posterior / total


def query_movability(net: BayesNet, evidence: Optional[Mapping[str, int]] = None) -> float:
    """P(movability = 1 | evidence)"""
    if MOVABILITY not in net.variables:
        raise UnknownVariableError(f"Network has no {MOVABILITY!r} node")
    return float(query(net, MOVABILITY, evidence)[1])
