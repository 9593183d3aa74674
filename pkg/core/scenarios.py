"""
Synthetic binary universes for structure-learning benchmarks, and the movability laws
that drive the grid-world experiments.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from core.errors import ConfigError, CyclicGraphError, UnknownVariableError
from core.graphs import DirectedGraph, is_acyclic
from core.models import LawId, Shape, Texture

logger = logging.getLogger(__name__)

MOVABILITY = "movability"
EXTRA_PREFIX = "extra_"


def _rule_copy(parents: np.ndarray) -> np.ndarray:
    return parents[:, 0].astype(bool)


def _rule_not(parents: np.ndarray) -> np.ndarray:
    return ~parents[:, 0].astype(bool)


def _rule_and(parents: np.ndarray) -> np.ndarray:
    return parents.astype(bool).all(axis=1)


def _rule_or(parents: np.ndarray) -> np.ndarray:
    return parents.astype(bool).any(axis=1)


def _rule_xor(parents: np.ndarray) -> np.ndarray:
    return (parents.astype(np.int64).sum(axis=1) % 2).astype(bool)


# name -> (function over an n x p parent block, exact parent count or None for any)
STRUCTURAL_RULES: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], Optional[int]]] = {
    "copy": (_rule_copy, 1),
    "not": (_rule_not, 1),
    "and": (_rule_and, None),
    "or": (_rule_or, None),
    "xor": (_rule_xor, None),
}


@dataclass(frozen=True)
class UniverseSpec:
    """A binary structural model: roots are Bernoulli(root_prob), caused variables are rule(parents) XOR noise"""
    universe_id: str
    variables: Tuple[str, ...]
    true_graph: DirectedGraph
    structural_rules: Dict[str, str] = field(default_factory=dict)
    flip_prob: float = 0.1
    root_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables or self.variables[-1] != MOVABILITY:
            raise ConfigError(f"Universe {self.universe_id!r}: variables must end with {MOVABILITY!r}")
        if self.true_graph.node_labels != self.variables:
            raise ConfigError(f"Universe {self.universe_id!r}: graph labels differ from variables")
        if not is_acyclic(self.true_graph):
            raise CyclicGraphError(f"Universe {self.universe_id!r}: true graph has a cycle")
        if not 0.0 <= self.flip_prob < 0.5:
            raise ConfigError(f"flip_prob must lie in [0, 0.5), got {self.flip_prob}")
        if not 0.0 <= self.root_prob <= 1.0:
            raise ConfigError(f"root_prob must lie in [0, 1], got {self.root_prob}")
        for name in self.variables:
            parents = self.true_graph.parents(name)
            rule = self.structural_rules.get(name)
            if not parents:
                if rule is not None:
                    raise ConfigError(f"Root variable {name!r} cannot have a structural rule")
                continue
            if rule not in STRUCTURAL_RULES:
                raise ConfigError(f"Caused variable {name!r} needs a rule from {sorted(STRUCTURAL_RULES)}, got {rule!r}")
            arity = STRUCTURAL_RULES[rule][1]
            if arity is not None and len(parents) != arity:
                raise ConfigError(f"Rule {rule!r} takes {arity} parent(s); {name!r} has {len(parents)}")

    @property
    def size(self) -> int:
        return len(self.variables)

    def to_dict(self) -> dict:
        return {
            "id": self.universe_id,
            "variables": list(self.variables),
            "edges": [list(edge) for edge in self.true_graph.edges()],
            "rules": dict(self.structural_rules),
            "flip_prob": self.flip_prob,
            "root_prob": self.root_prob,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "UniverseSpec":
        try:
            variables = tuple(data["variables"])
            graph = DirectedGraph.from_edges(variables, [tuple(e) for e in data.get("edges", [])])
            return cls(
                universe_id=str(data["id"]),
                variables=variables,
                true_graph=graph,
                structural_rules=dict(data.get("rules", {})),
                flip_prob=float(data.get("flip_prob", 0.1)),
                root_prob=float(data.get("root_prob", 0.5)),
            )
        except KeyError as e:
            raise ConfigError(f"Universe definition is missing {e}") from None


def _linked(universe_id: str, variables: Tuple[str, ...], edges, rules) -> UniverseSpec:
    return UniverseSpec(universe_id, variables, DirectedGraph.from_edges(variables, edges), rules)


def builtin_universes() -> List[UniverseSpec]:
    two = ("texture", MOVABILITY)
    three = ("texture", "shape", MOVABILITY)
    return [
        _linked("u2-linked", two, [("texture", MOVABILITY)], {MOVABILITY: "copy"}),
        _linked("u2-indep", two, [], {}),
        _linked("u3-partial", three, [("texture", MOVABILITY)], {MOVABILITY: "copy"}),
        _linked("u3-full", three, [("texture", MOVABILITY), ("shape", MOVABILITY)], {MOVABILITY: "and"}),
        _linked("u3-indep", three, [], {}),
    ]


def universe_by_id(universe_id: str, custom: Optional[List[UniverseSpec]] = None) -> UniverseSpec:
    """Look up a universe; an id like 'u2-linked+3' extends the base with 3 independent variables"""
    base_id, plus, extra = universe_id.partition("+")
    for spec in list(custom or []) + builtin_universes():
        if spec.universe_id == universe_id:
            return spec
        if plus and spec.universe_id == base_id:
            try:
                k = int(extra)
            except ValueError:
                break
            return extend_with_independent_vars(spec, k)
    raise UnknownVariableError(f"Unknown universe {universe_id!r}")


def generate_dataset(u: UniverseSpec, n: int, seed: int) -> np.ndarray:
    """n x d 0/1 matrix, column order = u.variables; one uniform draw per cell keeps runs reproducible"""
    if n < 1:
        raise ConfigError(f"Sample count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((n, u.size))
    data = np.zeros((n, u.size), dtype=bool)
    for name in u.true_graph.topological_order():
        j = u.variables.index(name)
        parents = [u.variables.index(p) for p in u.true_graph.parents(name)]
        if not parents:
            data[:, j] = uniforms[:, j] < u.root_prob
            continue
        rule = STRUCTURAL_RULES[u.structural_rules[name]][0]
        data[:, j] = rule(data[:, parents]) ^ (uniforms[:, j] < u.flip_prob)
    return data.astype(np.float64)


def extend_with_independent_vars(u: UniverseSpec, k: int) -> UniverseSpec:
    """Insert k root variables (extra_1..extra_k) ahead of movability; base edges unchanged"""
    if k < 0:
        raise ConfigError(f"k must be >= 0, got {k}")
    if k == 0:
        return u
    extras: List[str] = []
    index = 1
    while len(extras) < k:
        name = f"{EXTRA_PREFIX}{index}"
        if name not in u.variables:
            extras.append(name)
        index += 1
    variables = u.variables[:-1] + tuple(extras) + (MOVABILITY,)
    graph = DirectedGraph.from_edges(variables, u.true_graph.edges())
    return UniverseSpec(
        universe_id=f"{u.universe_id}+{k}",
        variables=variables,
        true_graph=graph,
        structural_rules=dict(u.structural_rules),
        flip_prob=u.flip_prob,
        root_prob=u.root_prob,
    )


def with_noise(u: UniverseSpec, flip_prob: float) -> UniverseSpec:
    return UniverseSpec(u.universe_id, u.variables, u.true_graph, dict(u.structural_rules), flip_prob, u.root_prob)


@dataclass(frozen=True)
class CausalLaw:
    """Ground-truth movability of every (texture, shape) combination"""
    law_id: LawId
    mapping: Dict[Tuple[Texture, Shape], bool]

    def __post_init__(self):
        missing = [(t, s) for t in Texture for s in Shape if (t, s) not in self.mapping]
        if missing:
            raise ConfigError(f"Law {self.law_id.value} is missing {missing}")

    @property
    def uses_shape(self) -> bool:
        """Whether shape is a causal parent of movability under this law"""
        return any(self.mapping[(t, Shape.DEBRIS)] != self.mapping[(t, Shape.COLUMN)] for t in Texture)

    @property
    def shape_observed(self) -> bool:
        """Whether the mind should log shape as a candidate cause"""
        return self.law_id is not LawId.TEXTURE_ONLY


def causal_law(law_id: LawId) -> CausalLaw:
    law_id = LawId(law_id)
    if law_id is LawId.TEXTURE_AND_SHAPE:
        mapping = {(t, s): t == Texture.SMOOTH and s == Shape.DEBRIS for t in Texture for s in Shape}
    else:
        mapping = {(t, s): t == Texture.SMOOTH for t in Texture for s in Shape}
    return CausalLaw(law_id, mapping)


def law_movability(law: CausalLaw, texture: Texture, shape: Shape) -> bool:
    return law.mapping[(Texture(texture), Shape(shape))]
