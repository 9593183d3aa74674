import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core.errors import ConfigError, CyclicGraphError, UnknownVariableError
from core.graphs import DirectedGraph
from core.models import LawId, Shape, Texture
from core.scenarios import (
    UniverseSpec, builtin_universes, causal_law, extend_with_independent_vars, generate_dataset,
    law_movability, universe_by_id, with_noise,
)


class TestUniverseSpec(unittest.TestCase):

    def test_builtins_are_valid(self):
        ids = [u.universe_id for u in builtin_universes()]
        self.assertEqual(ids, ["u2-linked", "u2-indep", "u3-partial", "u3-full", "u3-indep"])
        for u in builtin_universes():
            self.assertEqual(u.variables[-1], "movability")

    def test_rejects_bad_definitions(self):
        two = ("texture", "movability")
        linked = DirectedGraph.from_edges(two, [("texture", "movability")])
        with self.assertRaises(ConfigError):
            UniverseSpec("x", two, linked, {})
        with self.assertRaises(ConfigError):
            UniverseSpec("x", two, linked, {"movability": "copy"}, flip_prob=0.5)
        with self.assertRaises(ConfigError):
            UniverseSpec("x", ("movability", "texture"), DirectedGraph.empty(("movability", "texture")))
        cyclic = DirectedGraph.from_edges(two, [("texture", "movability"), ("movability", "texture")])
        with self.assertRaises(CyclicGraphError):
            UniverseSpec("x", two, cyclic, {"movability": "copy", "texture": "copy"})
        three = ("texture", "shape", "movability")
        both = DirectedGraph.from_edges(three, [("texture", "movability"), ("shape", "movability")])
        with self.assertRaises(ConfigError):
            UniverseSpec("x", three, both, {"movability": "copy"})

    def test_dict_round_trip(self):
        u = universe_by_id("u3-full")
        restored = UniverseSpec.from_dict(u.to_dict())
        self.assertEqual(restored.true_graph, u.true_graph)
        self.assertEqual(restored.structural_rules, u.structural_rules)
        with self.assertRaises(ConfigError):
            UniverseSpec.from_dict({"variables": ["movability"]})


class TestLookup(unittest.TestCase):

    def test_extended_id(self):
        u = universe_by_id("u2-linked+2")
        self.assertEqual(u.variables, ("texture", "extra_1", "extra_2", "movability"))
        self.assertEqual(u.universe_id, "u2-linked+2")

    def test_custom_universe_wins(self):
        custom = with_noise(universe_by_id("u2-linked"), 0.0)
        self.assertEqual(universe_by_id("u2-linked", [custom]).flip_prob, 0.0)

    def test_unknown(self):
        with self.assertRaises(UnknownVariableError):
            universe_by_id("u9")
        with self.assertRaises(UnknownVariableError):
            universe_by_id("u2-linked+many")


class TestGenerateDataset(unittest.TestCase):

    def test_shape_and_values(self):
        data = generate_dataset(universe_by_id("u3-full"), 50, seed=1)
        self.assertEqual(data.shape, (50, 3))
        self.assertEqual(data.dtype, np.float64)
        self.assertTrue(np.all((data == 0.0) | (data == 1.0)))

    def test_seeded(self):
        u = universe_by_id("u3-partial")
        np.testing.assert_array_equal(generate_dataset(u, 20, 7), generate_dataset(u, 20, 7))
        self.assertFalse(np.array_equal(generate_dataset(u, 200, 7), generate_dataset(u, 200, 8)))

    def test_noise_free_rules_hold(self):
        linked = with_noise(universe_by_id("u2-linked"), 0.0)
        data = generate_dataset(linked, 100, 0)
        np.testing.assert_array_equal(data[:, 0], data[:, 1])
        full = with_noise(universe_by_id("u3-full"), 0.0)
        data = generate_dataset(full, 100, 0)
        np.testing.assert_array_equal(data[:, 2], data[:, 0] * data[:, 1])

    def test_flip_rate_is_close_to_configured(self):
        data = generate_dataset(universe_by_id("u2-linked"), 20000, 3)
        disagreement = float(np.mean(data[:, 0] != data[:, 1]))
        self.assertAlmostEqual(disagreement, 0.1, delta=0.01)

    def test_rejects_empty(self):
        with self.assertRaises(ConfigError):
            generate_dataset(universe_by_id("u2-linked"), 0, 0)


class TestExtend(unittest.TestCase):

    def test_keeps_base_edges(self):
        base = universe_by_id("u3-full")
        extended = extend_with_independent_vars(base, 3)
        self.assertEqual(extended.size, 6)
        self.assertEqual(set(extended.true_graph.edges()), set(base.true_graph.edges()))
        for name in ("extra_1", "extra_2", "extra_3"):
            self.assertEqual(extended.true_graph.parents(name), [])

    def test_zero_is_identity(self):
        base = universe_by_id("u2-indep")
        self.assertIs(extend_with_independent_vars(base, 0), base)
        with self.assertRaises(ConfigError):
            extend_with_independent_vars(base, -1)


class TestCausalLaws(unittest.TestCase):

    def test_texture_only(self):
        law = causal_law(LawId.TEXTURE_ONLY)
        self.assertTrue(law_movability(law, Texture.SMOOTH, Shape.COLUMN))
        self.assertFalse(law_movability(law, Texture.ROUGH, Shape.DEBRIS))
        self.assertFalse(law.uses_shape)
        self.assertFalse(law.shape_observed)

    def test_shape_present_but_irrelevant(self):
        law = causal_law(LawId.TEXTURE_ONLY_WITH_SHAPE_PRESENT)
        self.assertFalse(law.uses_shape)
        self.assertTrue(law.shape_observed)

    def test_texture_and_shape(self):
        law = causal_law(LawId.TEXTURE_AND_SHAPE)
        movable = [(t, s) for t in Texture for s in Shape if law_movability(law, t, s)]
        self.assertEqual(movable, [(Texture.SMOOTH, Shape.DEBRIS)])
        self.assertTrue(law.uses_shape)


if __name__ == "__main__":
    unittest.main()
