import itertools
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from core import bayes
from core.errors import CyclicGraphError, DataError, DimensionError, UnknownVariableError
from core.graphs import DirectedGraph, is_acyclic

TM = ("texture", "movability")
TSM = ("texture", "shape", "movability")


def linked_rows() -> np.ndarray:
    """10 rows of (smooth, moved) and 10 rows of (rough, immovable)"""
    return np.array([[1, 1]] * 10 + [[0, 0]] * 10, dtype=np.float64)


class TestFitCpds(unittest.TestCase):

    def test_laplace_smoothed_count(self):
        g = DirectedGraph.from_edges(TM, [("texture", "movability")])
        net = bayes.fit_cpds(g, linked_rows(), alpha=1.0)
        self.assertAlmostEqual(net.conditional("movability", 1, {"texture": 1}), 11 / 12)
        self.assertAlmostEqual(net.conditional("movability", 1, {"texture": 0}), 1 / 12)
        np.testing.assert_allclose(net.cpds["texture"], [[0.5, 0.5]])

    def test_empirical_frequency_without_smoothing(self):
        data = np.array([[0, 1]] * 7 + [[0, 0]] * 3, dtype=np.float64)
        net = bayes.fit_cpds(DirectedGraph.empty(TM), data, alpha=0.0)
        self.assertAlmostEqual(net.conditional("movability", 1, {}), 0.7)

    def test_empty_data_gives_uniform_prior(self):
        g = DirectedGraph.from_edges(TM, [("texture", "movability")])
        for alpha in (1.0, 0.0):
            net = bayes.fit_cpds(g, np.zeros((0, 2)), alpha=alpha)
            self.assertEqual(bayes.query_movability(net, {"texture": 1}), 0.5)

    def test_unseen_parent_config_is_uniform_without_smoothing(self):
        g = DirectedGraph.from_edges(TM, [("texture", "movability")])
        data = np.array([[1, 1]] * 4, dtype=np.float64)
        net = bayes.fit_cpds(g, data, alpha=0.0)
        np.testing.assert_allclose(net.cpds["movability"][0], [0.5, 0.5])
        np.testing.assert_allclose(net.cpds["movability"][1], [0.0, 1.0])

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 2, size=(40, 3)).astype(np.float64)
        g = DirectedGraph.from_edges(TSM, [("texture", "movability"), ("shape", "movability")])
        net = bayes.fit_cpds(g, data)
        self.assertEqual(net.cpds["movability"].shape, (4, 2))
        for table in net.cpds.values():
            np.testing.assert_allclose(table.sum(axis=1), 1.0)

    def test_row_order_does_not_matter(self):
        rng = np.random.default_rng(1)
        data = rng.integers(0, 2, size=(30, 3)).astype(np.float64)
        g = DirectedGraph.from_edges(TSM, [("texture", "movability")])
        a = bayes.fit_cpds(g, data)
        b = bayes.fit_cpds(g, data[rng.permutation(30)])
        for name in TSM:
            np.testing.assert_array_equal(a.cpds[name], b.cpds[name])

    def test_errors(self):
        cyclic = DirectedGraph.from_edges(TM, [("texture", "movability"), ("movability", "texture")])
        with self.assertRaises(CyclicGraphError):
            bayes.fit_cpds(cyclic, linked_rows())
        with self.assertRaises(DimensionError):
            bayes.fit_cpds(DirectedGraph.empty(TSM), linked_rows())
        with self.assertRaises(DataError):
            bayes.fit_cpds(DirectedGraph.empty(TM), np.array([[0.5, 1.0]]))
        with self.assertRaises(DataError):
            bayes.fit_cpds(DirectedGraph.empty(TM), np.array([[2.0, 1.0]]))
        with self.assertRaises(DataError):
            bayes.fit_cpds(DirectedGraph.empty(TM), linked_rows(), alpha=-1.0)


class TestQuery(unittest.TestCase):

    def setUp(self):
        g = DirectedGraph.from_edges(TM, [("texture", "movability")])
        self.net = bayes.fit_cpds(g, linked_rows())

    def test_movability_given_texture(self):
        self.assertAlmostEqual(bayes.query_movability(self.net, {"texture": 1}), 11 / 12)

    def test_diagnostic_query(self):
        # P(T=1 | M=1) = 0.5 * 11/12 / (0.5 * 11/12 + 0.5 * 1/12)
        posterior = bayes.query(self.net, "texture", {"movability": 1})
        self.assertAlmostEqual(posterior[1], 11 / 12)

    def test_matches_joint_table(self):
        rng = np.random.default_rng(2)
        data = rng.integers(0, 2, size=(25, 3)).astype(np.float64)
        g = DirectedGraph.from_edges(TSM, [("texture", "shape"), ("texture", "movability"),
                                           ("shape", "movability")])
        net = bayes.fit_cpds(g, data)
        joint = {
            values: bayes.joint_probability(net, dict(zip(TSM, values)))
            for values in itertools.product(range(2), repeat=3)
        }
        self.assertAlmostEqual(sum(joint.values()), 1.0)
        for t, s in itertools.product(range(2), repeat=2):
            expected = joint[(t, s, 1)] / (joint[(t, s, 0)] + joint[(t, s, 1)])
            self.assertAlmostEqual(bayes.query_movability(net, {"texture": t, "shape": s}), expected)

    def test_no_evidence_is_marginal(self):
        self.assertAlmostEqual(bayes.query_movability(self.net), 0.5)

    def test_unknown_variable(self):
        with self.assertRaises(UnknownVariableError):
            bayes.query_movability(self.net, {"colour": 1})
        with self.assertRaises(UnknownVariableError):
            bayes.query(self.net, "shape")

    def test_impossible_evidence(self):
        g = DirectedGraph.from_edges(TM, [("texture", "movability")])
        net = bayes.fit_cpds(g, linked_rows(), alpha=0.0)
        with self.assertRaises(DataError):
            bayes.query(net, "texture", {"movability": 1, "texture": 0})


def all_dags(labels):
    pairs = [(a, b) for a in labels for b in labels if a != b]
    for mask in itertools.product((False, True), repeat=len(pairs)):
        g = DirectedGraph.from_edges(labels, [pair for pair, keep in zip(pairs, mask) if keep])
        if is_acyclic(g):
            yield g


def counted_joint(g, data, alpha):
    """Joint table built straight from row counts, one smoothed factor per node"""
    labels = g.node_labels
    column = {name: i for i, name in enumerate(labels)}
    joint = {}
    for values in itertools.product(range(2), repeat=len(labels)):
        p = 1.0
        for i, name in enumerate(labels):
            parents = [column[src] for src, dst in g.edges() if dst == name]
            match = np.all(data[:, parents] == [values[j] for j in parents], axis=1)
            hits = np.sum(data[match, i] == values[i])
            p *= (hits + alpha) / (np.sum(match) + 2 * alpha)
        joint[values] = p
    return joint


class TestExactEnumeration(unittest.TestCase):
    """Every DAG over two or three binary nodes, every target and evidence pattern"""

    def test_all_small_dags(self):
        rng = np.random.default_rng(13)
        checked = 0
        for labels in (TM, TSM):
            graphs = list(all_dags(labels))
            self.assertEqual(len(graphs), 3 if len(labels) == 2 else 25)
            for n in (7, 25):
                data = rng.integers(0, 2, size=(n, len(labels))).astype(np.float64)
                for g in graphs:
                    with self.subTest(edges=g.edges(), n=n):
                        self.check(g, data)
                    checked += 1
        self.assertEqual(checked, 2 * (3 + 25))

    def check(self, g, data):
        labels = g.node_labels
        net = bayes.fit_cpds(g, data, alpha=1.0)
        joint = counted_joint(g, data, 1.0)
        self.assertAlmostEqual(sum(joint.values()), 1.0, places=12)
        for values, p in joint.items():
            self.assertAlmostEqual(bayes.joint_probability(net, dict(zip(labels, values))), p, places=12)

        for t, target in enumerate(labels):
            others = [i for i in range(len(labels)) if i != t]
            for size in range(len(others) + 1):
                for observed in itertools.combinations(others, size):
                    for seen in itertools.product(range(2), repeat=size):
                        evidence = {labels[i]: v for i, v in zip(observed, seen)}
                        weights = np.zeros(2)
                        for values, p in joint.items():
                            if all(values[i] == v for i, v in zip(observed, seen)):
                                weights[values[t]] += p
                        np.testing.assert_allclose(bayes.query(net, target, evidence),
                                                   weights / weights.sum(), rtol=0.0, atol=1e-9)


if __name__ == "__main__":
    unittest.main()
