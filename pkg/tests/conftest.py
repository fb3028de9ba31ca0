"""Shared model builders for the worked examples used across the suite."""

import itertools

import numpy as np
import pytest

from pgmlab.factors import DiscreteFactor
from pgmlab.graphs import Dag, Ugm
from pgmlab.messages import FactorGraph
from pgmlab.sequential import DiscreteHmm


@pytest.fixture
def five_node_dag() -> Dag:
    """a -> q <- z -> h, q -> e."""
    return Dag.from_edges(list("azqeh"), [("a", "q"), ("z", "q"), ("z", "h"), ("q", "e")])


@pytest.fixture
def chest_clinic() -> Dag:
    """The classic eight-node diagnosis network."""
    return Dag.from_edges(
        list("atslbexd"),
        [("a", "t"), ("s", "l"), ("s", "b"), ("t", "e"), ("l", "e"),
         ("e", "x"), ("e", "d"), ("b", "d")],
    )


@pytest.fixture
def gibbs_ugm() -> Ugm:
    """Five-variable pairwise model with blanket MB(x4) = {x1, x5}."""
    return Ugm(
        [f"x{i}" for i in range(1, 6)],
        [("x1", "x2"), ("x1", "x3"), ("x1", "x4"), ("x2", "x3"), ("x2", "x5"), ("x4", "x5")],
    )


@pytest.fixture
def diamond_ugm() -> Ugm:
    return Ugm(list("wxyz"), [("w", "x"), ("w", "z"), ("x", "y"), ("y", "z")])


def tree_factors() -> dict[str, DiscreteFactor]:
    """Six-factor tree with hand-checkable marginals and MAP assignment."""
    return {
        "phiA": DiscreteFactor([("x1", 2)], [2, 4]),
        "phiB": DiscreteFactor([("x2", 2)], [4, 4]),
        "phiC": DiscreteFactor([("x1", 2), ("x2", 2), ("x3", 2)], [4, 2, 2, 6, 2, 6, 6, 4]),
        "phiD": DiscreteFactor([("x3", 2), ("x4", 2)], [8, 2, 2, 6]),
        "phiE": DiscreteFactor([("x3", 2), ("x5", 2)], [3, 6, 6, 3]),
        "phiF": DiscreteFactor([("x5", 2)], [1, 8]),
    }


@pytest.fixture
def tree_fg() -> FactorGraph:
    return FactorGraph([(f"x{i}", 2) for i in range(1, 6)], tree_factors())


def loop_factors() -> list[DiscreteFactor]:
    """Four factors over six binary variables; phiA and phiB share {x2, x3}."""
    return [
        DiscreteFactor([("x1", 2), ("x2", 2), ("x3", 2)], [4, 2, 2, 6, 2, 6, 6, 4]),
        DiscreteFactor([("x2", 2), ("x3", 2), ("x4", 2)], [2, 2, 4, 2, 6, 8, 4, 2]),
        DiscreteFactor([("x4", 2), ("x5", 2)], [8, 2, 2, 6]),
        DiscreteFactor([("x4", 2), ("x6", 2)], [3, 6, 6, 3]),
    ]


@pytest.fixture
def loop_fg() -> FactorGraph:
    names = ["phiA", "phiB", "phiC", "phiD"]
    return FactorGraph(
        [(f"x{i}", 2) for i in range(1, 7)],
        dict(zip(names, loop_factors())),
    )


@pytest.fixture
def flip_hmm() -> DiscreteHmm:
    """Three steps, deterministic state flip, 0.6/0.4 emissions, uniform start."""
    transition = np.array([[0.0, 1.0], [1.0, 0.0]])
    emission = np.array([[0.6, 0.4], [0.4, 0.6]])
    return DiscreteHmm.homogeneous([0.5, 0.5], transition, emission, 3)


def random_hmm(rng: np.random.Generator, n_states: int, n_steps: int, n_symbols: int = 2) -> DiscreteHmm:
    def stochastic(shape):
        m = rng.uniform(0.05, 1.0, size=shape)
        return m / m.sum(axis=1, keepdims=True)

    prior = rng.uniform(0.1, 1.0, size=n_states)
    prior = prior / prior.sum()
    return DiscreteHmm(
        prior,
        [stochastic((n_states, n_states)) for _ in range(n_steps - 1)],
        [stochastic((n_states, n_symbols)) for _ in range(n_steps)],
    )


def hmm_joint_table(hmm: DiscreteHmm, observations) -> dict[tuple[int, ...], float]:
    """Brute-force enumeration of p(h_{1:n}, v_{1:n}) over all hidden paths."""
    n = len(observations)
    table = {}
    for path in itertools.product(range(hmm.n_states), repeat=n):
        p = hmm.prior[path[0]] * hmm.emissions[0][path[0], observations[0]]
        for t in range(1, n):
            p *= hmm.transitions[t - 1][path[t - 1], path[t]]
            p *= hmm.emissions[t][path[t], observations[t]]
        table[path] = float(p)
    return table


def random_dag(rng: np.random.Generator, n_nodes: int, edge_prob: float = 0.4) -> Dag:
    """Random DAG over x0..x{n-1}; edges only point from lower to higher index."""
    names = [f"x{i}" for i in range(n_nodes)]
    edges = [
        (names[i], names[j])
        for i in range(n_nodes)
        for j in range(i + 1, n_nodes)
        if rng.uniform() < edge_prob
    ]
    return Dag.from_edges(names, edges)


def factor_graph_joint(fg: FactorGraph) -> DiscreteFactor:
    """Full unnormalised joint table of a factor graph by direct product."""
    from pgmlab.factors import product

    full = product(list(fg.factors.values()))
    # Reorder missing variables are impossible in a connected graph.
    assert set(full.var_names) == set(fg.var_names)
    return full
