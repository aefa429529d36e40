"""Random problem generators for tests, the verify command and benchmarks."""

from __future__ import annotations

import numpy as np

from .core import BayesNet, Cpt, NodeOrdering, make_specs, validate_dag
from .exact import JointTable

# chain 0 -> 1 -> 2 used across tests and fixtures
CHAIN_P0 = 0.6
CHAIN_P1 = (0.2, 0.9)
CHAIN_P2 = (0.3, 0.8)


def chain_net() -> BayesNet:
    specs = make_specs([2, 2, 2])
    tables = [
        [[1 - CHAIN_P0, CHAIN_P0]],
        [[1 - p, p] for p in CHAIN_P1],
        [[1 - p, p] for p in CHAIN_P2],
    ]
    return BayesNet.from_tables(specs, NodeOrdering.identity(3), {1: [0], 2: [1]}, tables)


def random_dag(rng: np.random.Generator, ordering: NodeOrdering, edge_prob: float = 0.5, max_parents=None):
    parents = {}
    for v in ordering:
        preds = list(ordering.predecessors(v))
        pa = [p for p in preds if rng.random() < edge_prob]
        if max_parents is not None and len(pa) > max_parents:
            pa = sorted(rng.choice(pa, size=max_parents, replace=False).tolist())
        parents[v] = pa
    return validate_dag(None, ordering, parents)


def random_bayesnet(rng: np.random.Generator, specs, dag, floor: float = 0.5) -> BayesNet:
    """CPT rows mix a Dirichlet(1) draw with the uniform vector; every entry is at
    least ``floor / r``, which keeps draws away from degenerate tables."""
    cpts = []
    for v, spec in enumerate(specs):
        pa = dag.parent_tuple(v)
        q = int(np.prod([specs[p].cardinality for p in pa])) if pa else 1
        r = spec.cardinality
        rows = (1 - floor) * rng.dirichlet(np.ones(r), size=q) + floor / r
        rows /= rows.sum(axis=1, keepdims=True)
        cpts.append(Cpt(v, pa, rows, None))
    return BayesNet(tuple(specs), dag.ordering, dag, tuple(cpts))


def random_binary_generic_net(rng, n: int, edge_prob: float = 0.5, lo: float = 0.1, hi: float = 0.9) -> BayesNet:
    """Binary net on the identity ordering with P(x=1 | pa) ~ U(lo, hi)."""
    specs = make_specs([2] * n)
    ordering = NodeOrdering.identity(n)
    dag = random_dag(rng, ordering, edge_prob)
    cpts = []
    for v in range(n):
        pa = dag.parent_tuple(v)
        p1 = rng.uniform(lo, hi, size=2 ** len(pa))
        cpts.append(Cpt(v, pa, np.column_stack([1 - p1, p1]), None))
    return BayesNet(specs, ordering, dag, tuple(cpts))


def random_joint(rng: np.random.Generator, specs, concentration: float = 1.0) -> JointTable:
    cells = int(np.prod([s.cardinality for s in specs]))
    return JointTable(specs, rng.dirichlet(np.full(cells, concentration)))


def random_specs(rng, n: int, max_card: int = 3):
    return make_specs(rng.integers(2, max_card + 1, size=n).tolist())
