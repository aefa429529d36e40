import math
from pathlib import Path

import pytest

from orderbn.core import Dataset, make_specs
from orderbn.empirical import EmpiricalContext
from orderbn.exact import JointTable, joint_from_bayesnet
from orderbn.generate import chain_net, random_bayesnet, random_dag, random_specs
from orderbn.core import NodeOrdering

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def copy_ctx():
    """Four rows where X1 copies X0: (0,0),(0,0),(1,1),(1,1)."""
    ds = Dataset(make_specs([2, 2]), [[0, 0], [0, 0], [1, 1], [1, 1]])
    return EmpiricalContext(ds)


@pytest.fixture
def table2():
    return JointTable(make_specs([2, 2]), [[0.4, 0.1], [0.2, 0.3]])


@pytest.fixture
def chain():
    return chain_net()


@pytest.fixture
def chain_joint(chain):
    return joint_from_bayesnet(chain)


def polya_log_marginal(child_values, parent_configs, n_states, pseudo):
    """Sequential-predictive oracle for the Dirichlet marginal likelihood:
    multiply p(x_t | x_<t) = (a + n_jk) / (r a + n_j) record by record."""
    seen: dict = {}
    total = 0.0
    for x, j in zip(child_values, parent_configs):
        row = seen.setdefault(j, [0] * n_states)
        total += math.log((pseudo + row[x]) / (n_states * pseudo + sum(row)))
        row[x] += 1
    return total


def random_dataset(rng, n_max=5, card_max=3, N_max=500, N_min=20):
    """Random specs, random dag on the identity ordering, sampled data."""
    from orderbn.exact import ancestral_sample

    n = int(rng.integers(2, n_max + 1))
    specs = random_specs(rng, n, card_max)
    ordering = NodeOrdering.identity(n)
    net = random_bayesnet(rng, specs, random_dag(rng, ordering, 0.5), floor=0.3)
    N = int(rng.integers(N_min, N_max + 1))
    return ancestral_sample(net, N, int(rng.integers(1 << 30))), net


def random_nested_pair(rng, n, i):
    others = [v for v in range(n) if v != i]
    new = [v for v in others if rng.random() < 0.6] or [int(rng.choice(others))]
    old = [v for v in new if rng.random() < 0.5]
    if len(old) == len(new):
        old = old[:-1]
    return old, new


def near_unfaithful(net, P, floor=1e-7):
    """True when some generating edge carries almost no information given the
    other parents, so the draw sits close to an accidental independence."""
    from orderbn.exact import conditional_cross_entropy

    for v in range(len(net.specs)):
        pa = net.dag.parents[v]
        for p in pa:
            if conditional_cross_entropy(P, {v}, {p}, pa - {p}) < floor:
                return True
    return False


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
