"""Greedy grow/thin parent selection under a fixed node ordering.

For each node the search starts with no parents, and while the node is not
judged independent of all its remaining predecessors it adds the single
predecessor with the largest statistic. It then thins the parent set,
removing any parent judged independent given the others. The decision
inputs come from an evaluator; swapping evaluators (exact distribution,
counts, likelihood scores) changes nothing else.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Protocol, Sequence

from .core import NodeOrdering, OrderedDag, validate_dag
from .empirical import EmpiricalContext
from .errors import TooManyPredecessors
from .exact import JointTable
from .scoring import DecisionRule, TestOutcome, evaluate_rule

#: Statistics closer than this (nats) count as tied; ties go to the smallest index.
TIE_TOL = 1e-9
MAX_EXHAUSTIVE_PREDECESSORS = 12


class NodeEvaluator(Protocol):
    kind: str
    n_obs: Optional[int]
    specs: tuple

    def evaluate(self, rule: DecisionRule, i: int, S, C) -> TestOutcome: ...


class ExactEvaluator:
    kind = "exact"
    n_obs = None

    def __init__(self, P: JointTable):
        self.P = P
        self.specs = P.specs

    def evaluate(self, rule, i, S, C):
        return evaluate_rule(rule, self.P, i, S, C)


class EmpiricalEvaluator:
    kind = "empirical"

    def __init__(self, ctx: EmpiricalContext):
        self.ctx = ctx
        self.specs = ctx.specs
        self.n_obs = ctx.N

    def evaluate(self, rule, i, S, C):
        return evaluate_rule(rule, self.ctx, i, S, C)


@dataclass(frozen=True)
class SearchConfig:
    """``max_subset_size`` > 1 lets growth add a whole subset of predecessors at
    once. ``stop_when_no_candidate_passes`` ends growth when every candidate's
    own test accepts independence even though the full-remainder test rejects;
    by default the best candidate is added anyway."""

    max_subset_size: int = 1
    stop_when_no_candidate_passes: bool = False

    def __post_init__(self):
        if not 1 <= self.max_subset_size <= 3:
            raise ValueError("max_subset_size must be 1, 2 or 3")


@dataclass(frozen=True)
class SearchStep:
    node: int
    phase: str  # "grow" or "thin"
    candidate: tuple[int, ...]  # remainder tested (grow) or removal target (thin)
    statistic: float  # nats
    verdict: bool  # independence accepted
    parents_after: tuple[int, ...]
    selected: Optional[tuple[int, ...]] = None
    selected_statistic: Optional[float] = None


@dataclass
class SearchTrace:
    rule: DecisionRule
    evaluator_kind: str
    steps: dict[int, list[SearchStep]] = field(default_factory=dict)

    def all_steps(self, ordering: Sequence[int] | None = None) -> list[SearchStep]:
        nodes = ordering if ordering is not None else sorted(self.steps)
        return [s for v in nodes for s in self.steps.get(v, [])]

    def replay(self, n: int) -> list[frozenset[int]]:
        """Parent sets implied by the last step of each node."""
        out = [frozenset()] * n
        for v, steps in self.steps.items():
            if steps:
                out[v] = frozenset(steps[-1].parents_after)
        return out


def _best(outcomes):
    best_set, best = None, None
    for cand, out in outcomes:
        if best is None or out.nats > best.nats + TIE_TOL:
            best_set, best = cand, out
    return best_set, best


def grow_parents(evaluator: NodeEvaluator, i: int, rule: DecisionRule, predecessors: Sequence[int],
                 config: SearchConfig = SearchConfig()):
    parents: list[int] = []
    remaining = sorted(predecessors)
    steps: list[SearchStep] = []
    while remaining:
        guard = evaluator.evaluate(rule, i, remaining, parents)
        if guard.independent:
            steps.append(SearchStep(i, "grow", tuple(remaining), guard.nats, True, tuple(sorted(parents))))
            break
        cands = [c for k in range(1, config.max_subset_size + 1) for c in combinations(remaining, k)]
        outcomes = [(c, evaluator.evaluate(rule, i, c, parents)) for c in cands]
        chosen, out = _best(outcomes)
        if config.stop_when_no_candidate_passes and all(o.independent for _, o in outcomes):
            steps.append(SearchStep(i, "grow", tuple(remaining), guard.nats, False, tuple(sorted(parents))))
            break
        before = tuple(remaining)
        parents.extend(chosen)
        remaining = [v for v in remaining if v not in chosen]
        steps.append(SearchStep(i, "grow", before, guard.nats, False, tuple(sorted(parents)),
                                tuple(chosen), out.nats))
    return frozenset(parents), steps


def thin_parents(evaluator: NodeEvaluator, i: int, parents, rule: DecisionRule):
    current = sorted(parents)
    steps: list[SearchStep] = []
    removed = True
    while removed:
        removed = False
        for y in current:
            rest = [v for v in current if v != y]
            out = evaluator.evaluate(rule, i, [y], rest)
            after = rest if out.independent else current
            steps.append(SearchStep(i, "thin", (y,), out.nats, out.independent, tuple(after)))
            if out.independent:
                current = rest
                removed = True
                break
    return frozenset(current), steps


def learn_node(evaluator, i, rule, predecessors, config=SearchConfig()):
    grown, steps = grow_parents(evaluator, i, rule, predecessors, config)
    final, thin_steps = thin_parents(evaluator, i, grown, rule)
    return final, steps + thin_steps


def learn_structure(evaluator: NodeEvaluator, ordering: NodeOrdering, rule: DecisionRule,
                    config: SearchConfig = SearchConfig(), max_workers: int | None = None):
    """Run the per-node search for every node; returns ``(dag, trace)``."""
    def run(v):
        return learn_node(evaluator, v, rule, ordering.predecessors(v), config)

    nodes = list(ordering)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            results = list(pool.map(run, nodes))
    else:
        results = [run(v) for v in nodes]
    trace = SearchTrace(rule, evaluator.kind)
    parents = [frozenset()] * len(nodes)
    for v, (pa, steps) in zip(nodes, results):
        parents[v] = pa
        trace.steps[v] = steps
    return validate_dag(None, ordering, parents), trace


def exhaustive_parents(evaluator: NodeEvaluator, i: int, rule: DecisionRule,
                       predecessors: Sequence[int]) -> frozenset[int]:
    """Smallest parent set (lexicographically first among equals) that renders
    ``i`` independent of its other predecessors."""
    preds = sorted(predecessors)
    if len(preds) > MAX_EXHAUSTIVE_PREDECESSORS:
        raise TooManyPredecessors(f"{len(preds)} predecessors exceeds {MAX_EXHAUSTIVE_PREDECESSORS}")
    for k in range(len(preds) + 1):
        for pa in combinations(preds, k):
            rest = [v for v in preds if v not in pa]
            if not rest or evaluator.evaluate(rule, i, rest, pa).independent:
                return frozenset(pa)
    return frozenset(preds)


def recover_from_distribution(P: JointTable, ordering: NodeOrdering, epsilon: float) -> OrderedDag:
    """Simplest order-consistent dag whose projection reproduces ``P`` up to epsilon."""
    dag, _ = learn_structure(ExactEvaluator(P), ordering, DecisionRule.epsilon_threshold(epsilon))
    return dag
