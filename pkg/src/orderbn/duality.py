"""Executable equivalence checks between independence-test search and
score-based search.

Two families of evaluators are defined here. The CI-framed evaluator works
from probability tables (the exact P, or p-hat = counts / N on the family
scope) and computes expectation-form cross entropies. The score-framed
evaluator works from raw counts or conditional tables and computes
likelihood-form quantities: per-case log-likelihood gains, deviances, AIC
differences and log Bayes factors. Both drive the same search; the harness
checks that they walk the same path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import NodeOrdering, OrderedDag, validate_dag
from .empirical import (EmpiricalContext, dof_delta, empirical_cce,
                        log_likelihood_ratio)
from .errors import RuleInputMismatch, ScopeOverlap
from .exact import (JointTable, clamp_nonnegative, conditional_cross_entropy,
                    cross_entropy_from_table, kl_decomposed, marginalize)
from .scoring import (BAYES, CHI2, EPSILON, EXACT_EPSILON_FLOOR,
                      DecisionRule, DirichletPrior, TestOutcome,
                      bayes_independence_test, decide, log_bayes_factor)
from .search import SearchConfig, SearchTrace, learn_structure
from .special import chi2_sf

Source = Union[EmpiricalContext, JointTable]


@dataclass
class IdentityReport:
    name: str
    instances: int
    max_discrepancy: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance

    def merge(self, other: "IdentityReport") -> "IdentityReport":
        return IdentityReport(self.name, self.instances + other.instances,
                              max(self.max_discrepancy, other.max_discrepancy), self.tolerance)

    def as_dict(self):
        return {"identity": self.name, "instances": self.instances,
                "max_discrepancy": self.max_discrepancy, "tolerance": self.tolerance,
                "passed": self.passed}


def _direct_node_divergence(P: JointTable, i: int, preds, pa) -> float:
    """sum over (x_i, x_preds) of p log[p(x_i | x_preds) / p(x_i | x_pa)], cell by cell."""
    preds = tuple(sorted(preds))
    pa = tuple(sorted(pa))
    scope = preds + (i,)
    joint = marginalize(P, scope)
    pred_marg = marginalize(P, preds)
    fam = marginalize(P, pa + (i,))
    pa_marg = marginalize(P, pa)
    pos = {v: k for k, v in enumerate(preds)}
    total = 0.0
    for cell in itertools.product(*(range(n) for n in joint.shape)):
        p = float(joint[cell])
        if p == 0.0:
            continue
        x_pred = cell[:-1]
        x_pa = tuple(x_pred[pos[v]] for v in pa)
        full_cond = p / float(pred_marg[x_pred])
        pa_cond = float(fam[x_pa + (cell[-1],)]) / float(pa_marg[x_pa])
        total += p * math.log(full_cond / pa_cond)
    return total


def verify_kl_identity(P: JointTable, dag: OrderedDag, tol: float = 1e-10) -> IdentityReport:
    """Per-node KL terms against a cell-by-cell conditional-divergence sum."""
    _, per_node = kl_decomposed(P, dag)
    worst = 0.0
    for i in range(P.n_vars):
        direct = _direct_node_divergence(P, i, dag.ordering.predecessors(i), dag.parents[i])
        worst = max(worst, abs(per_node[i] - direct))
    return IdentityReport("kl-term == cross-entropy", P.n_vars, worst, tol)


def verify_llr_identity(ctx: EmpiricalContext, i: int, pa_old, pa_new, tol: float = 1e-10) -> IdentityReport:
    """(1/N) log-likelihood ratio against the empirical conditional cross entropy."""
    llr = log_likelihood_ratio(ctx, i, pa_old, pa_new)
    cce = empirical_cce(ctx, i, set(pa_new) - set(pa_old), pa_old)
    disc = abs(llr / ctx.N - cce) if ctx.N else abs(cce)
    return IdentityReport("llr/N == empirical cross-entropy", 1, disc, tol)


def verify_bayes_identity(ctx: EmpiricalContext, i: int, S, C, prior: DirichletPrior = DirichletPrior(),
                          tol: float = 1e-10) -> IdentityReport:
    """Bayesian independence test against the local log Bayes factor."""
    S, C = set(S), set(C)
    if i in S or i in C or S & C:
        raise ScopeOverlap(f"scopes overlap: i={i}, S={sorted(S)}, C={sorted(C)}")
    a = bayes_independence_test(ctx, i, S, C, prior)
    b = log_bayes_factor(ctx, i, C, C | S, prior)
    return IdentityReport("bayes CI test == log Bayes factor", 1, abs(a - b), tol)


class CIEvaluator:
    """Independence-test framing: cross entropies of probability tables."""

    framing = "ci"

    def __init__(self, source: Source):
        self.source = source
        self.specs = source.specs
        self.exact = isinstance(source, JointTable)
        self.kind = "exact" if self.exact else "empirical"
        self.n_obs = None if self.exact else source.N

    def _h(self, i, S, C):
        if self.exact:
            return conditional_cross_entropy(self.source, {i}, S, C)
        scope = tuple(sorted(set(S) | set(C) | {i}))
        if self.source.N == 0:
            return 0.0
        p_hat = self.source.counts(scope) / self.source.N
        return cross_entropy_from_table(p_hat, scope, {i}, S, C)

    def evaluate(self, rule, i, S, C):
        S, C = set(S), set(C)
        if self.exact and rule.kind != EPSILON:
            raise RuleInputMismatch(f"rule {rule.kind!r} needs data")
        dof = dof_delta(self.specs, i, C, C | S)
        if rule.kind == BAYES:
            lbf = bayes_independence_test(self.source, i, S, C, rule.prior)
            return TestOutcome(lbf, rule.log_threshold, dof, decide(BAYES, lbf, rule.log_threshold, dof), lbf)
        h = self._h(i, S, C)
        if rule.kind == EPSILON:
            eps = max(rule.epsilon, EXACT_EPSILON_FLOOR) if self.exact else rule.epsilon
            return TestOutcome(h, eps, dof, decide(EPSILON, h, eps, dof), h)
        stat = 2.0 * self.n_obs * h
        if rule.kind == CHI2:
            p = 1.0 if dof == 0 else chi2_sf(stat, dof)
            return TestOutcome(stat, rule.alpha_level, dof, p >= rule.alpha_level, h, p)
        return TestOutcome(stat, 2.0 * dof, dof, stat <= 2.0 * dof, h)


class ScoreEvaluator:
    """Score framing: changes in (expected) log-likelihood and marginal likelihood
    between the family with parents C and the family with parents C + S."""

    framing = "score"

    def __init__(self, source: Source):
        self.source = source
        self.specs = source.specs
        self.exact = isinstance(source, JointTable)
        self.kind = "exact" if self.exact else "empirical"
        self.n_obs = None if self.exact else source.N

    def _expected_family_loglik(self, i, pa):
        """E_P log P(X_i | X_pa) using the conditional table copied from P."""
        pa = tuple(sorted(pa))
        r = self.specs[i].cardinality
        fam = marginalize(self.source, pa + (i,)).reshape(-1, r)
        tot = fam.sum(axis=1, keepdims=True)
        cond = np.divide(fam, tot, out=np.ones_like(fam), where=tot > 0)
        nz = fam > 0
        return float(np.sum(fam[nz] * np.log(cond[nz])))

    def _gain(self, i, S, C):
        """Per-case improvement in log-score from adding S to i's parents C."""
        if self.exact:
            g = self._expected_family_loglik(i, C | S) - self._expected_family_loglik(i, C)
            return clamp_nonnegative(g, "expected log-likelihood gain")
        if self.source.N == 0:
            return 0.0
        return log_likelihood_ratio(self.source, i, C, C | S) / self.source.N

    def evaluate(self, rule, i, S, C):
        S, C = set(S), set(C)
        if self.exact and rule.kind != EPSILON:
            raise RuleInputMismatch(f"rule {rule.kind!r} needs data")
        dof = dof_delta(self.specs, i, C, C | S)
        if rule.kind == BAYES:
            lbf = log_bayes_factor(self.source, i, C, C | S, rule.prior) if S else 0.0
            return TestOutcome(lbf, rule.log_threshold, dof, lbf <= rule.log_threshold, lbf)
        if rule.kind == EPSILON:
            gain = self._gain(i, S, C)
            eps = max(rule.epsilon, EXACT_EPSILON_FLOOR) if self.exact else rule.epsilon
            return TestOutcome(gain, eps, dof, gain <= eps, gain)
        llr = log_likelihood_ratio(self.source, i, C, C | S)
        deviance = 2.0 * llr
        gain = llr / self.n_obs if self.n_obs else 0.0
        if rule.kind == CHI2:
            p = 1.0 if dof == 0 else chi2_sf(deviance, dof)
            return TestOutcome(deviance, rule.alpha_level, dof, p >= rule.alpha_level, gain, p)
        # AIC(g') - AIC(g) = -deviance + 2 dof; no improvement means keep g
        return TestOutcome(deviance, 2.0 * dof, dof, 2.0 * dof - deviance >= 0.0, gain)


@dataclass
class DualSearchReport:
    rule: DecisionRule
    ci_parents: list
    score_parents: list
    structures_equal: bool
    steps_equal: bool
    max_discrepancy: float
    tolerance: float
    ci_trace: SearchTrace = field(repr=False)
    score_trace: SearchTrace = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.structures_equal and self.steps_equal and self.max_discrepancy <= self.tolerance

    def as_dict(self):
        return {"rule": self.rule.kind,
                "ci_parents": [sorted(p) for p in self.ci_parents],
                "score_parents": [sorted(p) for p in self.score_parents],
                "structures_equal": self.structures_equal, "steps_equal": self.steps_equal,
                "max_discrepancy": self.max_discrepancy, "tolerance": self.tolerance,
                "passed": self.passed}


def _stat_gap(a, b):
    if a is None or b is None:
        return 0.0 if a is b else math.inf
    return abs(a - b)


def dual_search(source: Source, ordering: NodeOrdering, rule: DecisionRule, tol: float = 1e-10,
                config: SearchConfig = SearchConfig()) -> DualSearchReport:
    """Run the search under CI framing and under score framing and compare."""
    ci_dag, ci_trace = learn_structure(CIEvaluator(source), ordering, rule, config)
    sc_dag, sc_trace = learn_structure(ScoreEvaluator(source), ordering, rule, config)
    ci_steps = ci_trace.all_steps(ordering.order)
    sc_steps = sc_trace.all_steps(ordering.order)
    keyed = lambda s: (s.node, s.phase, s.candidate, s.verdict, s.parents_after, s.selected)
    steps_equal = len(ci_steps) == len(sc_steps) and all(keyed(a) == keyed(b) for a, b in zip(ci_steps, sc_steps))
    worst = 0.0
    for a, b in zip(ci_steps, sc_steps):
        worst = max(worst, abs(a.statistic - b.statistic), _stat_gap(a.selected_statistic, b.selected_statistic))
    return DualSearchReport(rule, list(ci_dag.parents), list(sc_dag.parents),
                            ci_dag.parents == sc_dag.parents, steps_equal, worst, tol, ci_trace, sc_trace)


def all_ordered_dags(ordering: NodeOrdering):
    """Every dag consistent with ``ordering`` (2^(n(n-1)/2) of them)."""
    choices = [[frozenset(c) for k in range(len(ordering.predecessors(v)) + 1)
                for c in itertools.combinations(ordering.predecessors(v), k)]
               for v in range(len(ordering))]
    for parents in itertools.product(*choices):
        yield validate_dag(None, ordering, list(parents))


def exhaustive_min_edge_dag(P: JointTable, ordering: NodeOrdering, epsilon: float) -> Optional[OrderedDag]:
    """Fewest-edge dag whose projection is within ``epsilon`` of P in KL
    (ties: first in enumeration order)."""
    best = None
    for dag in all_ordered_dags(ordering):
        if kl_decomposed(P, dag)[0] <= epsilon and (best is None or dag.num_edges() < best.num_edges()):
            best = dag
    return best


def random_identity_batch(ctx: EmpiricalContext, rng: np.random.Generator, instances: int,
                          prior: DirichletPrior = DirichletPrior(), tol: float = 1e-10):
    """Draw random nested parent pairs on a dataset and check both finite-data
    identities. Returns ``(llr_report, bayes_report)``."""
    n = len(ctx.specs)
    llr = IdentityReport("llr/N == empirical cross-entropy", 0, 0.0, tol)
    bayes = IdentityReport("bayes CI test == log Bayes factor", 0, 0.0, tol)
    if n < 2:
        return llr, bayes
    for _ in range(instances):
        i = int(rng.integers(n))
        others = [v for v in range(n) if v != i]
        new = [v for v in others if rng.random() < 0.6] or [others[int(rng.integers(len(others)))]]
        old = [v for v in new if rng.random() < 0.5]
        if len(old) == len(new):
            old = old[:-1]
        llr = llr.merge(verify_llr_identity(ctx, i, old, new, tol))
        bayes = bayes.merge(verify_bayes_identity(ctx, i, set(new) - set(old), old, prior, tol))
    return llr, bayes
