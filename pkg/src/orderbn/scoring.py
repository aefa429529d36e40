"""Scores and decision rules: deviance and chi-square, AIC, the Dirichlet
(Cooper-Herskovits) marginal likelihood, local Bayes factors, and the
accept/reject rules the search consumes.

Statistics are in nats. A rule's verdict ``independent=True`` means the
candidate parents are *not* added (or may be removed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import prod
from typing import Iterable, Optional, Union

import numpy as np

from .core import OrderedDag, num_free_parameters
from .empirical import (EmpiricalContext, dof_delta, empirical_cce,
                        log_likelihood, log_likelihood_ratio)
from .errors import RuleInputMismatch, ScopeOverlap
from .exact import JointTable, conditional_cross_entropy
from .special import chi2_sf, log_gamma

#: Floor applied to epsilon when the input is an exact distribution.
EXACT_EPSILON_FLOOR = 1e-12

UNIFORM = "uniform-alpha"
ESS = "equivalent-sample-size"


@dataclass(frozen=True)
class DirichletPrior:
    kind: str = UNIFORM
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in (UNIFORM, ESS):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if not self.alpha > 0:
            raise ValueError("prior alpha must be positive")

    def cell_pseudocount(self, n_configs: int, n_states: int) -> float:
        if self.kind == UNIFORM:
            return self.alpha
        return self.alpha / (n_configs * n_states)


EPSILON = "epsilon-threshold"
CHI2 = "chi-squared"
AIC = "aic"
BAYES = "bayes-factor"
RULE_KINDS = (EPSILON, CHI2, AIC, BAYES)


@dataclass(frozen=True)
class DecisionRule:
    kind: str
    epsilon: Optional[float] = None
    alpha_level: Optional[float] = None
    prior: Optional[DirichletPrior] = None
    log_threshold: Optional[float] = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        given = {k for k in ("epsilon", "alpha_level", "prior", "log_threshold") if getattr(self, k) is not None}
        needed = {EPSILON: {"epsilon"}, CHI2: {"alpha_level"}, AIC: set(),
                  BAYES: {"prior", "log_threshold"}}[self.kind]
        if given != needed:
            raise ValueError(f"rule {self.kind!r} takes exactly {sorted(needed)}, got {sorted(given)}")
        if self.kind == EPSILON and self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.kind == CHI2 and not 0 < self.alpha_level < 1:
            raise ValueError("alpha_level must lie in (0, 1)")

    @classmethod
    def epsilon_threshold(cls, epsilon: float) -> "DecisionRule":
        return cls(EPSILON, epsilon=float(epsilon))

    @classmethod
    def chi_squared(cls, alpha_level: float) -> "DecisionRule":
        return cls(CHI2, alpha_level=float(alpha_level))

    @classmethod
    def aic(cls) -> "DecisionRule":
        return cls(AIC)

    @classmethod
    def bayes_factor(cls, prior: DirichletPrior | None = None, log_threshold: float = 0.0) -> "DecisionRule":
        return cls(BAYES, prior=prior or DirichletPrior(), log_threshold=float(log_threshold))


@dataclass(frozen=True)
class TestOutcome:
    """Result of one independence decision.

    ``statistic`` is what the rule compares with ``threshold_used``: H for
    epsilon, the deviance 2NH for chi-squared and AIC, the log Bayes factor
    for Bayes. ``nats`` is H (or the log Bayes factor) regardless of rule.
    """

    __test__ = False

    statistic: float
    threshold_used: float
    dof: int
    independent: bool
    nats: float
    p_value: Optional[float] = None


def decide(kind: str, statistic: float, threshold: float, dof: int) -> bool:
    """The verdict as a pure function of the recorded quantities."""
    if kind == CHI2:
        p = 1.0 if dof == 0 else chi2_sf(statistic, dof)
        return p >= threshold
    return statistic <= threshold


def deviance_difference(ctx: EmpiricalContext, i: int, pa_old, pa_new) -> tuple[float, int]:
    """Twice the log-likelihood ratio of the nested families, with its dof."""
    dof = dof_delta(ctx.specs, i, pa_old, pa_new)
    return 2.0 * log_likelihood_ratio(ctx, i, pa_old, pa_new), dof


def aic_score(ctx: EmpiricalContext, dag: OrderedDag) -> float:
    """-2 log L + 2 k; lower is better."""
    return -2.0 * log_likelihood(ctx, dag) + 2.0 * num_free_parameters(ctx.specs, dag)


def _dirichlet_log_marginal(counts: np.ndarray, pseudo: float) -> float:
    """Closed-form log marginal likelihood of multinomial rows under a
    symmetric Dirichlet with ``pseudo`` per cell; ``counts`` is (rows, states)."""
    counts = np.asarray(counts, dtype=float)
    r = counts.shape[1]
    a_row = pseudo * r
    n_row = counts.sum(axis=1)
    per_row = log_gamma(np.full(n_row.shape, a_row)) - log_gamma(a_row + n_row)
    per_cell = log_gamma(pseudo + counts) - log_gamma(np.full(counts.shape, pseudo))
    # correctly rounded sums: independent of row and cell order
    return math.fsum(per_row.ravel()) + math.fsum(per_cell.ravel())


def ch_family_log_marginal(ctx: EmpiricalContext, i: int, pa: Iterable[int],
                           prior: DirichletPrior = DirichletPrior()) -> float:
    """Log marginal likelihood of node i's family (Cooper-Herskovits form)."""
    pa = tuple(sorted(set(pa)))
    r = ctx.specs[i].cardinality
    q = prod(ctx.specs[p].cardinality for p in pa)
    counts = ctx.counts(pa + (i,)).reshape(q, r)
    return _dirichlet_log_marginal(counts, prior.cell_pseudocount(q, r))


def log_marginal_likelihood(ctx: EmpiricalContext, dag: OrderedDag,
                            prior: DirichletPrior = DirichletPrior()) -> float:
    """log p(D | g) as the sum of family terms."""
    return math.fsum(ch_family_log_marginal(ctx, v, dag.parents[v], prior) for v in range(len(ctx.specs)))


def log_bayes_factor(ctx: EmpiricalContext, i: int, pa_old, pa_new,
                     prior: DirichletPrior = DirichletPrior()) -> float:
    """log p(D | g') - log p(D | g); positive favours the larger parent set."""
    dof_delta(ctx.specs, i, pa_old, pa_new)  # nesting check
    return ch_family_log_marginal(ctx, i, pa_new, prior) - ch_family_log_marginal(ctx, i, pa_old, prior)


def bayes_independence_test(ctx: EmpiricalContext, i: int, S: Iterable[int], C: Iterable[int] = (),
                            prior: DirichletPrior = DirichletPrior()) -> float:
    """Log posterior odds of dependence (H0: X_i depends on X_S given X_C) against
    conditional independence (H1), equal prior odds.

    Both hypotheses model the (S, C) margin with one shared Dirichlet
    parameter, and X_i given either (S, C) or C alone.
    """
    S, C = tuple(sorted(set(S))), tuple(sorted(set(C)))
    if i in S or i in C or set(S) & set(C):
        raise ScopeOverlap(f"scopes overlap: i={i}, S={S}, C={C}")
    specs = ctx.specs
    r = specs[i].cardinality
    q_c = prod(specs[v].cardinality for v in C)
    q_cs = q_c * prod(specs[v].cardinality for v in S)
    full = np.asarray(ctx.counts(C + S + (i,)), dtype=float).reshape(q_c, q_cs // q_c, r)

    margin = full.sum(axis=2).reshape(1, q_cs)
    shared = _dirichlet_log_marginal(margin, prior.cell_pseudocount(1, q_cs))

    log_h0 = _dirichlet_log_marginal(full.reshape(q_cs, r), prior.cell_pseudocount(q_cs, r)) + shared
    log_h1 = _dirichlet_log_marginal(full.sum(axis=1), prior.cell_pseudocount(q_c, r)) + shared
    return log_h0 - log_h1


Source = Union[EmpiricalContext, JointTable]


def evaluate_rule(rule: DecisionRule, source: Source, i: int, S: Iterable[int],
                  C: Iterable[int] = ()) -> TestOutcome:
    """Accept or reject X_i independent of X_S given X_C under ``rule``.

    ``source`` is an :class:`EmpiricalContext` (any rule) or a
    :class:`JointTable` (epsilon rule only).
    """
    S, C = set(S), set(C)
    exact = isinstance(source, JointTable)
    if exact and rule.kind != EPSILON:
        raise RuleInputMismatch(f"rule {rule.kind!r} needs data; exact distributions take the epsilon rule")
    if i in S or i in C or S & C:
        raise ScopeOverlap(f"scopes overlap: i={i}, S={sorted(S)}, C={sorted(C)}")
    specs = source.specs
    dof = dof_delta(specs, i, C, C | S)

    if rule.kind == BAYES:
        lbf = bayes_independence_test(source, i, S, C, rule.prior)
        return TestOutcome(lbf, rule.log_threshold, dof, decide(BAYES, lbf, rule.log_threshold, dof), lbf)

    if exact:
        h = conditional_cross_entropy(source, {i}, S, C)
        eps = max(rule.epsilon, EXACT_EPSILON_FLOOR)
        return TestOutcome(h, eps, dof, decide(EPSILON, h, eps, dof), h)

    h = empirical_cce(source, i, S, C)
    if rule.kind == EPSILON:
        return TestOutcome(h, rule.epsilon, dof, decide(EPSILON, h, rule.epsilon, dof), h)
    dev = 2.0 * source.N * h
    if rule.kind == CHI2:
        p = 1.0 if dof == 0 else chi2_sf(dev, dof)
        return TestOutcome(dev, rule.alpha_level, dof, decide(CHI2, dev, rule.alpha_level, dof), h, p)
    return TestOutcome(dev, 2.0 * dof, dof, decide(AIC, dev, 2.0 * dof, dof), h)
