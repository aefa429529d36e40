import math
from itertools import product

import numpy as np
import pytest
from scipy import integrate

from orderbn.core import Dataset, NodeOrdering, OrderedDag, make_specs, validate_dag
from orderbn.empirical import EmpiricalContext, empirical_cce
from orderbn.errors import DomainError, NotNested, RuleInputMismatch, ScopeOverlap
from orderbn.exact import ancestral_sample
from orderbn.generate import random_bayesnet
from orderbn.scoring import (DecisionRule, DirichletPrior, TestOutcome, aic_score,
                             bayes_independence_test, ch_family_log_marginal, decide,
                             deviance_difference, evaluate_rule, log_bayes_factor,
                             log_marginal_likelihood)
from orderbn.special import chi2_sf, log_gamma

from conftest import polya_log_marginal, random_dataset, random_nested_pair


def chi2_tail_quad(x, k):
    """Oracle: integrate the chi-square density over [0, x] and take the complement."""
    norm = 2 ** (k / 2) * math.gamma(k / 2)
    pdf = lambda t: t ** (k / 2 - 1) * math.exp(-t / 2) / norm
    if k == 1:
        # integrable singularity at 0: substitute t = u^2
        body, _ = integrate.quad(lambda u: 2 * u * pdf(u * u) if u > 0 else 2 / math.sqrt(2 * math.pi),
                                 0, math.sqrt(x), epsabs=1e-13, epsrel=1e-13, limit=200)
    else:
        body, _ = integrate.quad(pdf, 0, x, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 1.0 - body


class TestLogGamma:
    def test_values(self):
        assert log_gamma(1.0) == 0.0
        assert log_gamma(5.0) == pytest.approx(math.log(24), rel=1e-14)
        assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            log_gamma(0.0)
        with pytest.raises(DomainError):
            log_gamma(-1.5)

    def test_recurrence(self):
        for x in np.linspace(0.1, 50, 400):
            assert abs(log_gamma(x + 1) - log_gamma(x) - math.log(x)) <= 1e-11

    def test_array(self):
        np.testing.assert_allclose(log_gamma(np.array([1.0, 2.0, 3.0])), [0, 0, math.log(2)], atol=1e-15)


class TestChi2:
    def test_zero(self):
        assert chi2_sf(0.0, 3) == 1.0

    def test_reference_points(self):
        assert chi2_sf(3.841459, 1) == pytest.approx(chi2_tail_quad(3.841459, 1), abs=1e-8)
        assert chi2_sf(3.841459, 1) == pytest.approx(0.05, abs=1e-6)
        assert chi2_sf(9.210340, 2) == pytest.approx(math.exp(-9.210340 / 2), abs=1e-12)
        assert chi2_sf(9.210340, 2) == pytest.approx(0.01, abs=1e-6)

    @pytest.mark.parametrize("x,k", [(0.5, 1), (2.0, 3), (10.0, 4), (1.0, 7), (25.0, 10)])
    def test_matches_quadrature(self, x, k):
        assert chi2_sf(x, k) == pytest.approx(chi2_tail_quad(x, k), abs=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            chi2_sf(1.0, 0)


class TestDeviance:
    def test_copy(self, copy_ctx):
        stat, dof = deviance_difference(copy_ctx, 1, set(), {0})
        assert stat == pytest.approx(8 * math.log(2), abs=1e-14) and dof == 1
        assert stat == pytest.approx(5.545177, abs=1e-6)

    def test_constant_parent(self):
        ctx = EmpiricalContext(Dataset(make_specs([2, 2]), [[1, 0], [1, 1], [1, 1]]))
        assert deviance_difference(ctx, 1, set(), {0})[0] == 0.0

    def test_twice_N_cce(self):
        rng = np.random.default_rng(12)
        for _ in range(40):
            ds, _ = random_dataset(rng)
            ctx = EmpiricalContext(ds)
            i = int(rng.integers(ds.n_vars))
            old, new = random_nested_pair(rng, ds.n_vars, i)
            stat, _ = deviance_difference(ctx, i, old, new)
            assert abs(stat - 2 * ds.n_rows * empirical_cce(ctx, i, set(new) - set(old), old)) <= 1e-9


class TestAIC:
    def test_single_binary(self):
        ctx = EmpiricalContext(Dataset(make_specs([2]), [[0], [0], [0], [1]]))
        aic = aic_score(ctx, OrderedDag.empty(NodeOrdering.identity(1)))
        assert aic == pytest.approx(-2 * (3 * math.log(0.75) + math.log(0.25)) + 2, abs=1e-13)
        assert aic == pytest.approx(6.498682, abs=1e-6)

    def test_nested_comparison_matches_deviance_rule(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            ds, _ = random_dataset(rng, N_max=60)
            ctx = EmpiricalContext(ds)
            ordering = NodeOrdering.identity(ds.n_vars)
            i = int(rng.integers(1, ds.n_vars))
            new = [v for v in range(i) if rng.random() < 0.7] or [0]
            old = new[:-1]
            g = validate_dag(None, ordering, {i: old})
            g2 = validate_dag(None, ordering, {i: new})
            dev, dof = deviance_difference(ctx, i, old, new)
            assert (aic_score(ctx, g2) < aic_score(ctx, g)) == (dev > 2 * dof)

    def test_constant_parent_costs_two_dof(self):
        ctx = EmpiricalContext(Dataset(make_specs([3, 2]), [[1, 0], [1, 1], [1, 1], [1, 0]]))
        ordering = NodeOrdering.identity(2)
        g = OrderedDag.empty(ordering)
        g2 = validate_dag(None, ordering, {1: [0]})
        assert aic_score(ctx, g2) - aic_score(ctx, g) == pytest.approx(2 * 2, abs=1e-12)


class TestCooperHerskovits:
    def test_two_rows(self):
        ctx = EmpiricalContext(Dataset(make_specs([2]), [[0], [1]]))
        assert ch_family_log_marginal(ctx, 0, ()) == pytest.approx(math.log(1 / 6), abs=1e-14)

    def test_three_one(self):
        ctx = EmpiricalContext(Dataset(make_specs([2]), [[0], [0], [0], [1]]))
        assert ch_family_log_marginal(ctx, 0, ()) == pytest.approx(math.log(1 / 20), abs=1e-14)

    def test_empty(self):
        ctx = EmpiricalContext(Dataset(make_specs([2, 3]), []))
        assert ch_family_log_marginal(ctx, 0, (1,)) == 0.0

    def test_matches_polya_oracle(self):
        rng = np.random.default_rng(14)
        for _ in range(60):
            n = int(rng.integers(2, 4))
            cards = rng.integers(2, 4, size=n).tolist()
            specs = make_specs(cards)
            N = int(rng.integers(0, 13))
            ds = Dataset(specs, np.column_stack([rng.integers(0, k, size=N) for k in cards]) if N else [])
            ctx = EmpiricalContext(ds)
            alpha = float(rng.choice([0.5, 1.0, 2.0]))
            i = n - 1
            pa = [v for v in range(i) if rng.random() < 0.6]
            q = int(np.prod([cards[p] for p in pa])) if pa else 1
            for prior in (DirichletPrior(alpha=alpha), DirichletPrior("equivalent-sample-size", alpha)):
                pseudo = prior.cell_pseudocount(q, cards[i])
                configs = [tuple(r[p] for p in pa) for r in ds.rows]
                oracle = polya_log_marginal(ds.rows[:, i].tolist(), configs, cards[i], pseudo)
                assert abs(ch_family_log_marginal(ctx, i, pa, prior) - oracle) <= 1e-9

    @pytest.mark.parametrize("N", [1, 2, 3, 4])
    def test_normalizes_over_datasets(self, N):
        """Summing the marginal likelihood over every dataset of size N gives 1."""
        specs = make_specs([2, 2])
        for prior in (DirichletPrior(alpha=1.0), DirichletPrior(alpha=0.5)):
            total = 0.0
            # each ordered sequence of N records counted once: sum over sequences
            for seq in product(range(4), repeat=N):
                rows = [divmod(c, 2) for c in seq]
                ctx = EmpiricalContext(Dataset(specs, rows))
                total += math.exp(ch_family_log_marginal(ctx, 1, (0,), prior)
                                  + ch_family_log_marginal(ctx, 0, (), prior))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_graph_score_is_sum_of_families(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            ds, net = random_dataset(rng)
            ctx = EmpiricalContext(ds)
            parts = sum(ch_family_log_marginal(ctx, v, net.dag.parents[v]) for v in range(ds.n_vars))
            assert log_marginal_likelihood(ctx, net.dag) == pytest.approx(parts, abs=1e-9)


class TestBayesFactor:
    def test_copy(self, copy_ctx):
        assert log_bayes_factor(copy_ctx, 1, set(), {0}) == pytest.approx(math.log(10 / 3), abs=1e-12)
        assert bayes_independence_test(copy_ctx, 1, {0}, set()) == pytest.approx(math.log(10 / 3), abs=1e-12)

    def test_empty(self):
        ctx = EmpiricalContext(Dataset(make_specs([2, 2]), []))
        assert log_bayes_factor(ctx, 1, set(), {0}) == 0.0
        assert bayes_independence_test(ctx, 1, {0}) == 0.0

    def test_constant_parent(self):
        """A parent stuck in one state: under uniform-alpha the unseen parent
        rows contribute nothing, so the factor is 0; the ESS prior spreads its
        mass over more cells and penalizes the extra parent."""
        rows = [[0, 0], [0, 1], [0, 1], [0, 0], [0, 1]]
        ctx = EmpiricalContext(Dataset(make_specs([2, 2]), rows))
        assert log_bayes_factor(ctx, 1, set(), {0}) == pytest.approx(0.0, abs=1e-12)
        # direct lnGamma evaluation, ESS alpha=2: child counts (2, 3)
        lg = math.lgamma
        without = lg(2) - lg(7) + lg(1 + 2) - lg(1) + lg(1 + 3) - lg(1)
        with_pa = lg(1) - lg(6) + lg(0.5 + 2) - lg(0.5) + lg(0.5 + 3) - lg(0.5)
        ess = DirichletPrior("equivalent-sample-size", 2.0)
        lbf = log_bayes_factor(ctx, 1, set(), {0}, ess)
        assert lbf == pytest.approx(with_pa - without, abs=1e-12)
        assert lbf < 0

    def test_ci_test_equals_bayes_factor(self):
        rng = np.random.default_rng(16)
        for _ in range(100):
            ds, _ = random_dataset(rng)
            ctx = EmpiricalContext(ds)
            i = int(rng.integers(ds.n_vars))
            old, new = random_nested_pair(rng, ds.n_vars, i)
            prior = DirichletPrior(alpha=float(rng.choice([0.5, 1.0, 2.0])))
            a = bayes_independence_test(ctx, i, set(new) - set(old), old, prior)
            b = log_bayes_factor(ctx, i, old, new, prior)
            assert abs(a - b) <= 1e-10

    def test_errors(self, copy_ctx):
        with pytest.raises(NotNested):
            log_bayes_factor(copy_ctx, 1, {0}, set())
        with pytest.raises(ScopeOverlap):
            bayes_independence_test(copy_ctx, 1, {1})


class TestEvaluateRule:
    def test_epsilon(self, copy_ctx):
        out = evaluate_rule(DecisionRule.epsilon_threshold(0.1), copy_ctx, 1, {0})
        assert out.statistic == pytest.approx(math.log(2)) and not out.independent
        out = evaluate_rule(DecisionRule.epsilon_threshold(0.7), copy_ctx, 1, {0})
        assert out.independent

    def test_chi2(self, copy_ctx):
        out = evaluate_rule(DecisionRule.chi_squared(0.05), copy_ctx, 1, {0})
        assert out.statistic == pytest.approx(5.545177, abs=1e-6) and out.dof == 1
        assert out.p_value == pytest.approx(chi2_tail_quad(out.statistic, 1), abs=1e-8)
        assert out.p_value == pytest.approx(0.0185, abs=1e-4)
        assert not out.independent

    def test_aic(self, copy_ctx):
        out = evaluate_rule(DecisionRule.aic(), copy_ctx, 1, {0})
        assert out.threshold_used == 2.0 and not out.independent

    def test_bayes(self, copy_ctx):
        out = evaluate_rule(DecisionRule.bayes_factor(), copy_ctx, 1, {0})
        assert out.statistic == pytest.approx(math.log(10 / 3)) and not out.independent
        out = evaluate_rule(DecisionRule.bayes_factor(log_threshold=2.0), copy_ctx, 1, {0})
        assert out.independent

    def test_exact_only_epsilon(self, chain_joint):
        with pytest.raises(RuleInputMismatch):
            evaluate_rule(DecisionRule.chi_squared(0.05), chain_joint, 2, {0}, {1})
        out = evaluate_rule(DecisionRule.epsilon_threshold(0.0), chain_joint, 2, {0}, {1})
        assert out.threshold_used == 1e-12 and out.independent

    def test_verdict_is_pure_function_of_record(self):
        rng = np.random.default_rng(17)
        rules = [DecisionRule.epsilon_threshold(0.01), DecisionRule.chi_squared(0.05),
                 DecisionRule.aic(), DecisionRule.bayes_factor()]
        for _ in range(20):
            ds, _ = random_dataset(rng)
            ctx = EmpiricalContext(ds)
            i = int(rng.integers(ds.n_vars))
            old, new = random_nested_pair(rng, ds.n_vars, i)
            for rule in rules:
                out = evaluate_rule(rule, ctx, i, set(new) - set(old), old)
                assert out.independent == decide(rule.kind, out.statistic, out.threshold_used, out.dof)

    def test_rules_flip_once_in_H(self):
        """For fixed N and dof every data-driven rule is a threshold on H."""
        N, dof = 200, 2
        hs = np.linspace(0, 0.2, 2001)
        for kind, thr, scale in [("epsilon-threshold", 0.01, 1.0), ("chi-squared", 0.05, 2 * N),
                                 ("aic", 2.0 * dof, 2 * N)]:
            verdicts = [decide(kind, scale * h, thr, dof) for h in hs]
            flips = sum(a != b for a, b in zip(verdicts, verdicts[1:]))
            assert verdicts[0] and not verdicts[-1] and flips == 1

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            DecisionRule("chi-squared")
        with pytest.raises(ValueError):
            DecisionRule("aic", epsilon=0.1)

    def test_outcome_not_collected(self):
        assert TestOutcome.__test__ is False


def test_chi2_calibration_under_null():
    """X2 independent of X0 given X1 (chain): p-values roughly uniform."""
    rng = np.random.default_rng(18)
    specs = make_specs([2, 2, 2])
    ordering = NodeOrdering.identity(3)
    net = random_bayesnet(rng, specs, validate_dag(specs, ordering, {1: [0], 2: [1]}))
    pvals = []
    for seed in range(500):
        ctx = EmpiricalContext(ancestral_sample(net, 500, 10_000 + seed))
        pvals.append(evaluate_rule(DecisionRule.chi_squared(0.05), ctx, 2, {0}, {1}).p_value)
    pvals = np.array(pvals)
    assert 0.42 <= pvals.mean() <= 0.58
    assert 0.02 <= (pvals < 0.05).mean() <= 0.09
