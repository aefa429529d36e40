"""Exact computations on dense joint distributions.

Natural logarithms throughout. Cells with zero probability contribute
nothing to any entropy sum (0 log 0 = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import (MAX_CELLS, BayesNet, Cpt, Dataset, OrderedDag,
                   VariableSpec, cardinalities)
from .errors import (InternalConsistencyError, NotNested, ScopeOverlap,
                     StateSpaceTooLarge, SupportMismatch, UndefinedCptRow)

#: Negative round-off tolerated (and clamped to zero) in entropy sums.
CLAMP_TOL = 1e-12


def clamp_nonnegative(value: float, what: str = "entropy") -> float:
    if value < 0.0:
        if value < -CLAMP_TOL:
            raise InternalConsistencyError(f"{what} came out negative: {value!r}")
        return 0.0
    return float(value)


def check_cells(cards: Sequence[int]) -> int:
    cells = math.prod(cards)
    if cells > MAX_CELLS:
        raise StateSpaceTooLarge(f"{cells} cells exceeds the guard of {MAX_CELLS}")
    return cells


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense distribution over all variables; axis ``v`` is variable ``v``."""

    specs: tuple[VariableSpec, ...]
    probs: np.ndarray

    def __post_init__(self):
        specs = tuple(self.specs)
        cards = cardinalities(specs)
        check_cells(cards)
        probs = np.array(self.probs, dtype=float).reshape(cards)
        if np.any(probs < 0):
            raise ValueError("joint table has negative entries")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint table sums to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "probs", probs)

    @property
    def n_vars(self) -> int:
        return len(self.specs)

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


def align(arr: np.ndarray, arr_axes: Sequence[int], target_axes: Sequence[int]) -> np.ndarray:
    """Permute/reshape ``arr`` (axes labelled ``arr_axes``) so it broadcasts
    against a table whose axes are ``target_axes``."""
    order = sorted(range(len(arr_axes)), key=lambda k: target_axes.index(arr_axes[k]))
    arr = np.transpose(arr, order)
    present = set(arr_axes)
    shape = []
    it = iter(arr.shape)
    for ax in target_axes:
        shape.append(next(it) if ax in present else 1)
    return arr.reshape(shape)


def sum_to(table: np.ndarray, axes: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Marginalize a table with axis labels ``axes`` onto ``keep`` (in that order)."""
    drop = tuple(k for k, ax in enumerate(axes) if ax not in keep)
    out = table.sum(axis=drop) if drop else table
    remaining = [ax for ax in axes if ax in keep]
    return np.transpose(out, [remaining.index(ax) for ax in keep]) if keep else np.asarray(out)


def marginalize(P: JointTable, scope: Iterable[int]) -> np.ndarray:
    """Marginal of ``P`` on ``scope``; axes follow ``scope`` order."""
    scope = tuple(scope)
    return sum_to(P.probs, tuple(range(P.n_vars)), scope)


def joint_from_bayesnet(net: BayesNet) -> JointTable:
    check_cells(cardinalities(net.specs))
    table = np.ones(())
    done: list[int] = []
    for v in net.ordering:
        cpt = net.cpts[v]
        pa = list(cpt.parents)
        if not cpt.defined.all():
            reach = sum_to(table, done, pa).reshape(-1)
            bad = np.flatnonzero(~cpt.defined & (reach > 0))
            if bad.size:
                raise UndefinedCptRow(f"variable {v}: undefined CPT row {int(bad[0])} is reachable")
        pa_cards = cardinalities(net.specs, pa)
        factor = cpt.filled_rows().reshape(pa_cards + (net.specs[v].cardinality,))
        target = done + [v]
        table = table[..., None] * align(factor, pa + [v], target)
        done = target
    probs = np.transpose(table, [done.index(v) for v in range(len(done))])
    return JointTable(net.specs, probs / probs.sum())


def project_to_dag(P: JointTable, dag: OrderedDag) -> BayesNet:
    """Markov distribution on ``dag`` closest to ``P`` in KL: copy P's conditionals."""
    cpts = []
    for v in range(P.n_vars):
        pa = dag.parent_tuple(v)
        r = P.specs[v].cardinality
        m = marginalize(P, pa + (v,)).reshape(-1, r)
        tot = m.sum(axis=1)
        defined = tot > 0
        rows = np.full(m.shape, 1.0 / r)
        rows[defined] = m[defined] / tot[defined, None]
        cpts.append(Cpt(v, pa, rows, defined))
    return BayesNet(P.specs, dag.ordering, dag, tuple(cpts))


def kl_divergence(P: JointTable, Q: JointTable, strict: bool = False) -> float:
    """K(P, Q) in nats. Returns ``inf`` when Q misses P's support, or raises
    :class:`SupportMismatch` if ``strict``."""
    p = P.flat()
    q = Q.flat()
    if p.shape != q.shape:
        raise ValueError("distributions over different state spaces")
    pos = p > 0
    if np.any(q[pos] <= 0):
        if strict:
            raise SupportMismatch("Q(x) = 0 where P(x) > 0")
        return math.inf
    terms = p[pos] * np.log(p[pos] / q[pos])
    return clamp_nonnegative(terms.sum(), "KL divergence")


def _check_disjoint(*sets):
    seen: set[int] = set()
    for s in sets:
        if seen & s:
            raise ScopeOverlap(f"scopes overlap on {sorted(seen & s)}")
        seen |= s


def cross_entropy_from_table(table: np.ndarray, axes: Sequence[int], A, B, C) -> float:
    """Conditional cross entropy of A and B given C in expectation form,
    from a probability table whose axes are labelled ``axes``.

    ``table`` may be a marginal; it need not cover variables outside A, B, C.
    """
    A, B, C = set(A), set(B), set(C)
    if not A or not B:
        return 0.0
    scope = tuple(sorted(A | B | C))
    pabc = sum_to(table, axes, scope)
    idx = {ax: k for k, ax in enumerate(scope)}

    def keep(vars_):
        drop = tuple(idx[ax] for ax in scope if ax not in vars_)
        return pabc.sum(axis=drop, keepdims=True) if drop else pabc

    pac = keep(A | C)
    pbc = keep(B | C)
    pc = keep(C)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (pabc * pc) / (pac * pbc)
        terms = np.where(pabc > 0, pabc * np.log(np.where(pabc > 0, ratio, 1.0)), 0.0)
    return clamp_nonnegative(float(terms.sum()), "conditional cross entropy")


def conditional_cross_entropy(P: JointTable, A, B, C=()) -> float:
    """H_P(X_A, X_B | X_C) in nats; with C empty this is the mutual information."""
    A, B, C = set(A), set(B), set(C)
    _check_disjoint(A, B, C)
    return cross_entropy_from_table(P.probs, tuple(range(P.n_vars)), A, B, C)


def kl_decomposed(P: JointTable, dag: OrderedDag) -> tuple[float, list[float]]:
    """Per-node terms of K(P, P_g): node i contributes H_P(X_i, R_i | X_pa(i))."""
    per_node = []
    for v in range(P.n_vars):
        pa = dag.parents[v]
        rest = set(dag.ordering.predecessors(v)) - pa
        per_node.append(conditional_cross_entropy(P, {v}, rest, pa))
    return float(sum(per_node)), per_node


def delta_kl(P: JointTable, i: int, pa_old, pa_new) -> float:
    """KL reduction from enlarging i's parents from ``pa_old`` to ``pa_new``."""
    pa_old, pa_new = set(pa_old), set(pa_new)
    if not pa_old <= pa_new:
        raise NotNested(f"{sorted(pa_old)} is not contained in {sorted(pa_new)}")
    return conditional_cross_entropy(P, {i}, pa_new - pa_old, pa_old)


def ancestral_sample(net: BayesNet, n_rows: int, seed: int) -> Dataset:
    """Draw ``n_rows`` i.i.d. complete records, nodes in ordering order."""
    rng = np.random.default_rng(seed)
    n = len(net.specs)
    rows = np.zeros((n_rows, n), dtype=np.int64)
    for v in net.ordering:
        cpt = net.cpts[v]
        pa = list(cpt.parents)
        if pa:
            cfg = np.ravel_multi_index(tuple(rows[:, p] for p in pa), cardinalities(net.specs, pa))
        else:
            cfg = np.zeros(n_rows, dtype=np.int64)
        if n_rows and not cpt.defined[cfg].all():
            raise UndefinedCptRow(f"variable {v}: sampled an undefined CPT row")
        cum = np.cumsum(cpt.filled_rows(), axis=1)[cfg]
        u = rng.random(n_rows)
        rows[:, v] = np.minimum((u[:, None] >= cum).sum(axis=1), net.specs[v].cardinality - 1)
    return Dataset(net.specs, rows)
