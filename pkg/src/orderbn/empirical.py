"""Finite-data estimators built from marginal counts.

Everything here works from integer count tables. Empirical cross entropies
are evaluated as ratios of counts, never through a materialized p-hat over
the full state space.
"""

from __future__ import annotations

import math
import threading
from math import prod
from typing import Iterable

import numpy as np

from .core import Cpt, CountTable, Dataset, OrderedDag, cardinalities
from .errors import NotNested, ScopeOverlap
from .exact import JointTable, check_cells, clamp_nonnegative, sum_to


class EmpiricalContext:
    """A dataset plus a memo of count tables keyed by sorted scope.

    Safe for concurrent readers: cache access is serialized by a lock.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        self.specs = dataset.specs
        self.N = dataset.n_rows
        self._cache: dict[tuple[int, ...], np.ndarray] = {}
        self._lock = threading.Lock()

    def _sorted_counts(self, key: tuple[int, ...]) -> np.ndarray:
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
            # reuse the smallest cached superset when it is cheaper than a pass over rows
            best = None
            for scope, arr in self._cache.items():
                if set(key) <= set(scope) and (best is None or arr.size < best[1].size):
                    best = (scope, arr)
            if best is not None and best[1].size <= self.N:
                counts = sum_to(best[1], best[0], key)
            else:
                counts = self._tally(key)
            counts = np.array(counts, order="C")
            counts.setflags(write=False)
            self._cache[key] = counts
            return counts

    def _tally(self, key):
        cards = cardinalities(self.specs, key)
        if not key:
            return np.array(self.N, dtype=np.int64)
        rows = self.dataset.rows
        flat = np.ravel_multi_index(tuple(rows[:, v] for v in key), cards) if self.N else np.zeros(0, np.int64)
        return np.bincount(flat, minlength=prod(cards)).reshape(cards).astype(np.int64)

    def counts(self, scope: Iterable[int]) -> np.ndarray:
        """Count array with axes in the given ``scope`` order."""
        scope = tuple(scope)
        key = tuple(sorted(set(scope)))
        if len(key) != len(scope):
            raise ValueError(f"repeated variable in scope {scope}")
        arr = self._sorted_counts(key)
        return np.transpose(arr, [key.index(v) for v in scope]) if scope else arr


def marginal_counts(ctx: EmpiricalContext, scope: Iterable[int]) -> CountTable:
    scope = tuple(scope)
    return CountTable(scope, ctx.counts(scope))


def mle_cpt(ctx: EmpiricalContext, i: int, pa: Iterable[int]) -> Cpt:
    """Maximum likelihood CPT n(x_i, x_pa) / n(x_pa); unseen configs undefined.

    ``pa`` is taken in the given order (later entries vary fastest).
    """
    pa = tuple(pa)
    r = ctx.specs[i].cardinality
    n = ctx.counts(pa + (i,)).reshape(-1, r).astype(float)
    tot = n.sum(axis=1)
    defined = tot > 0
    rows = np.full(n.shape, 1.0 / r)
    rows[defined] = n[defined] / tot[defined, None]
    return Cpt(i, pa, rows, defined)


def posterior_mean_cpt(ctx: EmpiricalContext, i: int, pa: Iterable[int], pseudo: float) -> Cpt:
    """Dirichlet posterior mean (n + a) / (sum n + sum a) with ``pseudo`` per cell."""
    pa = tuple(pa)
    r = ctx.specs[i].cardinality
    n = ctx.counts(pa + (i,)).reshape(-1, r).astype(float) + pseudo
    return Cpt(i, pa, n / n.sum(axis=1, keepdims=True), None)


def empirical_joint(ctx: EmpiricalContext) -> JointTable:
    """Saturated-model MLE n(x) / N."""
    check_cells(cardinalities(ctx.specs))
    counts = ctx.counts(range(len(ctx.specs)))
    return JointTable(ctx.specs, counts / ctx.N)


def empirical_cce(ctx: EmpiricalContext, i: int, S: Iterable[int], C: Iterable[int] = ()) -> float:
    """Empirical conditional cross entropy of X_i and X_S given X_C, in nats:

        (1/N) sum n(i,s,c) log[ n(i,s,c) n(c) / (n(s,c) n(i,c)) ]

    Cells with a zero joint count contribute nothing.
    """
    S, C = tuple(sorted(set(S))), tuple(sorted(set(C)))
    if i in S or i in C or set(S) & set(C):
        raise ScopeOverlap(f"scopes overlap: i={i}, S={S}, C={C}")
    if not S or ctx.N == 0:
        return 0.0
    n_csi = ctx.counts(C + S + (i,)).astype(float)
    n_cs = ctx.counts(C + S).astype(float)[..., None]
    n_ci = ctx.counts(C + (i,)).astype(float)
    n_c = ctx.counts(C).astype(float)
    # broadcast n(c, i) and n(c) over the S axes
    lead = (slice(None),) * len(C)
    n_ci = n_ci[lead + (None,) * len(S)]
    n_c = np.reshape(n_c, n_c.shape + (1,) * (len(S) + 1))
    n_csi, n_cs, n_ci, n_c = np.broadcast_arrays(n_csi, n_cs, n_ci, n_c)
    nz = n_csi > 0
    total = float(np.sum(n_csi[nz] * np.log((n_csi[nz] * n_c[nz]) / (n_cs[nz] * n_ci[nz]))))
    return clamp_nonnegative(total / ctx.N, "empirical cross entropy")


def family_log_likelihood(ctx: EmpiricalContext, i: int, pa: Iterable[int]) -> float:
    """sum n(x_i, x_pa) log(n(x_i, x_pa) / n(x_pa)), zero-count cells skipped.

    Cells are summed with ``math.fsum`` so the value does not depend on the
    layout of the family table."""
    pa = tuple(sorted(set(pa)))
    r = ctx.specs[i].cardinality
    n = ctx.counts(pa + (i,)).reshape(-1, r).astype(float)
    tot = n.sum(axis=1, keepdims=True)
    nz = n > 0
    return math.fsum(n[nz] * np.log((n / np.where(tot > 0, tot, 1.0))[nz]))


def log_likelihood(ctx: EmpiricalContext, dag: OrderedDag) -> float:
    """Maximized log-likelihood of the data under ``dag``; a sum of family terms."""
    return math.fsum(family_log_likelihood(ctx, v, dag.parents[v]) for v in range(len(ctx.specs)))


def _check_nested(pa_old, pa_new):
    pa_old, pa_new = set(pa_old), set(pa_new)
    if not pa_old <= pa_new:
        raise NotNested(f"{sorted(pa_old)} is not contained in {sorted(pa_new)}")
    return pa_old, pa_new


def log_likelihood_ratio(ctx: EmpiricalContext, i: int, pa_old, pa_new) -> float:
    """log L(g') - log L(g) for graphs differing only in i's parents."""
    pa_old, pa_new = _check_nested(pa_old, pa_new)
    if pa_old == pa_new:
        return 0.0
    diff = family_log_likelihood(ctx, i, pa_new) - family_log_likelihood(ctx, i, pa_old)
    # round-off in the two family sums grows with N
    if diff < 0:
        clamp_nonnegative(diff / max(ctx.N, 1), "log-likelihood ratio")
        return 0.0
    return diff


def dof_delta(specs, i: int, pa_old, pa_new) -> int:
    """Difference in free parameters between the nested families."""
    pa_old, pa_new = _check_nested(pa_old, pa_new)
    r = specs[i].cardinality
    return (r - 1) * (prod(specs[p].cardinality for p in pa_new) - prod(specs[p].cardinality for p in pa_old))
