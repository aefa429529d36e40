"""Domain types: variables, orderings, order-constrained DAGs, CPTs, data.

All dense tables use row-major layout with the last scope variable varying
fastest (numpy C order with axes in scope order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import OrderViolation, OutOfRange, UnknownVariable

#: Guard on the number of cells of any dense table over the full state space.
MAX_CELLS = 2**22


def _frozen(a, dtype=None):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VariableSpec:
    name: str
    cardinality: int
    states: tuple[str, ...] = ()

    def __post_init__(self):
        if self.cardinality < 2:
            raise ValueError(f"variable {self.name!r}: cardinality must be >= 2")
        if not self.states:
            object.__setattr__(self, "states", tuple(str(k) for k in range(self.cardinality)))
        elif len(self.states) != self.cardinality:
            raise ValueError(f"variable {self.name!r}: {len(self.states)} labels for "
                             f"cardinality {self.cardinality}")


def make_specs(cardinalities: Sequence[int], names: Sequence[str] | None = None) -> tuple[VariableSpec, ...]:
    """Build specs named ``X0, X1, ...`` unless names are given."""
    if names is None:
        names = [f"X{v}" for v in range(len(cardinalities))]
    specs = tuple(VariableSpec(str(nm), int(k)) for nm, k in zip(names, cardinalities))
    if len({s.name for s in specs}) != len(specs):
        raise ValueError("variable names must be unique")
    return specs


def cardinalities(specs: Sequence[VariableSpec], scope: Iterable[int] | None = None) -> tuple[int, ...]:
    if scope is None:
        return tuple(s.cardinality for s in specs)
    return tuple(specs[v].cardinality for v in scope)


@dataclass(frozen=True)
class NodeOrdering:
    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(v) for v in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"ordering {order} is not a permutation of 0..{len(order) - 1}")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_pos", {v: k for k, v in enumerate(order)})

    @classmethod
    def identity(cls, n: int) -> "NodeOrdering":
        return cls(tuple(range(n)))

    def __len__(self):
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def position(self, v: int) -> int:
        return self._pos[v]

    def predecessors(self, v: int) -> tuple[int, ...]:
        """Variables strictly before ``v``, in ascending index order."""
        return tuple(sorted(self.order[: self._pos[v]]))

    def sort(self, vars: Iterable[int]) -> tuple[int, ...]:
        """Sort variables by their position in the ordering."""
        return tuple(sorted(vars, key=self._pos.__getitem__))


@dataclass(frozen=True)
class OrderedDag:
    ordering: NodeOrdering
    parents: tuple[frozenset[int], ...]

    @property
    def n(self) -> int:
        return len(self.parents)

    def parent_tuple(self, v: int) -> tuple[int, ...]:
        """Parents of ``v`` in CPT layout order (later-ordered parent fastest)."""
        return self.ordering.sort(self.parents[v])

    def num_edges(self) -> int:
        return sum(len(p) for p in self.parents)

    def with_parents(self, v: int, pa: Iterable[int]) -> "OrderedDag":
        parents = list(self.parents)
        parents[v] = frozenset(pa)
        return validate_dag(None, self.ordering, parents)

    @classmethod
    def empty(cls, ordering: NodeOrdering) -> "OrderedDag":
        return cls(ordering, tuple(frozenset() for _ in range(len(ordering))))

    @classmethod
    def complete(cls, ordering: NodeOrdering) -> "OrderedDag":
        return cls(ordering, tuple(frozenset(ordering.predecessors(v)) for v in range(len(ordering))))


def validate_dag(specs, ordering: NodeOrdering, parents) -> OrderedDag:
    """Check that every parent precedes its child and build the dag.

    ``parents`` is either a sequence of per-variable parent collections or a
    mapping ``child -> parents`` (missing children get no parents).
    ``specs`` is only used for a length check and may be None.
    """
    n = len(ordering)
    if specs is not None and len(specs) != n:
        raise ValueError(f"{len(specs)} variables but ordering of length {n}")
    if isinstance(parents, Mapping):
        items = parents.items()
    else:
        if len(parents) != n:
            raise ValueError(f"expected {n} parent sets, got {len(parents)}")
        items = enumerate(parents)
    out: list[frozenset[int]] = [frozenset()] * n
    for child, pa in items:
        if not 0 <= child < n:
            raise UnknownVariable(f"variable index {child} out of range 0..{n - 1}")
        pa = list(pa)
        if len(set(pa)) != len(pa):
            raise ValueError(f"duplicate parents for {child}: {pa}")
        for p in pa:
            if not 0 <= p < n:
                raise UnknownVariable(f"variable index {p} out of range 0..{n - 1}")
            if ordering.position(p) >= ordering.position(child):
                raise OrderViolation(child, p)
        out[child] = frozenset(pa)
    return OrderedDag(ordering, tuple(out))


def num_free_parameters(specs: Sequence[VariableSpec], dag: OrderedDag) -> int:
    """Free parameters of the multinomial model, from full cardinalities."""
    total = 0
    for v, pa in enumerate(dag.parents):
        total += (specs[v].cardinality - 1) * prod(specs[p].cardinality for p in pa)
    return total


def family_config_index(specs, scope: Sequence[int], assignment: Sequence[int]) -> int:
    """Row-major index of ``assignment`` over ``scope`` (last variable fastest)."""
    if len(scope) != len(assignment):
        raise OutOfRange(f"assignment length {len(assignment)} != scope length {len(scope)}")
    idx = 0
    for v, x in zip(scope, assignment):
        k = specs[v].cardinality
        if not 0 <= x < k:
            raise OutOfRange(f"state {x} out of range for variable {v} (cardinality {k})")
        idx = idx * k + int(x)
    return idx


def config_from_index(specs, scope: Sequence[int], index: int) -> tuple[int, ...]:
    """Inverse of :func:`family_config_index`."""
    size = prod(specs[v].cardinality for v in scope)
    if not 0 <= index < size:
        raise OutOfRange(f"index {index} out of range 0..{size - 1}")
    out = []
    for v in reversed(scope):
        k = specs[v].cardinality
        index, x = divmod(index, k)
        out.append(x)
    return tuple(reversed(out))


@dataclass(frozen=True, eq=False)
class Cpt:
    """Conditional table of ``child`` given ``parents``.

    ``rows`` has shape (parent configurations, child states); parent
    configurations follow ``parents`` order with the last one fastest.
    Rows with ``defined[j] == False`` had no supporting data.
    """

    child: int
    parents: tuple[int, ...]
    rows: np.ndarray
    defined: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError("CPT rows must be two-dimensional")
        defined = np.ones(rows.shape[0], dtype=bool) if self.defined is None else np.asarray(self.defined, dtype=bool)
        if defined.shape != (rows.shape[0],):
            raise ValueError("defined mask does not match row count")
        d = rows[defined]
        if np.any(d < 0) or np.any(np.abs(d.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError(f"CPT for {self.child}: defined rows must be probability vectors")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "defined", _frozen(defined))
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))

    def filled_rows(self) -> np.ndarray:
        """Rows with undefined entries replaced by the uniform distribution."""
        rows = np.array(self.rows)
        rows[~self.defined] = 1.0 / rows.shape[1]
        return rows


@dataclass(frozen=True, eq=False)
class BayesNet:
    specs: tuple[VariableSpec, ...]
    ordering: NodeOrdering
    dag: OrderedDag
    cpts: tuple[Cpt, ...]

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "cpts", tuple(self.cpts))
        for v, cpt in enumerate(self.cpts):
            if cpt.child != v:
                raise ValueError(f"CPT {v} is for child {cpt.child}")
            if set(cpt.parents) != set(self.dag.parents[v]):
                raise ValueError(f"CPT parents {cpt.parents} do not match dag for {v}")
            q = prod(self.specs[p].cardinality for p in cpt.parents)
            if cpt.rows.shape != (q, self.specs[v].cardinality):
                raise ValueError(f"CPT {v} has shape {cpt.rows.shape}, expected {(q, self.specs[v].cardinality)}")

    @classmethod
    def from_tables(cls, specs, ordering: NodeOrdering, parents, tables) -> "BayesNet":
        """Convenience constructor; ``tables[v]`` has one row per parent config of
        ``dag.parent_tuple(v)``."""
        dag = validate_dag(specs, ordering, parents)
        cpts = []
        for v in range(len(specs)):
            rows = np.asarray(tables[v], dtype=float).reshape(-1, specs[v].cardinality)
            cpts.append(Cpt(v, dag.parent_tuple(v), rows, None))
        return cls(tuple(specs), ordering, dag, tuple(cpts))


@dataclass(frozen=True, eq=False)
class Dataset:
    specs: tuple[VariableSpec, ...]
    rows: np.ndarray

    def __post_init__(self):
        specs = tuple(self.specs)
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.size == 0:
            rows = rows.reshape(0, len(specs))
        if rows.ndim != 2 or rows.shape[1] != len(specs):
            raise ValueError(f"rows must have shape (N, {len(specs)})")
        if rows.size:
            if rows.min() < 0 or np.any(rows.max(axis=0) >= np.array(cardinalities(specs))):
                raise OutOfRange("dataset value exceeds its variable's cardinality")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "rows", _frozen(rows))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_vars(self) -> int:
        return len(self.specs)


@dataclass(frozen=True, eq=False)
class CountTable:
    scope: tuple[int, ...]
    counts: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())
