"""CSV datasets and JSON model / distribution / trace documents."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np

from .core import BayesNet, Cpt, Dataset, NodeOrdering, VariableSpec, validate_dag
from .errors import (CardinalityOne, EmptyDataset, MissingCell, RaggedRow,
                     SchemaError)
from .exact import JointTable
from .search import SearchTrace

FORMAT_VERSION = 1
PADDING_STATE = "<unobserved>"
_INT = re.compile(r"^[0-9]+$")

PathOrStream = Union[str, Path, IO[str]]


def _open_text(src: PathOrStream):
    if hasattr(src, "read"):
        return src, False
    return open(src, newline="", encoding="utf-8"), True


def parse_dataset_csv(src: PathOrStream, specs: Sequence[VariableSpec] | None = None,
                      allow_constant: bool = False) -> Dataset:
    """Read a complete categorical dataset.

    Without ``specs``: all-digit columns are state indices (cardinality =
    max + 1); other columns map their distinct strings to indices in
    ascending lexicographic order. The mapping ends up in each spec's
    ``states``. With ``specs`` (e.g. from a model file) columns are matched
    by name and values looked up in the spec's state labels.
    """
    fh, close = _open_text(src)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset("no header row") from None
        raw = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedRow(lineno, len(header), len(row))
            row = [c.strip() for c in row]
            for name, cell in zip(header, row):
                if cell == "":
                    raise MissingCell(lineno, name)
            raw.append(row)
    finally:
        if close:
            fh.close()
    if not raw:
        raise EmptyDataset("dataset has a header but no rows")
    columns = list(zip(*raw))

    if specs is not None:
        by_name = {s.name: k for k, s in enumerate(specs)}
        missing = set(by_name) - set(header)
        if missing:
            raise SchemaError("header", f"missing columns {sorted(missing)}")
        rows = np.zeros((len(raw), len(specs)), dtype=np.int64)
        for col_name, col in zip(header, columns):
            if col_name not in by_name:
                continue
            v = by_name[col_name]
            lookup = {lab: k for k, lab in enumerate(specs[v].states)}
            try:
                rows[:, v] = [lookup[c] for c in col]
            except KeyError as e:
                raise SchemaError(f"column {col_name!r}", f"unknown state {e.args[0]!r}") from None
        return Dataset(tuple(specs), rows)

    out_specs, out_cols = [], []
    for name, col in zip(header, columns):
        if all(_INT.match(c) for c in col):
            idx = np.array([int(c) for c in col], dtype=np.int64)
            card = int(idx.max()) + 1
            states = [str(k) for k in range(card)]
        else:
            states = sorted(set(col))
            lookup = {lab: k for k, lab in enumerate(states)}
            idx = np.array([lookup[c] for c in col], dtype=np.int64)
            card = len(states)
        if card < 2:
            if not allow_constant:
                raise CardinalityOne(name)
            states = states + [PADDING_STATE]
            card = 2
        out_specs.append(VariableSpec(name, card, tuple(states)))
        out_cols.append(idx)
    if len({s.name for s in out_specs}) != len(out_specs):
        raise SchemaError("header", "duplicate column names")
    return Dataset(tuple(out_specs), np.column_stack(out_cols))


def write_dataset_csv(ds: Dataset, dst: PathOrStream) -> None:
    fh, close = (dst, False) if hasattr(dst, "write") else (open(dst, "w", newline="", encoding="utf-8"), True)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([s.name for s in ds.specs])
        labels = [s.states for s in ds.specs]
        for row in ds.rows:
            w.writerow([labels[v][x] for v, x in enumerate(row)])
    finally:
        if close:
            fh.close()


# -- JSON emission with fixed 17-significant-digit floats ------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _emit(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_emit(v) for v in obj) + "]"
        items = [pad + _emit(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _emit(obj) + "\n"


def _write_text(text: str, dst: PathOrStream):
    if hasattr(dst, "write"):
        dst.write(text)
    else:
        Path(dst).write_text(text, encoding="utf-8")


def _read_json(src: PathOrStream):
    fh, close = _open_text(src)
    try:
        return json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"invalid JSON: {e}") from None
    finally:
        if close:
            fh.close()


def _variables_doc(specs):
    return [{"name": s.name, "cardinality": s.cardinality, "states": list(s.states)} for s in specs]


def _require(doc, key, path, kind):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(path, f"missing field {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or (kind is int and isinstance(val, bool)):
        raise SchemaError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


def _check_version(doc):
    v = _require(doc, "format_version", "$", int)
    if v != FORMAT_VERSION:
        raise SchemaError("$.format_version", f"unsupported version {v}")


def _variables_from_doc(doc):
    out = []
    for k, var in enumerate(_require(doc, "variables", "$", list)):
        path = f"$.variables[{k}]"
        name = _require(var, "name", path, str)
        card = _require(var, "cardinality", path, int)
        states = var.get("states") or [str(j) for j in range(card)]
        if not isinstance(states, list) or len(states) != card:
            raise SchemaError(f"{path}.states", "length must equal cardinality")
        try:
            out.append(VariableSpec(name, card, tuple(str(s) for s in states)))
        except ValueError as e:
            raise SchemaError(path, str(e)) from None
    return tuple(out)


def model_to_dict(net: BayesNet) -> dict:
    cpts = []
    for cpt in net.cpts:
        cpts.append({
            "child": cpt.child,
            "parents": list(cpt.parents),
            "rows": [list(map(float, row)) for row in cpt.filled_rows()],
            "defined": [bool(d) for d in cpt.defined],
        })
    return {
        "format_version": FORMAT_VERSION,
        "variables": _variables_doc(net.specs),
        "ordering": list(net.ordering.order),
        "parents": [list(net.dag.parent_tuple(v)) for v in range(len(net.specs))],
        "cpts": cpts,
    }


def model_from_dict(doc) -> BayesNet:
    _check_version(doc)
    specs = _variables_from_doc(doc)
    n = len(specs)
    try:
        ordering = NodeOrdering(tuple(_require(doc, "ordering", "$", list)))
    except ValueError as e:
        raise SchemaError("$.ordering", str(e)) from None
    if len(ordering) != n:
        raise SchemaError("$.ordering", "length must equal number of variables")
    parents = _require(doc, "parents", "$", list)
    try:
        dag = validate_dag(specs, ordering, parents)
    except Exception as e:
        raise SchemaError("$.parents", str(e)) from None
    cpt_docs = _require(doc, "cpts", "$", list)
    if len(cpt_docs) != n:
        raise SchemaError("$.cpts", f"expected {n} tables")
    cpts = []
    for v, cd in enumerate(cpt_docs):
        path = f"$.cpts[{v}]"
        if _require(cd, "child", path, int) != v:
            raise SchemaError(f"{path}.child", f"expected {v}")
        pa = tuple(_require(cd, "parents", path, list))
        if set(pa) != dag.parents[v]:
            raise SchemaError(f"{path}.parents", "does not match the parents field")
        try:
            rows = np.array(_require(cd, "rows", path, list), dtype=float)
        except (TypeError, ValueError):
            raise SchemaError(f"{path}.rows", "rows must be numeric") from None
        q = int(np.prod([specs[p].cardinality for p in pa])) if pa else 1
        if rows.shape != (q, specs[v].cardinality):
            raise SchemaError(f"{path}.rows", f"expected shape {(q, specs[v].cardinality)}, got {rows.shape}")
        defined = np.array(cd.get("defined", [True] * q), dtype=bool)
        if defined.shape != (q,):
            raise SchemaError(f"{path}.defined", "length must equal the row count")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise SchemaError(f"{path}.rows", "entries must be finite and nonnegative")
        sums = rows.sum(axis=1)
        for j, s in enumerate(sums):
            if abs(s - 1.0) > 1e-9:
                raise SchemaError(f"{path}.rows[{j}]", f"sums to {s!r}, outside 1e-9 of 1")
        off = np.abs(sums - 1.0) > 1e-12
        rows[off] /= sums[off, None]
        cpts.append(Cpt(v, pa, rows, defined))
    return BayesNet(specs, ordering, dag, tuple(cpts))


def write_model(net: BayesNet, dst: PathOrStream) -> None:
    _write_text(dumps(model_to_dict(net)), dst)


def read_model(src: PathOrStream) -> BayesNet:
    return model_from_dict(_read_json(src))


def distribution_to_dict(P: JointTable) -> dict:
    return {"format_version": FORMAT_VERSION, "variables": _variables_doc(P.specs),
            "probs": [float(x) for x in P.flat()]}


def distribution_from_dict(doc) -> JointTable:
    _check_version(doc)
    specs = _variables_from_doc(doc)
    probs = np.array(_require(doc, "probs", "$", list), dtype=float)
    size = int(np.prod([s.cardinality for s in specs]))
    if probs.shape != (size,):
        raise SchemaError("$.probs", f"expected {size} entries, got {probs.size}")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise SchemaError("$.probs", "must be nonnegative and sum to 1 within 1e-9")
    return JointTable(specs, probs / probs.sum())


def write_distribution(P: JointTable, dst: PathOrStream) -> None:
    _write_text(dumps(distribution_to_dict(P)), dst)


def read_distribution(src: PathOrStream) -> JointTable:
    return distribution_from_dict(_read_json(src))


def trace_to_dict(trace: SearchTrace, specs=None) -> dict:
    nodes = []
    for v in sorted(trace.steps):
        nodes.append({
            "node": v,
            "name": specs[v].name if specs else str(v),
            "steps": [{
                "phase": s.phase, "candidate": list(s.candidate), "statistic": s.statistic,
                "independent": s.verdict, "parents_after": list(s.parents_after),
                "selected": list(s.selected) if s.selected is not None else None,
                "selected_statistic": s.selected_statistic,
            } for s in trace.steps[v]],
        })
    return {"format_version": FORMAT_VERSION, "rule": trace.rule.kind,
            "evaluator": trace.evaluator_kind, "nodes": nodes}


def write_trace(trace: SearchTrace, dst: PathOrStream, specs=None) -> None:
    _write_text(dumps(trace_to_dict(trace, specs)), dst)
