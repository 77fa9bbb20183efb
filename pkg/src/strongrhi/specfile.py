"""Instance spec files: YAML text to validated grids, measures and weights.

Format (all keys optional unless marked)::

    version: 1
    domain: [[0, 1]]              # one [lo, hi] pair per axis
    grid:                         # exactly one of the two
      breakpoints: [[0, 0.5, 1]]
      cells: [4]                  # uniform cells per axis over the domain
    measure:                      # omitted: lebesgue
      masses: [...]               # nested lists matching the grid, or
      generator: random-density
      params: {B: 2}
      seed: 0
    weight:                       # required; same two shapes, key 'values'
      values: [1, 1, 1, 2]
    tasks:
      - {kind: constants, constant: ap, p: 2, tol: 1.0e-6}

Errors carry the line and column of the offending node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import InputError
from .generators import MEASURE_KINDS, WEIGHT_KINDS, make_measure, make_weight
from .measure import DEFAULT_MAX_CELLS, AxisGrid, GridMeasure, Weight

SCHEMA_VERSION = 1
TOP_KEYS = ("version", "domain", "grid", "measure", "weight", "tasks")
GRID_KEYS = ("breakpoints", "cells")
MEASURE_KEYS = ("masses", "generator", "params", "seed")
WEIGHT_KEYS = ("values", "generator", "params", "seed")
TASK_KEYS = {
    "constants": ("kind", "constant", "p", "tol", "budget"),
    "maximal": ("kind", "depth", "mode", "operator"),
    "rising-sun": ("kind", "lam", "rect"),
    "verify": ("kind", "theorems", "p", "slack"),
}


class SpecError(InputError):
    """Spec validation failure with a source position."""

    def __init__(self, message, mark=None):
        if mark is not None:
            message = f"line {mark.line + 1}, column {mark.column + 1}: {message}"
        super().__init__(message)
        self.mark = mark


@dataclass
class InstanceSpec:
    version: int
    domain: list
    breakpoints: list | None
    cells: list | None
    measure: dict
    weight: dict
    tasks: list = field(default_factory=list)

    def build_grid(self, max_cells=DEFAULT_MAX_CELLS):
        if self.breakpoints is not None:
            return AxisGrid(tuple(np.asarray(b, dtype=float) for b in self.breakpoints), max_cells=max_cells)
        return AxisGrid.uniform(self.domain, self.cells, max_cells=max_cells)

    def build(self, max_cells=DEFAULT_MAX_CELLS):
        """Return ``(grid, mu, w)``."""
        grid = self.build_grid(max_cells)
        mu = _build_measure(self.measure, grid)
        w = _build_weight(self.weight, grid)
        return grid, mu, w

    def to_dict(self):
        out = {"version": self.version, "domain": self.domain, "measure": self.measure, "weight": self.weight}
        out["grid"] = {"breakpoints": self.breakpoints} if self.breakpoints is not None else {"cells": self.cells}
        if self.tasks:
            out["tasks"] = self.tasks
        return out

    def __eq__(self, other):
        return isinstance(other, InstanceSpec) and self.to_dict() == other.to_dict()


def _build_measure(block, grid):
    if "masses" in block:
        return GridMeasure(grid, np.asarray(block["masses"], dtype=float))
    return make_measure(block["generator"], grid, block.get("params"), seed=block.get("seed", 0))


def _build_weight(block, grid):
    if "values" in block:
        return Weight(grid, np.asarray(block["values"], dtype=float))
    return make_weight(block["generator"], grid, block.get("params"), seed=block.get("seed", 0))


# ---------------------------------------------------------------------------
# node helpers


def _py(node):
    """Plain Python value of a composed YAML node."""
    return yaml.SafeLoader(" ").construct_document(node) if node is not None else None


def _mapping(node, keys, where):
    if not isinstance(node, yaml.MappingNode):
        raise SpecError(f"{where} must be a mapping", node.start_mark)
    out = {}
    for k, v in node.value:
        key = _py(k)
        if key not in keys:
            raise SpecError(f"unknown key {key!r} in {where}", k.start_mark)
        if key in out:
            raise SpecError(f"duplicate key {key!r} in {where}", k.start_mark)
        out[key] = v
    return out


def _number_list(node, where):
    if not isinstance(node, yaml.SequenceNode):
        raise SpecError(f"{where} must be a list", node.start_mark)
    out = []
    for item in node.value:
        val = _py(item)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise SpecError(f"{where} entries must be numbers", item.start_mark)
        out.append(float(val))
    return out


def _nested(node, where):
    """Nested number lists with their leaf marks, flattened in row-major order."""
    if isinstance(node, yaml.SequenceNode):
        parts = [_nested(v, where) for v in node.value]
        return [p[0] for p in parts], [m for p in parts for m in p[1]]
    val = _py(node)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SpecError(f"{where} entries must be numbers", node.start_mark)
    return float(val), [(float(val), node.start_mark)]


def _scalar(node, kind, where):
    val = _py(node)
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise SpecError(f"{where} must be a number", node.start_mark)
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise SpecError(f"{where} must be an integer", node.start_mark)
        return val
    if not isinstance(val, str):
        raise SpecError(f"{where} must be a string", node.start_mark)
    return val


def _check_breakpoints(node, axis):
    if not isinstance(node, yaml.SequenceNode):
        raise SpecError(f"breakpoints for axis {axis} must be a list", node.start_mark)
    vals = _number_list(node, f"breakpoints axis {axis}")
    if len(vals) < 2:
        raise SpecError(f"axis {axis} needs at least two breakpoints", node.start_mark)
    for i in range(1, len(vals)):
        if not vals[i] > vals[i - 1]:
            raise SpecError(f"breakpoints not strictly increasing at index {i} (axis {axis})", node.value[i].start_mark)
    return vals


def _value_block(node, keys, data_key, kinds, where, positive):
    m = _mapping(node, keys, where)
    if data_key in m and "generator" in m:
        raise SpecError(f"{where}: give either {data_key!r} or 'generator'", node.start_mark)
    if data_key in m:
        for extra in ("params", "seed"):
            if extra in m:
                raise SpecError(f"{where}: {extra!r} only applies to generators", m[extra].start_mark)
        vals, leaves = _nested(m[data_key], f"{where} {data_key}")
        for v, mark in leaves:
            if positive and not v > 0:
                raise SpecError(f"nonpositive weight value {v}", mark)
            if not positive and v < 0:
                raise SpecError(f"negative mass {v}", mark)
            if not np.isfinite(v):
                raise SpecError(f"non-finite value in {where}", mark)
        return {data_key: vals}
    if "generator" not in m:
        raise SpecError(f"{where} needs {data_key!r} or 'generator'", node.start_mark)
    gen = _scalar(m["generator"], str, f"{where} generator")
    if gen not in kinds:
        raise SpecError(f"unknown {where} generator {gen!r}; expected one of {kinds}", m["generator"].start_mark)
    out = {"generator": gen, "params": {}, "seed": 0}
    if "params" in m:
        params = _py(m["params"])
        if not isinstance(params, dict):
            raise SpecError(f"{where} params must be a mapping", m["params"].start_mark)
        out["params"] = params
    if "seed" in m:
        out["seed"] = _scalar(m["seed"], int, f"{where} seed")
    return out


def _tasks(node):
    if not isinstance(node, yaml.SequenceNode):
        raise SpecError("tasks must be a list", node.start_mark)
    out = []
    for item in node.value:
        if not isinstance(item, yaml.MappingNode):
            raise SpecError("each task must be a mapping", item.start_mark)
        kind_node = next((v for k, v in item.value if _py(k) == "kind"), None)
        if kind_node is None:
            raise SpecError("task needs a 'kind'", item.start_mark)
        kind = _scalar(kind_node, str, "task kind")
        if kind not in TASK_KEYS:
            raise SpecError(f"unknown task kind {kind!r}; expected one of {tuple(TASK_KEYS)}", kind_node.start_mark)
        m = _mapping(item, TASK_KEYS[kind], f"{kind} task")
        task = {}
        for key, val in m.items():
            if key in ("p", "tol", "lam", "slack"):
                task[key] = _scalar(val, float, key)
            elif key in ("depth", "budget"):
                task[key] = _scalar(val, int, key)
            elif key == "theorems":
                task[key] = [str(x) for x in _py(val)]
            elif key == "rect":
                task[key] = [[float(a) for a in pair] for pair in _py(val)]
            else:
                task[key] = _scalar(val, str, key)
        out.append(task)
    return out


def parse_spec(text) -> InstanceSpec:
    """Parse and validate spec text; raises :class:`SpecError` with a position."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        raise SpecError(f"malformed YAML: {exc.problem}", exc.problem_mark) from exc
    if root is None:
        raise SpecError("empty spec")
    top = _mapping(root, TOP_KEYS, "spec")
    version = _scalar(top["version"], int, "version") if "version" in top else SCHEMA_VERSION
    if version != SCHEMA_VERSION:
        raise SpecError(f"unsupported schema version {version}", top["version"].start_mark)
    if "grid" not in top:
        raise SpecError("spec needs a 'grid' block", root.start_mark)
    grid = _mapping(top["grid"], GRID_KEYS, "grid")
    if ("breakpoints" in grid) == ("cells" in grid):
        raise SpecError("grid needs exactly one of 'breakpoints' or 'cells'", top["grid"].start_mark)
    breakpoints = cells = None
    if "breakpoints" in grid:
        bnode = grid["breakpoints"]
        if not isinstance(bnode, yaml.SequenceNode) or not bnode.value:
            raise SpecError("breakpoints must be a list of per-axis lists", bnode.start_mark)
        breakpoints = [_check_breakpoints(b, i) for i, b in enumerate(bnode.value)]
        implied = [[b[0], b[-1]] for b in breakpoints]
    if "domain" in top:
        dnode = top["domain"]
        if not isinstance(dnode, yaml.SequenceNode) or not dnode.value:
            raise SpecError("domain must be a list of [lo, hi] pairs", dnode.start_mark)
        domain = []
        for i, pair in enumerate(dnode.value):
            lohi = _number_list(pair, f"domain axis {i}")
            if len(lohi) != 2 or not lohi[1] > lohi[0]:
                raise SpecError(f"domain axis {i} must be [lo, hi] with lo < hi", pair.start_mark)
            domain.append(lohi)
        if breakpoints is not None and domain != implied:
            raise SpecError("domain disagrees with the breakpoints", dnode.start_mark)
    elif breakpoints is not None:
        domain = implied
    else:
        domain = None
    if "cells" in grid:
        cnode = grid["cells"]
        if not isinstance(cnode, yaml.SequenceNode):
            raise SpecError("cells must be a list of per-axis counts", cnode.start_mark)
        cells = [_scalar(c, int, "cells") for c in cnode.value]
        for c, cn in zip(cells, cnode.value):
            if c < 1:
                raise SpecError("cell counts must be >= 1", cn.start_mark)
        if domain is None:
            domain = [[0.0, 1.0] for _ in cells]
        if len(domain) != len(cells):
            raise SpecError("domain and cells have different dimensions", cnode.start_mark)
    dim = len(domain)
    if "measure" in top:
        measure = _value_block(top["measure"], MEASURE_KEYS, "masses", MEASURE_KINDS, "measure", positive=False)
    else:
        measure = {"generator": "lebesgue", "params": {}, "seed": 0}
    if "weight" not in top:
        raise SpecError("spec needs a 'weight' block", root.start_mark)
    weight = _value_block(top["weight"], WEIGHT_KEYS, "values", WEIGHT_KINDS, "weight", positive=True)
    tasks = _tasks(top["tasks"]) if "tasks" in top else []
    spec = InstanceSpec(version, domain, breakpoints, cells, measure, weight, tasks)
    shape = tuple(len(b) - 1 for b in breakpoints) if breakpoints is not None else tuple(cells)
    for key, block, node in (("masses", measure, top.get("measure")), ("values", weight, top.get("weight"))):
        if key in block and np.shape(block[key]) != shape:
            raise SpecError(f"{key} shape {np.shape(block[key])} does not match grid {shape}", node.start_mark)
    if dim != len(shape):
        raise SpecError("grid dimension mismatch", root.start_mark)
    return spec


def serialize_spec(spec: InstanceSpec) -> str:
    """YAML text that parses back to an identical spec (17-digit floats)."""

    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (float, np.floating)):
            return float(format(float(x), ".17g"))
        if isinstance(x, np.integer):
            return int(x)
        return x

    return yaml.safe_dump(clean(spec.to_dict()), sort_keys=True, default_flow_style=None)


def spec_from_arrays(grid: AxisGrid, mu: GridMeasure, w: Weight, tasks=None) -> InstanceSpec:
    """Explicit spec for in-memory objects."""
    bps = [[float(x) for x in b] for b in grid.breakpoints]
    return InstanceSpec(
        SCHEMA_VERSION,
        [[b[0], b[-1]] for b in bps],
        bps,
        None,
        {"masses": mu.masses.tolist()},
        {"values": w.values.tolist()},
        list(tasks or []),
    )
