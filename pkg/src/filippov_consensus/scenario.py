"""Scenario files: schema, loading, overrides and the bundled catalog."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import _jsonpos
from .dynamics import COMMUNICATION, MEASUREMENT, ProtocolSpec
from .graph import GraphError, graph_from_json, load_graph
from .integrator import CARATHEODORY, SLIDING, IntegratorConfig, PrescribedSelection
from .dynamics import Explicit, LeftContinuous, Midpoint, RightContinuous, DynamicsError
from .nonlinear import from_descriptor, parse_number


class ScenarioError(ValueError):
    def __init__(self, msg, line=None, source=None):
        where = f"{source}:{line}: " if line is not None and source else (f"line {line}: " if line else "")
        super().__init__(where + msg)
        self.line = line


NUMBER = {
    "anyOf": [
        {"type": "number"},
        {"type": "string", "pattern": r"^\s*-?\d+(\.\d+)?(/\d+)?\s*$"},
    ]
}
POS_NUMBER = NUMBER  # positivity is checked by the constructors

FUNCTION = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {
            "enum": [
                "sym_quantizer",
                "asym_quantizer",
                "log_quantizer",
                "sign",
                "step_phi",
                "linear",
                "piecewise_constant",
                "scaled",
                "reflected",
            ]
        },
        "delta": POS_NUMBER,
        "slope": NUMBER,
        "intercept": NUMBER,
        "breakpoints": {"type": "array", "items": NUMBER},
        "values": {"type": "array", "items": NUMBER},
        "side": {"enum": ["left", "right"]},
        "scale": POS_NUMBER,
        "of": {"$ref": "#/$defs/function"},
    },
    "additionalProperties": False,
    "allOf": [
        {
            "if": {"properties": {"kind": {"enum": ["sym_quantizer", "asym_quantizer", "log_quantizer"]}}},
            "then": {"required": ["delta"]},
        },
        {
            "if": {"properties": {"kind": {"const": "piecewise_constant"}}},
            "then": {"required": ["breakpoints", "values"]},
        },
        {"if": {"properties": {"kind": {"const": "scaled"}}}, "then": {"required": ["scale", "of"]}},
        {"if": {"properties": {"kind": {"const": "reflected"}}}, "then": {"required": ["of"]}},
    ],
}

POLICY = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["right", "left", "midpoint", "explicit"]},
        "lam": NUMBER,
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"function": FUNCTION},
    "type": "object",
    "required": ["graph", "protocol", "x0", "integrator"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "graph": {
            "type": "object",
            "oneOf": [{"required": ["n", "edges"]}, {"required": ["file"]}],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "edges": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3}},
                "labels": {"type": "array", "items": {"type": "string"}},
                "file": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "protocol": {
            "type": "object",
            "required": ["family"],
            "properties": {
                "family": {"enum": [MEASUREMENT, COMMUNICATION]},
                "function": {"$ref": "#/$defs/function"},
                "functions": {"type": "array", "items": {"$ref": "#/$defs/function"}},
                "edge_functions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["edge", "function"],
                        "properties": {
                            "edge": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                            "function": {"$ref": "#/$defs/function"},
                        },
                        "additionalProperties": False,
                    },
                },
                "convention": {"enum": ["relative", "neighbor"]},
            },
            "additionalProperties": False,
        },
        "x0": {
            "oneOf": [
                {"type": "array", "items": NUMBER},
                {
                    "type": "object",
                    "required": ["uniform", "seed"],
                    "properties": {
                        "uniform": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                        "seed": {"type": "integer"},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "integrator": {
            "type": "object",
            "required": ["dt_max", "t_end"],
            "properties": {
                "dt_max": {"type": "number", "exclusiveMinimum": 0},
                "t_end": {"type": "number", "minimum": 0},
                "event_tol": {"type": "number", "exclusiveMinimum": 0},
                "sliding_tol": {"type": "number", "exclusiveMinimum": 0},
                "chatter_window": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["sliding", "caratheodory", "prescribed"]},
                "policy": POLICY,
                "dwell": {"type": ["number", "null"], "minimum": 0},
                "max_steps": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "analysis": {
            "type": "object",
            "properties": {
                "sets": {"type": "array", "items": {"enum": ["D1", "D2", "H1", "H2", "H3", "band"]}},
                "lyapunov": {"type": "array", "items": {"enum": ["MaxV", "MinW", "WeightedV1", "Energy"]}},
                "monitor": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}},
            "additionalProperties": False,
        },
    },
}


@dataclass
class Scenario:
    name: str
    description: str
    raw: dict
    protocol: ProtocolSpec
    x0: list
    config: IntegratorConfig
    sets: list
    lyapunov: list
    monitor: str | None
    output_dir: str | None
    source: str | None = None


# -- overrides -----------------------------------------------------------------


def _schema_at(path: list[str]):
    node = SCHEMA
    for key in path:
        if "$ref" in node:
            node = SCHEMA["$defs"]["function"]
        props = node.get("properties")
        if props is None or key not in props:
            return None
        node = props[key]
    return node


def apply_override(data: dict, assignment: str) -> dict:
    """``a.b.c=value``: value parsed as JSON, else taken as a string."""
    if "=" not in assignment:
        raise ScenarioError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    path = [k for k in key.strip().split(".") if k]
    if not path or _schema_at(path) is None:
        raise ScenarioError(f"unknown override key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(data)
    node = out
    for k in path[:-1]:
        if isinstance(node.get(k), list):
            raise ScenarioError(f"override key {key!r} descends into a list")
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"override key {key!r} descends into a scalar")
    node[path[-1]] = value
    return out


# -- loading -------------------------------------------------------------------


def _validate(data, text=None, source=None):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is None:
        return
    line = None
    if text is not None:
        line = _jsonpos.line_of(text, _jsonpos.locate(text), err.absolute_path)
    path = "/".join(str(k) for k in err.absolute_path) or "<root>"
    raise ScenarioError(f"{path}: {err.message}", line, source)


def read_text(path: str | Path) -> tuple[str, str]:
    """Text of a scenario file or bundled scenario name."""
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = str(path)
    res = resources.files("filippov_consensus") / "scenarios" / f"{name}.json"
    if res.is_file():
        return res.read_text(), f"<bundled {name}>"
    raise ScenarioError(f"no such scenario file or bundled example: {path}")


def load(path, overrides=(), seed: int | None = None) -> Scenario:
    text, source = read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", exc.lineno, source) from exc
    _validate(data, text, source)
    if overrides or seed is not None:
        for a in overrides:
            data = apply_override(data, a)
        if seed is not None:
            if not isinstance(data.get("x0"), dict):
                raise ScenarioError("--seed needs a generated x0 ({'uniform': [...], 'seed': ...})")
            data["x0"]["seed"] = seed
        _validate(data, None, source)
    base = Path(source).parent if Path(source).exists() else Path.cwd()
    return build(data, source=source, base=base)


def build(data: dict, source=None, base: Path | None = None) -> Scenario:
    _validate(data, None, source)
    try:
        gspec = data["graph"]
        if "file" in gspec:
            gpath = Path(gspec["file"])
            if not gpath.is_absolute() and base is not None:
                gpath = base / gpath
            graph = load_graph(gpath)
        else:
            graph = graph_from_json(gspec)
        protocol = _protocol(graph, data["protocol"])
        x0 = _x0(data["x0"], graph.n)
        config = _config(data["integrator"])
    except (GraphError, DynamicsError, ValueError, KeyError, OSError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc), None, source) from exc
    analysis = data.get("analysis", {})
    return Scenario(
        name=data.get("name") or (Path(source).stem if source else "scenario"),
        description=data.get("description", ""),
        raw=data,
        protocol=protocol,
        x0=x0,
        config=config,
        sets=list(analysis.get("sets", [])),
        lyapunov=list(analysis.get("lyapunov", ["MaxV", "MinW"])),
        monitor=analysis.get("monitor", "auto"),
        output_dir=data.get("output", {}).get("dir"),
        source=source,
    )


def _protocol(graph, spec) -> ProtocolSpec:
    family = spec["family"]
    if family == MEASUREMENT:
        if "edge_functions" in spec:
            raise ScenarioError("measurement protocols take node functions, not edge_functions")
        if "functions" in spec:
            fns = [from_descriptor(d) for d in spec["functions"]]
        elif "function" in spec:
            fns = [from_descriptor(spec["function"])] * graph.n
        else:
            raise ScenarioError("protocol needs 'function' or 'functions'")
        return ProtocolSpec(graph, MEASUREMENT, node_functions=tuple(fns))
    if "functions" in spec:
        raise ScenarioError("communication protocols take 'function' and/or 'edge_functions'")
    default = from_descriptor(spec["function"]) if "function" in spec else None
    ef = {}
    for j, i, _ in graph.edges:
        if default is not None:
            ef[(j, i)] = default
    for item in spec.get("edge_functions", []):
        j, i = item["edge"]
        if not graph.has_edge(j, i):
            raise ScenarioError(f"edge_functions names {j}->{i}, which is not an edge")
        ef[(j, i)] = from_descriptor(item["function"])
    return ProtocolSpec(graph, COMMUNICATION, edge_functions=ef, convention=spec.get("convention", "relative"))


def _x0(spec, n):
    if isinstance(spec, list):
        if len(spec) != n:
            raise ScenarioError(f"x0 has {len(spec)} entries, graph has {n} nodes")
        return [parse_number(v) for v in spec]
    lo, hi = spec["uniform"]
    rng = np.random.default_rng(spec["seed"])
    return [float(v) for v in rng.uniform(lo, hi, n)]


def _policy(spec):
    kind = spec["kind"]
    if kind == "right":
        return RightContinuous()
    if kind == "left":
        return LeftContinuous()
    if kind == "midpoint":
        return Midpoint()
    return Explicit(parse_number(spec.get("lam", Fraction(1, 2))))


def _config(spec) -> IntegratorConfig:
    mode_name = spec.get("mode", "sliding")
    if mode_name == "prescribed":
        if "policy" not in spec:
            raise ScenarioError("prescribed mode needs a policy")
        mode = PrescribedSelection.constant(_policy(spec["policy"]))
    else:
        mode = {"sliding": SLIDING, "caratheodory": CARATHEODORY}[mode_name]
    kw = {k: spec[k] for k in ("event_tol", "sliding_tol", "chatter_window", "dwell", "max_steps") if k in spec}
    return IntegratorConfig(dt_max=spec["dt_max"], t_end=spec["t_end"], mode=mode, **kw)


def catalog() -> list[dict]:
    """Bundled scenarios with their descriptions."""
    out = []
    folder = resources.files("filippov_consensus") / "scenarios"
    for res in sorted(folder.iterdir(), key=lambda r: r.name):
        if not res.name.endswith(".json"):
            continue
        data = json.loads(res.read_text())
        out.append({"name": res.name[:-5], "description": data.get("description", "")})
    return out
