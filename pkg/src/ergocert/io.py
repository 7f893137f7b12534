"""JSON documents for kernels, measures, functions, scenarios, reports.

Every document is a flat JSON object with a "type" discriminator and is
validated against the shipped schema on both save and load. Measures
and functions carry the full label list so a file stands on its own;
loaders accept an expected space and verify the labels against it.
Floats that JSON cannot carry (inf, nan) are stored as strings and
revived on read.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np
import jsonschema

from .core import Kernel, Measure, StateFn, StateSet, StateSpace
from .semigroup import Generator
from .scenarios import Scenario

__all__ = [
    "SCHEMAS",
    "jsonable",
    "validate_document",
    "kernel_to_doc", "kernel_from_doc",
    "generator_to_doc", "generator_from_doc",
    "semigroup_to_doc", "semigroup_from_doc",
    "measure_to_doc", "measure_from_doc",
    "statefn_to_doc", "statefn_from_doc",
    "stateset_to_doc", "stateset_from_doc",
    "scenario_to_doc", "scenario_from_doc",
    "certificate_to_doc",
    "save_document", "load_document",
    "write_series_csv",
]

_LABELS = {"type": "array", "items": {"type": "string"}, "minItems": 1}
_ROW = {"type": "array", "items": {"type": "number"}}
_MATRIX = {"type": "array", "items": _ROW, "minItems": 1}
_JSON_NUMBER = {"anyOf": [{"type": "number"},
                          {"type": "string", "enum": ["inf", "-inf", "nan"]}]}

SCHEMAS = {
    "kernel": {
        "type": "object",
        "required": ["type", "labels", "rows"],
        "properties": {
            "type": {"const": "kernel"},
            "labels": _LABELS,
            "rows": _MATRIX,
            "kind": {"enum": ["markovian", "sub-markovian", "general"]},
        },
        "additionalProperties": False,
    },
    "generator": {
        "type": "object",
        "required": ["type", "labels", "rates"],
        "properties": {
            "type": {"const": "generator"},
            "labels": _LABELS,
            "rates": _MATRIX,
            "lam": {"type": "number"},
        },
        "additionalProperties": False,
    },
    "measure": {
        "type": "object",
        "required": ["type", "labels", "weights"],
        "properties": {
            "type": {"const": "measure"},
            "labels": _LABELS,
            "weights": _ROW,
        },
        "additionalProperties": False,
    },
    "statefn": {
        "type": "object",
        "required": ["type", "labels", "values"],
        "properties": {
            "type": {"const": "statefn"},
            "labels": _LABELS,
            "values": {"type": "array", "items": _JSON_NUMBER},
            "extended": {"type": "boolean"},
        },
        "additionalProperties": False,
    },
    "stateset": {
        "type": "object",
        "required": ["type", "labels", "members"],
        "properties": {
            "type": {"const": "stateset"},
            "labels": _LABELS,
            "members": {"type": "array", "items": {"type": "integer"}},
        },
        "additionalProperties": False,
    },
    "scenario": {
        "type": "object",
        "required": ["type", "id"],
        "properties": {
            "type": {"const": "scenario"},
            "id": {"type": "string"},
            "params": {"type": "object"},
            "seed": {"type": "integer"},
        },
        "additionalProperties": False,
    },
    "certificate": {
        "type": "object",
        "required": ["condition", "verdict"],
        "properties": {
            # the tag is present on standalone files, absent on the
            # copies nested under "attached" or inside reports
            "type": {"const": "certificate"},
            "condition": {"type": "string"},
            "verdict": {"enum": ["holds", "fails", "inconclusive"]},
            "constants": {"type": "object"},
            "witness": {"type": ["object", "null"]},
            "notes": {"type": "string"},
            "attached": {"type": "array"},
        },
        "additionalProperties": False,
    },
    "report": {
        "type": "object",
        "required": ["type", "certificates", "invariants_found"],
        "properties": {
            "type": {"const": "report"},
            "scenario": {"type": ["object", "null"]},
            "certificates": {"type": "array", "items": {"type": "object"}},
            "invariants_found": {"type": "array", "items": {"type": "object"}},
            "profiles": {"type": "object"},
            "timing": {"type": "object"},
            "errors": {"type": "array", "items": {"type": "string"}},
        },
        "additionalProperties": False,
    },
    "pipeline-config": {
        "type": "object",
        "required": ["type"],
        "properties": {
            "type": {"const": "pipeline-config"},
            "scenario": {"type": "object"},
            "inputs": {
                "type": "object",
                "properties": {
                    "kernel": {"type": "string"},
                    "generator": {"type": "string"},
                    "m": {"type": "string"},
                    "mu": {"type": "string"},
                    "lyapunov": {"type": "string"},
                },
                "additionalProperties": False,
            },
            "m": _ROW,
            "mu": _ROW,
            "steps": {"type": "array",
                      "items": {"type": ["string", "object"]}},
            "horizon": {"type": "integer", "minimum": 1},
            "out": {"type": "string"},
            "csv_dir": {"type": "string"},
        },
        "additionalProperties": False,
    },
}


def jsonable(value):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return value


def _revive_number(x):
    if isinstance(x, str):
        return float(x)
    return float(x)


def validate_document(doc: dict) -> str:
    """Check a document against its schema; returns the type tag."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValueError("document must be an object with a 'type' field")
    tag = doc["type"]
    if tag not in SCHEMAS:
        raise ValueError(f"unknown document type {tag!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[tag])
    except jsonschema.ValidationError as exc:
        raise ValueError(f"invalid {tag} document: {exc.message}") from exc
    return tag


def kernel_to_doc(K: Kernel) -> dict:
    return {"type": "kernel", "labels": list(K.space.labels),
            "rows": jsonable(K.rows), "kind": K.kind}


def kernel_from_doc(doc: dict) -> Kernel:
    validate_document(doc)
    space = StateSpace(doc["labels"])
    return Kernel(space, np.array(doc["rows"], dtype=float),
                  kind=doc.get("kind", "markovian"))


def generator_to_doc(G: Generator) -> dict:
    return {"type": "generator", "labels": list(G.space.labels),
            "rates": jsonable(G.rates), "lam": float(G.lam)}


def generator_from_doc(doc: dict) -> Generator:
    validate_document(doc)
    space = StateSpace(doc["labels"])
    lam = doc.get("lam")
    return Generator(space, np.array(doc["rates"], dtype=float), lam=lam)


def semigroup_to_doc(S) -> dict:
    if isinstance(S, Kernel):
        return kernel_to_doc(S)
    return generator_to_doc(S)


def semigroup_from_doc(doc: dict):
    tag = validate_document(doc)
    if tag == "kernel":
        return kernel_from_doc(doc)
    if tag == "generator":
        return generator_from_doc(doc)
    raise ValueError(f"expected kernel or generator, got {tag}")


def _check_labels(doc, space: StateSpace | None, what: str) -> StateSpace:
    if space is None:
        return StateSpace(doc["labels"])
    if tuple(doc["labels"]) != space.labels:
        raise ValueError(f"{what} labels do not match the expected space")
    return space


def measure_to_doc(m: Measure) -> dict:
    return {"type": "measure", "labels": list(m.space.labels),
            "weights": jsonable(m.weights)}


def measure_from_doc(doc: dict, space: StateSpace | None = None) -> Measure:
    validate_document(doc)
    sp = _check_labels(doc, space, "measure")
    return Measure(sp, np.array(doc["weights"], dtype=float))


def statefn_to_doc(f: StateFn) -> dict:
    return {"type": "statefn", "labels": list(f.space.labels),
            "values": jsonable(f.values), "extended": bool(f.extended)}


def statefn_from_doc(doc: dict, space: StateSpace | None = None) -> StateFn:
    validate_document(doc)
    sp = _check_labels(doc, space, "statefn")
    values = np.array([_revive_number(v) for v in doc["values"]])
    return StateFn(sp, values, extended=doc.get("extended", False))


def stateset_to_doc(s: StateSet) -> dict:
    return {"type": "stateset", "labels": list(s.space.labels),
            "members": [int(i) for i in s.members]}


def stateset_from_doc(doc: dict, space: StateSpace | None = None) -> StateSet:
    validate_document(doc)
    sp = _check_labels(doc, space, "stateset")
    return StateSet(sp, doc["members"])


def scenario_to_doc(s: Scenario) -> dict:
    return {"type": "scenario", "id": s.id, "params": jsonable(s.params),
            "seed": int(s.seed)}


def scenario_from_doc(doc: dict) -> Scenario:
    validate_document(doc)
    return Scenario(doc["id"], dict(doc.get("params", {})),
                    int(doc.get("seed", 0)))


def certificate_to_doc(cert) -> dict:
    doc = {"condition": cert.condition, "verdict": cert.verdict,
           "constants": jsonable(cert.constants),
           "witness": jsonable(cert.witness),
           "notes": cert.notes,
           "attached": [certificate_to_doc(c) for c in cert.attached]}
    jsonschema.validate(doc, SCHEMAS["certificate"])
    return doc


def save_document(doc: dict, path) -> None:
    validate_document(doc)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_document(path, expect: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc
    tag = validate_document(doc)
    if expect is not None and tag != expect:
        raise ValueError(f"expected a {expect} document, got {tag}")
    return doc


def write_series_csv(path, columns, rows) -> None:
    """Plot series as plain CSV: a header line then numeric rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([jsonable(v) for v in row])
