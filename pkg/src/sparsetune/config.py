"""Experiment configuration files (JSON, versioned schema)."""

import json

from jsonschema import Draft202012Validator

from .exceptions import ConfigError
from .suites import ProblemSuite
from .transition import ExperimentGrid, config_from_dict

SCHEMA_VERSION = 1

_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_policy = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["FAR", "OracleK", "FixedRho"]},
        "far": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "k": {"type": ["integer", "null"], "minimum": 1},
        "rho_star": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "alpha": {"type": "number", "minimum": 1},
        "beta": {"type": "number", "minimum": 1},
    },
    "additionalProperties": False,
}

_solver = {
    "type": "object",
    "oneOf": [
        {
            "required": ["algo", "kappa", "policy"],
            "properties": {
                "algo": {"enum": ["IST", "IHT", "TST"]},
                "kappa": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "policy": _policy,
                "max_iter": {"type": "integer", "minimum": 1},
                "residual_stop": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        {
            "required": ["recommended"],
            "properties": {
                "recommended": {
                    "type": "object",
                    "required": ["algo"],
                    "properties": {
                        "algo": {"enum": ["IST", "IHT", "TST"]},
                        "fast_ops": {"type": "boolean"},
                        "max_iter": {"type": "integer", "minimum": 1},
                        "residual_stop": {"type": "number", "minimum": 0},
                    },
                    "additionalProperties": False,
                }
            },
            "additionalProperties": False,
        },
    ],
}

_suite = {
    "type": "object",
    "required": ["matrix", "coeff"],
    "properties": {
        "matrix": {"enum": ["USE", "RSE", "URP", "PartialFourier1D", "PartialHadamard1D"]},
        "coeff": {"enum": ["CARS", "DoubleExponential", "Cauchy", "UniformSym"]},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "N": {"type": "integer", "minimum": 1},
        "deltas": _number_list,
        "rhos": {
            "oneOf": [
                _number_list,
                {"type": "array", "items": _number_list, "minItems": 1},
            ]
        },
        "M": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "base_seed": {"type": "integer", "minimum": 0},
        "suite": _suite,
        "suites": {"type": "array", "items": _suite, "minItems": 1},
        "config": _solver,
        "theta_grid": {"type": "array", "items": _solver, "minItems": 1},
        "fresh_operator": {"type": "boolean"},
        "timing": {
            "type": "object",
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "reps": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

_validator = Draft202012Validator(SCHEMA)


def _path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(doc):
    """Return a list of every problem found in ``doc`` (empty when valid)."""
    problems = [f"{_path(e)}: {e.message}" for e in sorted(_validator.iter_errors(doc), key=str)]
    if problems:
        return problems
    grid_doc = {k: v for k, v in doc.items() if k in ("N", "deltas", "rhos", "M", "tol", "base_seed",
                                                     "suite", "config", "fresh_operator")}
    try:
        ExperimentGrid.from_dict(grid_doc)
    except ConfigError as exc:
        problems.extend(exc.problems or [str(exc)])
    for i, cfg in enumerate(doc.get("theta_grid", [])):
        try:
            config_from_dict(cfg)
        except ConfigError as exc:
            problems.append(f"theta_grid/{i}: {exc}")
    return problems


def load_config(path):
    """Read and validate a JSON experiment config; raises ``ConfigError``."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})", [str(exc)]) from None
    problems = validate_config(doc)
    if problems:
        raise ConfigError(f"{path}: {len(problems)} invalid field(s)", problems)
    return doc


def grid_from_config(doc, suite=None):
    d = {k: v for k, v in doc.items() if k in ("N", "deltas", "rhos", "M", "tol", "base_seed",
                                              "suite", "config", "fresh_operator")}
    if suite is not None:
        d["suite"] = suite.to_dict()
    return ExperimentGrid.from_dict(d)


def theta_grid_from_config(doc):
    return [config_from_dict(c) for c in doc.get("theta_grid", [])]


def suites_from_config(doc):
    return [ProblemSuite.from_dict(s) for s in doc.get("suites", [])]


def default_config():
    """The desk-scale default grid as a config document."""
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(ExperimentGrid().to_dict())
    return doc


__all__ = [
    "SCHEMA",
    "SCHEMA_VERSION",
    "validate_config",
    "load_config",
    "grid_from_config",
    "theta_grid_from_config",
    "suites_from_config",
    "default_config",
]
