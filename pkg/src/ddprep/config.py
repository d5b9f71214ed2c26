"""Strict parsing and validation of experiment configuration documents.

Configs are JSON objects with the blocks ``experiment``, ``system``,
``noise``, ``schedule``, ``grid`` and ``run``.  Validation is strict: every
unknown key is an error naming its dotted path, defaults are filled from
the experiment registry, and the validated form serializes back to
canonical JSON so parse -> serialize -> parse is the identity.

Unit convention: times are measured in 1/lambda_i for the collective
pumping experiments and in 1/gamma for the stabilizer-pumping experiment;
frequencies (delta, nbar, 1/tau_c) are in the matching rate unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from numbers import Real


class ConfigError(ValueError):
    """Invalid configuration document; message carries the key path."""


def _require_mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _check_number(value, path, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if positive and v <= 0:
        raise ConfigError(f"{path}: must be positive, got {v}")
    if nonnegative and v < 0:
        raise ConfigError(f"{path}: must be nonnegative, got {v}")
    return v


def _check_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {value}")
    return value


def _check_number_list(value, path, positive=False, nonnegative=False):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of numbers")
    return [
        _check_number(v, f"{path}[{i}]", positive=positive, nonnegative=nonnegative)
        for i, v in enumerate(value)
    ]


def _check_sequence_tag(tag, path):
    from .pulses import sequence_from_tag

    if not isinstance(tag, str):
        raise ConfigError(f"{path}: expected a sequence tag string, got {tag!r}")
    if tag == "random":
        return tag
    try:
        sequence_from_tag(tag, 1.0)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return tag


# Allowed keys per block and experiment family.  Key -> (checker, default).
_SINGLET_SYSTEM = {
    "n_qubits": (lambda v, p: _check_int(v, p, minimum=2), 6),
    "lambda_h": (lambda v, p: _check_number(v, p, positive=True), None),
    "lambda_i": (lambda v, p: _check_number(v, p, positive=True), 1.0),
}
_CLUSTER_SYSTEM = {
    "n_qubits": (lambda v, p: _check_int(v, p, minimum=2), 4),
    "gamma": (lambda v, p: _check_number(v, p, positive=True), 1.0),
}
_RUN_COMMON = {
    "seed": (lambda v, p: _check_int(v, p, minimum=0), 0),
    "workers": (lambda v, p: v if v is None else _check_int(v, p, minimum=1), None),
    "max_time": (
        lambda v, p: v if v is None else _check_number(v, p, positive=True),
        None,
    ),
    "avg_tol": (lambda v, p: _check_number(v, p, positive=True), 1e-4),
}


def _sequences_checker(value, path):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of sequence tags")
    return [_check_sequence_tag(v, f"{path}[{i}]") for i, v in enumerate(value)]


_EXPERIMENT_SCHEMAS = {
    "table1": {
        "system": {},
        "noise": {},
        "schedule": {
            "sequences": (_sequences_checker,
                          ["none", "cpmg", "cdd3", "cdd4", "udd3", "udd4", "udd5"]),
        },
        "grid": {},
        "run": dict(_RUN_COMMON),
    },
    "fig3a": {
        "system": dict(_SINGLET_SYSTEM, lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 10.0)),
        "noise": {},
        "schedule": {
            "sequences": (_sequences_checker, ["cpmg", "cdd3", "cdd4", "udd5", "udd10"]),
            "t_p": (lambda v, p: _check_number(v, p, positive=True), 1e-3),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
        },
        "run": dict(_RUN_COMMON),
    },
    "fig3b": {
        "system": dict(_SINGLET_SYSTEM, lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 10.0)),
        "noise": {},
        "schedule": {
            "sequences": (_sequences_checker, ["cpmg", "cdd3", "cdd4", "udd5", "udd10"]),
            "tau_bar": (lambda v, p: _check_number(v, p, positive=True), 1e-4),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
        },
        "run": dict(_RUN_COMMON),
    },
    "fig4": {
        "system": dict(_SINGLET_SYSTEM, lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 100.0)),
        "noise": {},
        "schedule": {
            "sequences": (_sequences_checker, ["cpmg", "cdd3", "udd3", "udd5"]),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
            "nbars": (lambda v, p: _check_number_list(v, p, positive=True), None),
        },
        "run": dict(_RUN_COMMON),
    },
    "fig5": {
        "system": dict(_SINGLET_SYSTEM, lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 100.0)),
        "noise": {},
        "schedule": {
            "sequences": (_sequences_checker, ["cpmg", "udd3", "cdd6", "udd42"]),
            "nbar": (lambda v, p: _check_number(v, p, positive=True), 10**2.75),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
        },
        "run": dict(_RUN_COMMON),
    },
    "fig6": {
        "system": dict(_SINGLET_SYSTEM, lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 100.0)),
        "noise": {},
        "schedule": {
            "n_seeds": (lambda v, p: _check_int(v, p, minimum=1), 8),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
            "nbars": (lambda v, p: _check_number_list(v, p, positive=True), None),
        },
        "run": dict(_RUN_COMMON, max_time=(_RUN_COMMON["max_time"][0], 40.0)),
    },
    "fig8": {
        "system": dict(_CLUSTER_SYSTEM),
        "noise": {},
        "schedule": {
            "sequence": (_check_sequence_tag, "udd3"),
            "include_unprotected": (
                lambda v, p: v if isinstance(v, bool)
                else (_ for _ in ()).throw(ConfigError(f"{p}: expected true/false")),
                True,
            ),
        },
        "grid": {
            "deltas": (lambda v, p: _check_number_list(v, p, nonnegative=True), None),
            "nbars": (lambda v, p: _check_number_list(v, p, positive=True), None),
        },
        "run": dict(_RUN_COMMON),
    },
    "dynamic_noise_scaling": {
        "system": dict(_SINGLET_SYSTEM, n_qubits=(_SINGLET_SYSTEM["n_qubits"][0], 4),
                       lambda_h=(_SINGLET_SYSTEM["lambda_h"][0], 10.0)),
        "noise": {
            "sigma2": (lambda v, p: _check_number(v, p, nonnegative=True), 4.0),
            "tau_c": (lambda v, p: _check_number(v, p, positive=True), 0.25),
        },
        "schedule": {
            "sequence": (_check_sequence_tag, "cpmg"),
        },
        "grid": {
            "tau_bars": (lambda v, p: _check_number_list(v, p, positive=True), None),
        },
        "run": dict(
            _RUN_COMMON,
            n_traj=(lambda v, p: _check_int(v, p, minimum=2), 256),
            max_time=(_RUN_COMMON["max_time"][0], 12.0),
            average_window=(lambda v, p: _check_number(v, p, positive=True), 2.0),
        ),
    },
}

# Grid defaults that are experiment wide but too bulky for the schema table.
_GRID_DEFAULTS = {
    "fig3a": {"deltas": [10.0 ** (k / 2) for k in range(-2, 7)]},
    "fig3b": {"deltas": [10.0 ** (k / 2) for k in range(-2, 7)]},
    "fig4": {
        "deltas": [10.0 ** (k / 2) for k in range(0, 7)],
        "nbars": [10.0 ** (1 + k / 2) for k in range(0, 7)],
    },
    "fig5": {"deltas": [10.0 ** (2.75 * k / 7) for k in range(0, 8)]},
    "fig6": {
        "deltas": [10.0 ** (k / 4) for k in range(0, 5)],
        "nbars": [10.0 ** (2.0 + k / 4) for k in range(0, 5)],
    },
    "fig8": {
        "deltas": [0.125, 0.25, 0.5, 1.0, 2.0],
        "nbars": [3.0, 10.0, 30.0, 100.0, 300.0],
    },
    "dynamic_noise_scaling": {
        "tau_bars": [0.01 * 1.5**k for k in range(0, 5)],
    },
    "table1": {},
}

EXPERIMENT_IDS = tuple(sorted(_EXPERIMENT_SCHEMAS))


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with all defaults filled."""

    experiment: str
    system: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "system": self.system,
            "noise": self.noise,
            "schedule": self.schedule,
            "grid": self.grid,
            "run": self.run,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _validate_block(name: str, schema: dict, raw: dict, defaults: dict) -> dict:
    raw = _require_mapping(raw if raw is not None else {}, name)
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(
            f"{name}.{sorted(unknown)[0]}: unknown key (allowed: {sorted(schema) or 'none'})"
        )
    out = {}
    for key, (checker, default) in schema.items():
        if key in raw:
            out[key] = checker(raw[key], f"{name}.{key}")
        else:
            value = defaults.get(key, default)
            if value is None and key in ("deltas", "nbars", "tau_bars") and defaults.get(key) is None:
                raise ConfigError(f"{name}.{key}: required key missing")
            out[key] = value
    return out


def validate(document: dict) -> ExperimentConfig:
    document = _require_mapping(document, "config")
    known_top = {"experiment", "system", "noise", "schedule", "grid", "run"}
    unknown = set(document) - known_top
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level key")
    if "experiment" not in document:
        raise ConfigError(
            "experiment: required key missing "
            f"(known experiments: {', '.join(EXPERIMENT_IDS)})"
        )
    experiment = document["experiment"]
    if experiment not in _EXPERIMENT_SCHEMAS:
        raise ConfigError(
            f"experiment: unknown id {experiment!r} "
            f"(known: {', '.join(EXPERIMENT_IDS)})"
        )
    schema = _EXPERIMENT_SCHEMAS[experiment]
    grid_defaults = _GRID_DEFAULTS[experiment]
    blocks = {}
    for block in ("system", "noise", "schedule", "grid", "run"):
        defaults = grid_defaults if block == "grid" else {}
        blocks[block] = _validate_block(
            block, schema[block], document.get(block), defaults
        )
    return ExperimentConfig(experiment=experiment, **blocks)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from None
    return validate(document)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def default_config(experiment: str) -> ExperimentConfig:
    return validate({"experiment": experiment})
