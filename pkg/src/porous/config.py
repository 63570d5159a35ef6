"""Run-configuration loading, validation, and canonical hashing.

The run config is a single JSON document.  Validation is schema-driven and
exhaustive: every violation in the file is reported at once, and unknown
keys are rejected so nothing silently defaults.  The canonical hash is the
sha256 of the raw file bytes; it is stamped into every artifact a run
produces and lets downstream tools refuse to merge results from different
configurations.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .construction import BuildConfig
from .errors import ConfigError
from .sampling import SamplingBudget
from .verification import DBOUND_C, LEDGER_C

CONFIG_FORMAT_VERSION = 1

_BUDGET_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["strata", "per_stratum"],
    "properties": {
        "strata": {"type": "integer", "minimum": 1},
        "per_stratum": {"type": "integer", "minimum": 2},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["format_version", "build"],
    "properties": {
        "format_version": {"const": CONFIG_FORMAT_VERSION},
        "build": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n", "s", "r", "L", "E", "epsilons",
                         "stop_fractions", "depth", "seed"],
            "properties": {
                "n": {"type": "integer", "minimum": 3},
                "s": {"type": "number", "exclusiveMinimum": 0,
                      "exclusiveMaximum": 0.5},
                "r": {"type": "number", "exclusiveMinimum": 0,
                      "exclusiveMaximum": 0.03125},
                "L": {"type": "number", "exclusiveMinimum": 2},
                "E": {"type": "number", "exclusiveMinimum": 1},
                "epsilons": {"type": "array", "minItems": 1,
                             "items": {"type": "number",
                                       "exclusiveMinimum": 0}},
                "stop_fractions": {"type": "array", "minItems": 1,
                                   "items": {"type": "number",
                                             "exclusiveMinimum": 0,
                                             "exclusiveMaximum": 1}},
                "depth": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0,
                         "maximum": 2**64 - 1},
                "max_levels": {"type": "integer", "minimum": 1},
                "accept_partial": {"type": "boolean"},
                "pool_size": {"type": "integer", "minimum": 64},
                "budget": _BUDGET_SCHEMA,
            },
        },
        "audit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0,
                         "maximum": 2**64 - 1},
                "budget": _BUDGET_SCHEMA,
                "dbound_budget": _BUDGET_SCHEMA,
                "c_ledger": {"type": "number", "exclusiveMinimum": 0},
                "c_dbound": {"type": "number", "exclusiveMinimum": 0},
                "porosity_samples": {"type": "integer", "minimum": 1},
                "porosity_tol": {"type": "number", "minimum": 0},
                "floor_samples": {"type": "integer", "minimum": 64},
            },
        },
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass(frozen=True)
class AuditSettings:
    """Knobs for the audit orchestration, all overridable from the config."""

    seed: int = 0
    budget: SamplingBudget = SamplingBudget(32, 128)
    dbound_budget: SamplingBudget = SamplingBudget(8, 32)
    c_ledger: float = LEDGER_C
    c_dbound: float = DBOUND_C
    porosity_samples: int = 1000
    porosity_tol: float = 1e-6
    floor_samples: int = 4096


@dataclass(frozen=True)
class LoadedConfig:
    """A validated config document plus everything derived from it."""

    path: str
    raw: bytes
    doc: dict
    config_hash: str
    build: BuildConfig
    audit: AuditSettings
    workers: int = 1

    def with_seed(self, seed: Optional[int]) -> "LoadedConfig":
        """Copy with the seed overridden in both build and audit settings."""
        if seed is None:
            return self
        build = BuildConfig(**{**_build_kwargs(self.doc["build"]),
                               "seed": int(seed),
                               "config_hash": self.config_hash})
        audit = AuditSettings(**{**_audit_kwargs(self.doc.get("audit", {})),
                                 "seed": int(seed)})
        return LoadedConfig(path=self.path, raw=self.raw, doc=self.doc,
                            config_hash=self.config_hash, build=build,
                            audit=audit, workers=self.workers)


def config_hash_of(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _pointer(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/" + "/".join(parts) if parts else "/"


def validate_config_doc(doc: dict) -> None:
    """Schema-check a parsed config; raises with every violation listed."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc),
                    key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        lines = [f"  at {_pointer(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n" + "\n".join(lines))


def _budget(obj: Optional[dict], default: SamplingBudget) -> SamplingBudget:
    if obj is None:
        return default
    return SamplingBudget(int(obj["strata"]), int(obj["per_stratum"]))


def _build_kwargs(build: dict) -> dict:
    kwargs = {
        "n": int(build["n"]),
        "s": float(build["s"]),
        "r": float(build["r"]),
        "L": float(build["L"]),
        "E": float(build["E"]),
        "epsilons": tuple(float(e) for e in build["epsilons"]),
        "stop_fractions": tuple(float(f) for f in build["stop_fractions"]),
        "depth": int(build["depth"]),
        "seed": int(build["seed"]),
    }
    if "max_levels" in build:
        kwargs["max_levels"] = int(build["max_levels"])
    if "accept_partial" in build:
        kwargs["accept_partial"] = bool(build["accept_partial"])
    if "pool_size" in build:
        kwargs["pool_size"] = int(build["pool_size"])
    if "budget" in build:
        kwargs["budget"] = _budget(build["budget"], SamplingBudget(32, 128))
    return kwargs


def _audit_kwargs(audit: dict) -> dict:
    defaults = AuditSettings()
    return {
        "seed": int(audit.get("seed", defaults.seed)),
        "budget": _budget(audit.get("budget"), defaults.budget),
        "dbound_budget": _budget(audit.get("dbound_budget"),
                                 defaults.dbound_budget),
        "c_ledger": float(audit.get("c_ledger", defaults.c_ledger)),
        "c_dbound": float(audit.get("c_dbound", defaults.c_dbound)),
        "porosity_samples": int(audit.get("porosity_samples",
                                          defaults.porosity_samples)),
        "porosity_tol": float(audit.get("porosity_tol",
                                        defaults.porosity_tol)),
        "floor_samples": int(audit.get("floor_samples",
                                       defaults.floor_samples)),
    }


def parse_config(raw: bytes, path: str = "<memory>") -> LoadedConfig:
    """Validate raw config bytes and derive the typed settings."""
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    validate_config_doc(doc)
    digest = config_hash_of(raw)
    try:
        build = BuildConfig(**_build_kwargs(doc["build"]),
                            config_hash=digest)
    except ValueError as exc:
        # cross-field constraints the schema cannot express
        raise ConfigError(f"invalid config: {exc}") from exc
    audit = AuditSettings(**_audit_kwargs(doc.get("audit", {})))
    return LoadedConfig(path=path, raw=raw, doc=doc, config_hash=digest,
                        build=build, audit=audit,
                        workers=int(doc.get("workers", 1)))


def load_config(path: Union[str, Path]) -> LoadedConfig:
    """Read and validate a config file; the hash covers the exact bytes."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(raw, path=str(p))


def default_config_doc() -> dict:
    """The shipped demo parameters as a config document."""
    cfg = BuildConfig()
    return {
        "format_version": CONFIG_FORMAT_VERSION,
        "build": {
            "n": cfg.n,
            "s": cfg.s,
            "r": cfg.r,
            "L": cfg.L,
            "E": cfg.E,
            "epsilons": list(cfg.epsilons),
            "stop_fractions": list(cfg.stop_fractions),
            "depth": cfg.depth,
            "seed": cfg.seed,
            "max_levels": cfg.max_levels,
            "accept_partial": cfg.accept_partial,
            "pool_size": cfg.pool_size,
            "budget": {"strata": cfg.budget.strata,
                       "per_stratum": cfg.budget.per_stratum},
        },
        "audit": {
            "seed": 0,
            "budget": {"strata": 32, "per_stratum": 128},
            "dbound_budget": {"strata": 8, "per_stratum": 32},
            "c_ledger": LEDGER_C,
            "c_dbound": DBOUND_C,
            "porosity_samples": 1000,
            "porosity_tol": 1e-6,
            "floor_samples": 4096,
        },
        "workers": 1,
    }

