import hashlib
import json
from pathlib import Path

import pytest

from porous import (AuditSettings, ConfigError, default_config_doc,
                    load_config, parse_config)
from porous.config import config_hash_of, validate_config_doc
from porous.sampling import SamplingBudget

DEMO_CONFIG = Path(__file__).resolve().parents[1] / "demos" / "config" \
    / "demo.json"


def _raw(doc):
    return json.dumps(doc, indent=2).encode()


def test_default_doc_parses_cleanly():
    doc = default_config_doc()
    cfg = parse_config(_raw(doc))
    assert cfg.build.n == 3
    assert cfg.build.depth == len(cfg.build.epsilons)
    assert cfg.workers == 1
    assert cfg.audit == AuditSettings()


def test_demo_config_loads():
    cfg = load_config(DEMO_CONFIG)
    raw = DEMO_CONFIG.read_bytes()
    assert cfg.config_hash == hashlib.sha256(raw).hexdigest()
    assert cfg.raw == raw
    assert cfg.build.config_hash == cfg.config_hash
    assert cfg.path == str(DEMO_CONFIG)


def test_hash_covers_exact_bytes():
    doc = default_config_doc()
    a = parse_config(_raw(doc))
    b = parse_config(json.dumps(doc).encode())     # same doc, fewer bytes
    assert a.doc == b.doc
    assert a.config_hash != b.config_hash
    assert config_hash_of(b"x") == hashlib.sha256(b"x").hexdigest()


def test_missing_file_raises():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.json")


def test_not_json_raises():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(b"{nope")


def test_non_object_raises():
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config(b"[1, 2]")


def test_every_schema_violation_is_reported():
    doc = default_config_doc()
    doc["build"]["n"] = 2              # below minimum
    doc["build"]["s"] = 0.5            # at the open upper bound
    doc["build"]["seed"] = -1          # negative
    with pytest.raises(ConfigError) as err:
        parse_config(_raw(doc))
    msg = str(err.value)
    assert "at /build/n:" in msg
    assert "at /build/s:" in msg
    assert "at /build/seed:" in msg


def test_unknown_keys_are_rejected():
    doc = default_config_doc()
    doc["extra"] = 1
    doc["build"]["typo_knob"] = 2
    with pytest.raises(ConfigError) as err:
        parse_config(_raw(doc))
    msg = str(err.value)
    assert "extra" in msg and "typo_knob" in msg


def test_missing_required_section_points_at_root():
    with pytest.raises(ConfigError, match="at /:"):
        validate_config_doc({"format_version": 1})


def test_format_version_is_pinned():
    doc = default_config_doc()
    doc["format_version"] = 2
    with pytest.raises(ConfigError, match="format_version"):
        parse_config(_raw(doc))


def test_cross_field_errors_become_config_errors():
    doc = default_config_doc()
    doc["build"]["depth"] = 3          # schedule lists only have length 2
    with pytest.raises(ConfigError, match="invalid config"):
        parse_config(_raw(doc))


def test_audit_section_is_optional_with_defaults():
    doc = default_config_doc()
    del doc["audit"]
    del doc["workers"]
    cfg = parse_config(_raw(doc))
    assert cfg.audit == AuditSettings()
    assert cfg.workers == 1


def test_audit_overrides_apply():
    doc = default_config_doc()
    doc["audit"] = {"seed": 7, "porosity_samples": 50,
                    "budget": {"strata": 4, "per_stratum": 16}}
    cfg = parse_config(_raw(doc))
    assert cfg.audit.seed == 7
    assert cfg.audit.porosity_samples == 50
    assert cfg.audit.budget == SamplingBudget(4, 16)
    assert cfg.audit.dbound_budget == AuditSettings().dbound_budget


def test_with_seed_overrides_both_sides():
    cfg = parse_config(_raw(default_config_doc()))
    reseeded = cfg.with_seed(99)
    assert reseeded.build.seed == 99
    assert reseeded.audit.seed == 99
    assert reseeded.config_hash == cfg.config_hash
    assert cfg.build.seed == 0                 # original untouched
    assert cfg.with_seed(None) is cfg


def test_workers_knob():
    doc = default_config_doc()
    doc["workers"] = 4
    assert parse_config(_raw(doc)).workers == 4
    doc["workers"] = 0
    with pytest.raises(ConfigError):
        parse_config(_raw(doc))
