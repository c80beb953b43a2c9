import json

import pytest

from stackelkit.scalarfield import Backend
from stackelkit.stackel import example, stackel_integrals
from stackelkit.systemfile import (
    SYSTEM_SCHEMA,
    SchemaError,
    digest,
    load_stackel,
    load_system,
    read_json,
    system_to_json,
)


def test_triangle_and_full_matrix_agree():
    tri = load_system({"chart": ["x1", "x2"], "metric": [["x1", "1"], ["x2"]]})
    full = load_system({"chart": ["x1", "x2"], "metric": [["x1", "1"], ["1", "x2"]]})
    assert tri.metric.components == full.metric.components


def test_asymmetric_full_matrix_rejected():
    with pytest.raises(SchemaError):
        load_system({"chart": ["x1", "x2"], "metric": [["x1", "1"], ["2", "x2"]]})


def test_stackel_only_file_expands():
    system = load_system({"chart": ["x1", "x2"], "stackel": [["1", "-1/x1^2"], ["0", "1"]]})
    assert [K.label for K in system.integrals] == ["I2"]
    assert system.metric.components == stackel_integrals(example("polar")).metric.components


def test_round_trip_through_json():
    system = stackel_integrals(example("liouville"))
    data = json.loads(json.dumps(system_to_json(system, "x")))
    loaded = load_system(data)
    assert loaded.metric.components == system.metric.components
    assert loaded.integrals[0].components == system.integrals[1].components
    S, row = load_stackel(data)
    assert S.entries == example("liouville").entries and row == 0


def test_backend_resolution():
    data = {"chart": ["x1"], "metric": [["1 + x1^2"]]}
    assert load_system(data).backend is Backend.EXACT
    assert load_system(data, "numeric").backend is Backend.NUMERIC
    assert load_system({"chart": ["x1"], "metric": [["exp(x1)"]]}).backend is Backend.NUMERIC
    with pytest.raises(SchemaError):
        load_system({"chart": ["x1"], "backend": "exact", "metric": [["exp(x1)"]]})


def test_schema_rejects_unknown_keys():
    with pytest.raises(SchemaError):
        load_system({"chart": ["x1"], "metric": [["1"]], "extra": 1})
    assert SYSTEM_SCHEMA["additionalProperties"] is False


def test_builtin_and_digest():
    data, raw = read_json("builtin:polar")
    assert data["chart"] == ["x1", "x2"]
    assert digest(raw) == digest(raw) and digest(raw) != digest(raw + b" ")


def test_shipped_schema_is_current():
    from pathlib import Path
    shipped = json.loads((Path(__file__).resolve().parents[1] / "docs" / "system.schema.json").read_text())
    assert shipped == SYSTEM_SCHEMA
