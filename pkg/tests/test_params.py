import json

import pytest
from hypothesis import given, strategies as st

from pvduopoly.errors import ParameterError
from pvduopoly.params import EPS_GEOM, ModelParams, SimplexPoint, in_simplex, reflect


def test_pstar_accepted(pstar):
    assert pstar.validate() is pstar


@pytest.mark.parametrize("field,value,msg", [
    ("sigma", 0.0, "sigma must be positive"),
    ("k", -1.0, "k must be positive"),
    ("beta", 0.0, "beta must be positive"),
    ("rho", -0.5, "rho must be positive"),
    ("theta", 0.0, "theta must be positive"),
    ("c", -0.1, "c must be nonnegative"),
])
def test_rejects_bad_fields(pstar, field, value, msg):
    bad = ModelParams(**{**pstar.to_dict(), field: value})
    with pytest.raises(ParameterError, match=msg):
        bad.validate()


def test_zero_cost_allowed(pstar):
    ModelParams(**{**pstar.to_dict(), "c": 0.0}).validate()


def test_reflect_examples():
    assert reflect(SimplexPoint(0.2, 0.7)) == SimplexPoint(0.7, 0.2)
    assert reflect(SimplexPoint(0.5, 0.5)) == SimplexPoint(0.5, 0.5)


@given(st.floats(0, 1), st.floats(0, 1))
def test_reflect_involution(y1, y2):
    p = SimplexPoint(y1, y2)
    assert reflect(reflect(p)) == p


def test_simplex_membership_tolerance(pstar):
    SimplexPoint(0.5, 0.5 + 0.5 * EPS_GEOM).validate(pstar.theta)
    with pytest.raises(ParameterError):
        SimplexPoint(0.6, 0.5).validate(pstar.theta)
    assert in_simplex(0.25, 0.75, pstar.theta)
    assert not in_simplex(0.25, 0.76, pstar.theta)


def test_json_roundtrip(tmp_path, pstar):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(pstar.to_dict()))
    assert ModelParams.from_json(str(path)) == pstar


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("sigma"),
    lambda d: d.update(extra=1.0),
    lambda d: d.update(k="fast"),
])
def test_json_strictness(tmp_path, pstar, mutate):
    d = pstar.to_dict()
    mutate(d)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ParameterError):
        ModelParams.from_json(str(path))
