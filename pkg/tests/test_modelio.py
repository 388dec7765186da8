from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from logbranch import BranchingMechanism, CompoundPoissonExp, GammaTail, ModelSpec, NoJumps, Stable
from logbranch.diffusion import Linear, Logistic
from logbranch.modelio import (
    ModelFileError,
    diffusion_from_dict,
    diffusion_to_dict,
    dump_model,
    load_model,
    model_from_dict,
    model_to_dict,
)

FELLER = {"b": 0.0, "gamma2": 1.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "none"}}


def test_load_reference(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(FELLER))
    model = load_model(path)
    assert model == ModelSpec(BranchingMechanism(b=0.0, gamma2=1.0), sigma=1.0, c=1.0)


def test_delta_key():
    doc = {"delta": 0.5, "gamma2": 0.0, "sigma": 1.0, "c": 1.0, "levy": {"family": "cpexp", "rate": 1, "decay": 1}}
    model = model_from_dict(doc)
    assert model.mechanism.delta == pytest.approx(0.5)
    # b = delta + int_0^1 u e^{-u} du
    assert model.mechanism.b == pytest.approx(0.5 + 1 - 2 / math.e)


@pytest.mark.parametrize(
    "doc",
    [
        {**FELLER, "extra": 1},
        {k: v for k, v in FELLER.items() if k != "sigma"},
        {**FELLER, "delta": 0.0},
        {**FELLER, "levy": {"family": "stable", "alpha": 2.5, "c_alpha": 1.0}},
        {**FELLER, "levy": {"family": "gamma", "shape": 1.0}},
        {**FELLER, "gamma2": -1.0},
        {**FELLER, "levy": {"family": "none", "rate": 1.0}},
    ],
)
def test_invalid_documents(doc):
    with pytest.raises(ModelFileError):
        model_from_dict(doc)


def test_diffusion_document():
    diff = diffusion_from_dict({**FELLER, "g": {"kind": "linear", "w": 0.3}})
    assert diff.g == Linear(0.3)
    assert diffusion_from_dict(FELLER).g == Logistic(1.0)
    assert diffusion_from_dict(diffusion_to_dict(diff)) == diff
    with pytest.raises(ModelFileError):
        diffusion_from_dict({**FELLER, "levy": {"family": "cpexp", "rate": 1, "decay": 1}})


levies = st.one_of(
    st.just(NoJumps()),
    st.builds(Stable, st.floats(0.1, 0.95), st.floats(0.1, 3)),
    st.builds(GammaTail, st.floats(0.1, 3), st.floats(0.1, 3)),
    st.builds(CompoundPoissonExp, st.floats(0.1, 3), st.floats(0.1, 3)),
)


@given(st.floats(-3, 3), st.floats(0, 2), levies, st.floats(0, 2), st.floats(0, 2))
def test_round_trip(b, gamma2, levy, sigma, c):
    model = ModelSpec(BranchingMechanism(b=b, gamma2=gamma2, levy=levy), sigma=sigma, c=c)
    text = dump_model(model)
    assert model_from_dict(json.loads(text)) == model
    assert model_to_dict(model_from_dict(model_to_dict(model))) == model_to_dict(model)
