import json

import numpy as np
import pytest

from conftest import random_jump
from impiqc import sysio
from impiqc.errors import SystemFileError
from impiqc.model import Estimator, JumpEstimationPlant, JumpForm, jump_to_feedback
from impiqc.systems import exa1, exa_syn


def same(a, b):
    assert type(a) is type(b)
    for name in a.__dataclass_fields__:
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


@pytest.mark.parametrize("make", [
    lambda rng: random_jump(rng, n=3, n_d=2),
    lambda rng: jump_to_feedback(random_jump(rng)),
    lambda rng: exa_syn(),
    lambda rng: exa_syn().to_feedback(),
    lambda rng: Estimator.from_block(rng.normal(size=(3, 3)), 2),
    lambda rng: exa1(2.5),
])
def test_round_trip(make, rng, tmp_path):
    obj = make(rng)
    path = tmp_path / "sys.json"
    sysio.dump(obj, str(path), labels={"note": "x"})
    same(sysio.load(str(path)), obj)
    same(sysio.from_dict(json.loads(json.dumps(sysio.to_dict(obj)))), obj)


def test_empty_shapes_recorded():
    doc = sysio.to_dict(exa1(1.0))
    assert doc["shapes"]["B"] == [2, 0]
    assert doc["shapes"]["D"] == [0, 0]


def test_bundled_files():
    j = sysio.load("exa1.json", beta=2.0)
    same(j, exa1(2.0))
    assert isinstance(sysio.load("exa_syn.json"), JumpEstimationPlant)
    assert isinstance(sysio.load("hold_loop.json"), JumpForm)


@pytest.mark.parametrize("doc", [
    [], {"form": "nope"}, {"family": "nope"}, {"family": "exa_syn", "params": {"beta": 1}},
    {"form": "jump", "A": [[1]]}, {"form": "estimator", "A_e": [[1, 2], [3]], "B_e": [[1]],
                                   "C_e": [[1]], "D_e": [[1]]},
    {"form": "estimator", "A_e": [[1]], "B_e": [[1, 2]], "C_e": [[1]], "D_e": [[1]]},
])
def test_bad_documents(doc):
    with pytest.raises(SystemFileError) as exc:
        sysio.from_dict(doc)
    assert exc.value.code == "bad-system-file"


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SystemFileError):
        sysio.load(str(p))
