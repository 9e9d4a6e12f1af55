import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tweetsift.errors import ModelFormatError
from tweetsift.modelio import ModelFile, dumps, load, loads, save

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3)), elements=finite),
       arrays(np.float64, st.integers(1, 8), elements=finite))
def test_roundtrip_bit_exact(cube, vec):
    mf = ModelFile("test", {"a": 1, "b": [1, 2], "c": "x y"}, ["tok", "#tag", "@who"], {"cube": cube, "vec": vec})
    back = loads(dumps(mf))
    assert back.kind == "test" and back.meta == mf.meta and back.vocab == mf.vocab
    for name in ("cube", "vec"):
        assert back.arrays[name].shape == mf.arrays[name].shape
        assert back.arrays[name].tobytes() == np.asarray(mf.arrays[name]).tobytes()
    assert dumps(back) == dumps(mf)


def test_special_values_and_scalar():
    mf = ModelFile("t", arrays={"s": np.float64(0.1), "v": np.array([-0.0, 1e-308, 5e-324, 1.7976931348623157e308])})
    back = loads(dumps(mf))
    assert float(back.arrays["s"]) == 0.1
    assert back.arrays["v"].tobytes() == mf.arrays["v"].tobytes()


def test_save_load(tmp_path):
    mf = ModelFile("k", {}, ["a"], {"w": np.arange(6.0).reshape(2, 3)})
    save(mf, tmp_path / "m")
    assert load(tmp_path / "m").arrays["w"].tolist() == [[0, 1, 2], [3, 4, 5]]


def test_unstorable_token():
    with pytest.raises(ModelFormatError):
        dumps(ModelFile("k", vocab=["two words"]))


@pytest.mark.parametrize("text", [
    "",
    "something else 1\n",
    "tweetsift-model 2\nkind x\nvocab 0\nend\n",
    "tweetsift-model 1\nvocab 0\nend\n",
    "tweetsift-model 1\nkind x\nmeta a {bad\nvocab 0\nend\n",
    "tweetsift-model 1\nkind x\nvocab 2\na\n",
    "tweetsift-model 1\nkind x\nvocab 0\narray w 2,2\n1.0 2.0\nend\n",
    "tweetsift-model 1\nkind x\nvocab 0\narray w 3\n1.0 2.0\nend\n",
    "tweetsift-model 1\nkind x\nvocab 0\njunk\n",
])
def test_malformed(tmp_path, text):
    (tmp_path / "m").write_text(text)
    with pytest.raises(ModelFormatError):
        load(tmp_path / "m")


def test_missing_file(tmp_path):
    with pytest.raises(ModelFormatError):
        load(tmp_path / "nope")
