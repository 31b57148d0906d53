import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronoml.config_space import (
    DNN,
    INACTIVE,
    ML,
    STATISTICAL,
    Categorical,
    ConfigSpace,
    Configuration,
    Float,
    HyperParam,
    Integer,
    default_space,
)
from chronoml.exceptions import SpaceError

SPACE = default_space()


def _tiny():
    return ConfigSpace([
        HyperParam("template", Categorical(("A",))),
        HyperParam("x", Float(0.0, 1.0), ("template", "A")),
        HyperParam("lr", Float(1e-4, 1.0, log=True), ("template", "A")),
    ])


def test_sample_tiny_space(rng):
    c = _tiny().sample(rng)
    assert c["template"] == "A" and 0 <= c["x"] <= 1


def test_log_uniform_median():
    gen = np.random.default_rng(0)
    space = _tiny()
    values = [space.sample(gen)["lr"] for _ in range(10_000)]
    assert 8e-3 <= np.median(values) <= 1.3e-2


def test_children_follow_selector(rng):
    for _ in range(1000):
        c = SPACE.sample(rng)
        if c["template"] == STATISTICAL:
            assert not any(n.startswith(("ml.", "dnn.")) for n in c)


def test_encode_examples():
    space = _tiny()
    vec = space.encode(Configuration({"template": "A", "x": 0.5, "lr": 1e-2}))
    assert vec[1] == 0.5 and vec[2] == pytest.approx(0.5)
    stat = SPACE.default(STATISTICAL)
    lr_slot = SPACE.names.index("dnn.learning_rate")
    assert SPACE.encode(stat)[lr_slot] == INACTIVE
    with pytest.raises(SpaceError):
        SPACE.encode(Configuration({"nope": 1}))


@pytest.mark.parametrize("template", [STATISTICAL, ML, DNN])
def test_default_roundtrip(template):
    c = SPACE.default(template)
    assert SPACE.is_valid(c)
    assert SPACE.decode(SPACE.encode(c)) == c


def test_neighbors_examples(rng):
    assert SPACE.neighbors(SPACE.default(ML), 0, rng) == []
    seen_switch = False
    for _ in range(300):
        n = SPACE.neighbors(SPACE.default(ML), 1, rng)[0]
        if n["template"] == STATISTICAL:
            seen_switch = True
            assert not any(k.startswith("ml.") for k in n)
        assert sum(1 for k in n if k in SPACE.default(ML) and n[k] != SPACE.default(ML)[k]) <= 1
    assert seen_switch


def test_boundary_neighbors_stay_in_domain(rng):
    space = _tiny()
    edge = Configuration({"template": "A", "x": 1.0, "lr": 1e-4})
    for n in space.neighbors(edge, 1000, rng):
        assert space.is_valid(n)


def test_domain_errors():
    with pytest.raises(SpaceError):
        Float(1.0, 1.0)
    with pytest.raises(SpaceError):
        Float(0.0, 1.0, log=True)
    with pytest.raises(SpaceError):
        Categorical(("a", "a"))
    with pytest.raises(SpaceError):
        SPACE.validate(Configuration({"template": STATISTICAL}))


def test_validity_closure_10k():
    gen = np.random.default_rng(1)
    dims = set()
    for _ in range(10_000):
        c = SPACE.sample(gen)
        assert SPACE.is_valid(c)
        n = SPACE.neighbors(c, 1, gen)[0]
        assert SPACE.is_valid(n)
        vec = SPACE.encode(n)
        dims.add(vec.shape)
        assert SPACE.is_valid(SPACE.decode(vec))
    assert dims == {(SPACE.dimension,)}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=len(SPACE), max_size=len(SPACE)))
def test_decode_always_valid(vector):
    assert SPACE.is_valid(SPACE.decode(np.array(vector)))


def test_activity_depends_on_selectors_only(rng):
    selectors = [p.name for p in SPACE.params if p.is_categorical]
    by_selectors = {}
    for _ in range(2000):
        c = SPACE.sample(rng)
        sig = tuple((n, c.get(n)) for n in selectors)
        by_selectors.setdefault(sig, set()).add(frozenset(c))
    assert all(len(v) == 1 for v in by_selectors.values())


def test_json_roundtrip_preserves_version():
    again = ConfigSpace.from_json(SPACE.to_json())
    assert again.version == SPACE.version
    assert Integer(1, 30).to_json()["type"] == "int"
