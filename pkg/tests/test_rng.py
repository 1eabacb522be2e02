"""Named substreams: deterministic, path-separated, order-independent."""

import numpy as np
import pytest

from factmech.rng import substream


def test_same_path_same_stream():
    a = substream(42, "alpha", 3).random(8)
    b = substream(42, "alpha", 3).random(8)
    assert (a == b).all()


def test_different_paths_differ():
    a = substream(42, "alpha", 3).random(8)
    b = substream(42, "alpha", 4).random(8)
    c = substream(42, "beta", 3).random(8)
    d = substream(43, "alpha", 3).random(8)
    assert not (a == b).all()
    assert not (a == c).all()
    assert not (a == d).all()


def test_int_and_str_parts_do_not_collide():
    a = substream(0, "x", 1).random(4)
    b = substream(0, "x", "1").random(4)
    assert not (a == b).all()


def test_creation_order_is_irrelevant():
    # build streams in two different orders; each stream's output is identical
    first = {i: substream(9, "agent", i).random(4) for i in range(5)}
    second = {i: substream(9, "agent", i) for i in reversed(range(5))}
    for i in range(5):
        assert (second[i].random(4) == first[i]).all()


def test_rejects_bool_and_empty_path():
    with pytest.raises(TypeError):
        substream(1, True)
    with pytest.raises(ValueError):
        substream(1)
    with pytest.raises(TypeError):
        substream(True, "x")
    with pytest.raises(TypeError):
        substream(1, 2.5)


def test_is_philox_generator():
    gen = substream(5, "kind-check")
    assert isinstance(gen, np.random.Generator)
    assert type(gen.bit_generator).__name__ == "Philox"
