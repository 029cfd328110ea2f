import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from svrpg_lab.rng import Streams, as_streams

paths = st.lists(st.integers(0, 2 ** 20), max_size=4).map(tuple)


@given(seed=st.integers(0, 2 ** 31), path=paths)
def test_streams_are_pure_functions_of_path(seed, path):
    a = Streams(seed, path).generator().standard_normal(4)
    b = Streams(seed, path).generator().standard_normal(4)
    assert np.array_equal(a, b)


def test_children_differ():
    root = Streams(1)
    draws = {tuple(root.child(k).generator().integers(0, 2 ** 62, 2)) for k in range(50)}
    assert len(draws) == 50
    assert not np.array_equal(Streams(1).generator().random(3), Streams(2).generator().random(3))


def test_indexed_matches_trajectory_generators():
    s = Streams(4, (1, 7))
    gens = s.trajectory_generators(5)
    for i in (0, 3, 4):
        assert np.array_equal(gens[i].random(3), s.indexed(i).random(3))


def test_equality_and_coercion():
    assert Streams(2, (1,)) == Streams(2).child(1)
    assert hash(Streams(2, (1,))) == hash(Streams(2).child(1))
    assert as_streams(5) == Streams(5)
