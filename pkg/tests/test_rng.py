import numpy as np

from imbaml import Rng


def test_equal_seeds_give_equal_streams():
    a = Rng(123456789).np.random(10_000)
    b = Rng(123456789).np.random(10_000)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    assert not np.array_equal(Rng(1).np.random(100), Rng(2).np.random(100))


def test_children_are_stable_and_independent_of_draws():
    parent = Rng(42)
    first = parent.child(3).seed
    parent.np.random(100)  # advancing the parent must not move child seeds
    assert parent.child(3).seed == first
    assert parent.child(2).seed != first


def test_sibling_streams_do_not_collide():
    parent = Rng(7)
    seeds = {parent.child(i).seed for i in range(1000)}
    assert len(seeds) == 1000
