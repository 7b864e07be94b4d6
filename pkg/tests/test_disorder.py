import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsglab.disorder import (
    DEFAULT_SEED,
    SeedSpec,
    gauss_hermite_expectation,
    jackknife,
    make_grid,
    map_samples,
    mc_expectation,
    sample_disorder,
)

from conftest import rb_chain, rf_chain


def _square_sum(seed):
    g = seed.generator().standard_normal(3)
    return float(g @ g)


def _poly(g):
    return g[0] ** 4 + g[0] ** 2 * g[1] ** 2 - 2 * g[1] + g[0] * g[1] ** 3


def test_seed_streams_reproducible_and_distinct():
    a = SeedSpec(7, 3).generator().standard_normal(5)
    b = SeedSpec(7, 3).generator().standard_normal(5)
    c = SeedSpec(7, 4).generator().standard_normal(5)
    d = SeedSpec(8, 3).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)


def test_extra_keys_do_not_move_model_draws():
    model = rf_chain(3)
    plain = sample_disorder(model, SeedSpec(1, 2))
    extended = sample_disorder(model, SeedSpec(1, 2), extra_keys=(("g0", 0), ("g0", 1)))
    assert np.array_equal(plain.values, extended.values[:3])
    assert extended.keys[3:] == (("g0", 0), ("g0", 1))


@pytest.mark.parametrize("order,dims", [(1, 1), (5, 2), (7, 3)])
def test_grid_weights(order, dims):
    grid = make_grid(order, dims)
    assert len(grid) == order ** dims
    assert abs(grid.weights.sum() - 1) < 1e-13
    assert grid.nodes.shape == (order ** dims, dims)


def test_grid_exact_on_polynomials():
    # E g^4 = 3, E g1^2 g2^2 = 1, odd moments vanish
    grid = make_grid(3, 2)
    assert abs(gauss_hermite_expectation(_poly, grid) - 4.0) < 1e-12
    assert abs(gauss_hermite_expectation(lambda g: g[0] ** 6, make_grid(4, 1)) - 15.0) < 1e-11


def test_grid_zero_dims_and_caps():
    grid = make_grid(5, 0)
    assert len(grid) == 1 and grid.nodes.shape == (1, 0)
    with pytest.raises(ValueError):
        make_grid(0, 1)
    with pytest.raises(ValueError):
        make_grid(3, 5)


def test_grid_matches_mc_for_smooth_functional():
    grid = make_grid(20, 1)
    exact = gauss_hermite_expectation(lambda g: np.cos(g[0]), grid)
    assert abs(exact - np.exp(-0.5)) < 1e-13


def test_mc_parallel_bitwise_identical():
    serial = map_samples(_square_sum, 40, DEFAULT_SEED, jobs=1)
    parallel = map_samples(_square_sum, 40, DEFAULT_SEED, jobs=2)
    assert serial.tobytes() == parallel.tobytes()


def test_mc_expectation():
    res = mc_expectation(_square_sum, 4000, 11)
    assert res.n_samples == 4000 and res.master_seed == 11
    assert abs(res.mean - 3.0) < 5 * res.stderr
    with pytest.raises(ValueError):
        mc_expectation(_square_sum, 1)


def test_jackknife_linear_is_standard_error(rng):
    x = rng.standard_normal((50, 1))
    est, err = jackknife(x, lambda e: e[:, 0])
    assert abs(est - x.mean()) < 1e-14
    assert abs(err - x[:, 0].std(ddof=1) / np.sqrt(50)) < 1e-14
    with pytest.raises(ValueError):
        jackknife(x[:1], lambda e: e[:, 0])


def test_jackknife_variance_estimator(rng):
    x = rng.standard_normal(2000) * 2.0
    cols = np.column_stack([x, x * x])
    est, err = jackknife(cols, lambda e: e[:, 1] - e[:, 0] ** 2)
    assert abs(est - x.var()) < 1e-10
    assert abs(est - 4.0) < 5 * err


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 63), index=st.integers(0, 10 ** 6))
def test_sample_keys_follow_model(seed, index):
    model = rb_chain(3, su2_shared=True)
    sample = sample_disorder(model, SeedSpec(seed, index))
    assert sample.keys == model.disorder_keys()
    assert np.all(np.isfinite(sample.values))
