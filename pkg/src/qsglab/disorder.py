"""Gaussian disorder: seeded draws, Gauss-Hermite grids, Monte Carlo estimators."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DisorderSample, ModelSpec

MAX_QUADRATURE_DIMS = 4
DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    sample_index: int

    def generator(self) -> np.random.Generator:
        """Philox stream keyed by ``(master_seed, sample_index)``.

        Each sample owns its stream, so results do not depend on how samples
        are scheduled across workers.
        """
        seq = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(int(self.sample_index),))
        return np.random.Generator(np.random.Philox(seq))


def sample_disorder(model: ModelSpec, seed: SeedSpec, extra_keys=()) -> DisorderSample:
    """One standard-normal draw per independent coupling, then one per extra key.

    Extra keys (for example inter-replica draws) come after the model's own,
    so adding them never changes the model draws of a given seed.
    """
    keys = model.disorder_keys() + tuple(extra_keys)
    values = seed.generator().standard_normal(len(keys))
    return DisorderSample(keys, values, seed)


@dataclass(frozen=True)
class QuadratureGrid:
    order: int
    dims: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)


def make_grid(order: int, dims: int, max_dims: int = MAX_QUADRATURE_DIMS) -> QuadratureGrid:
    """Tensor-product Gauss-Hermite grid for the standard normal measure.

    Exact for polynomials of degree <= 2*order - 1 in each coordinate.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    if dims < 0:
        raise ValueError("quadrature dimension must be non-negative")
    if dims > max_dims:
        raise ValueError(f"{dims} Gaussian couplings exceed the quadrature cap of {max_dims}; "
                         "use Monte Carlo instead")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / w.sum()
    if dims == 0:
        return QuadratureGrid(order, 0, np.zeros((1, 0)), np.ones(1))
    nodes = np.array(list(itertools.product(x, repeat=dims)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dims))), axis=1)
    return QuadratureGrid(order, dims, nodes, weights)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    items = list(items)
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def gauss_hermite_expectation(functional: Callable[[np.ndarray], float], grid: QuadratureGrid,
                              jobs: int = 1):
    """``E[functional(g)]`` for ``g ~ N(0, I_dims)`` on a tensor grid.

    ``functional`` may return a scalar or an array; the reduction is an
    ordered weighted sum, independent of ``jobs``.
    """
    values = np.asarray(_map(functional, list(grid.nodes), jobs))
    return np.tensordot(grid.weights, values, axes=1)


@dataclass(frozen=True)
class EstimatorResult:
    mean: float | np.ndarray
    stderr: float | np.ndarray
    n_samples: int
    master_seed: int


def map_samples(functional: Callable[[SeedSpec], object], n_samples: int, master_seed: int,
                jobs: int = 1) -> np.ndarray:
    """Per-sample values, stacked in sample-index order."""
    seeds = [SeedSpec(master_seed, i) for i in range(n_samples)]
    return np.asarray(_map(functional, seeds, jobs))


def mc_expectation(functional: Callable[[SeedSpec], object], n_samples: int,
                   master_seed: int = DEFAULT_SEED, jobs: int = 1) -> EstimatorResult:
    if n_samples < 2:
        raise ValueError("Monte Carlo estimation needs at least 2 samples for a standard error")
    values = map_samples(functional, n_samples, master_seed, jobs)
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return EstimatorResult(mean, stderr, n_samples, master_seed)


def jackknife(values: np.ndarray, estimator: Callable[[np.ndarray], np.ndarray]):
    """Delete-one jackknife for a smooth function of sample means.

    ``values`` has shape (n, k); ``estimator`` maps an (m, k) array of mean
    vectors to m estimates.  Returns (estimate on the full mean, stderr).
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        raise ValueError("jackknife needs at least 2 samples")
    total = values.sum(axis=0)
    full = estimator(values.mean(axis=0)[None, :])[0]
    loo = (total[None, :] - values) / (n - 1)
    theta = estimator(loo)
    stderr = np.sqrt((n - 1) / n * np.sum((theta - theta.mean(axis=0)) ** 2, axis=0))
    return full, stderr
