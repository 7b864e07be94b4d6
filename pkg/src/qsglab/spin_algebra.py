"""Spin matrices, lattices, interaction-range families and embedded operators.

Basis conventions
-----------------
The local basis of a spin-S site is ordered by decreasing magnetic quantum
number, ``|S>, |S-1>, ..., |-S>``, so ``S^3 = diag(S, ..., -S)``.  Sites are
enumerated lexicographically over ``[1, L]^d`` and the many-site space is the
Kronecker product with site 0 as the leftmost (most significant) factor.
Replicated spaces put replica 0 leftmost in the same way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import CapacityError

MAX_DIM = 4096

PATTERNS = ("sites", "nearest_neighbor_bonds", "next_nearest_bonds", "plaquettes")
BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class SpinRep:
    S: float
    matrices: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    def __getitem__(self, axis: int) -> np.ndarray:
        """Spin matrix for axis 1, 2 or 3."""
        if axis not in (1, 2, 3):
            raise ValueError(f"axis must be 1, 2 or 3, got {axis!r}")
        return self.matrices[axis - 1]


def build_spin_rep(S: float) -> SpinRep:
    """Standard (2S+1)-dimensional irreducible representation of su(2)."""
    twice = 2 * float(S)
    if not np.isfinite(twice) or abs(twice - round(twice)) > 1e-12 or round(twice) < 1:
        raise ValueError(f"spin magnitude must be a positive half-integer, got {S!r}")
    S = round(twice) / 2
    m = S - np.arange(round(twice) + 1)
    # S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>; |m+1> sits one row above |m>
    raise_amp = np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(raise_amp, 1).astype(complex)
    sminus = splus.conj().T
    s1 = (splus + sminus) / 2
    s2 = (splus - sminus) / 2j
    s3 = np.diag(m).astype(complex)
    for mat in (s1, s2, s3):
        mat.setflags(write=False)
    return SpinRep(S=S, matrices=(s1, s2, s3))


@dataclass(frozen=True)
class LatticeGeometry:
    d: int
    L: int
    boundary: str = "open"
    sites: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"lattice dimension must be a positive integer, got {self.d!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"linear size must be a positive integer, got {self.L!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        sites = tuple(itertools.product(range(1, self.L + 1), repeat=self.d))
        object.__setattr__(self, "sites", sites)

    @property
    def volume(self) -> int:
        return len(self.sites)

    def index(self, coord) -> int:
        coord = tuple(int(c) for c in coord)
        if len(coord) != self.d or any(not 1 <= c <= self.L for c in coord):
            raise ValueError(f"{coord} is not a site of the lattice [1,{self.L}]^{self.d}")
        idx = 0
        for c in coord:
            idx = idx * self.L + (c - 1)
        return idx


@dataclass(frozen=True)
class RangeFamily:
    """Interaction ranges of one term: tuples of site indices, all of one arity."""

    pattern: str
    ranges: tuple[tuple[int, ...], ...]

    @property
    def arity(self) -> int:
        return len(self.ranges[0])

    def __len__(self):
        return len(self.ranges)

    def __iter__(self):
        return iter(self.ranges)


def _unit(d, k):
    e = [0] * d
    e[k] = 1
    return tuple(e)


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _shapes(pattern: str, d: int) -> list[list[tuple[int, ...]]]:
    zero = (0,) * d
    if pattern == "sites":
        return [[zero]]
    if pattern == "nearest_neighbor_bonds":
        return [[zero, _unit(d, k)] for k in range(d)]
    if pattern == "next_nearest_bonds":
        if d == 1:
            return [[zero, (2,)]]
        shapes = []
        for i, j in itertools.combinations(range(d), 2):
            shapes.append([zero, _add(_unit(d, i), _unit(d, j))])
            shapes.append([_unit(d, i), _unit(d, j)])
        return shapes
    if pattern == "plaquettes":
        shapes = []
        for i, j in itertools.combinations(range(d), 2):
            ei, ej = _unit(d, i), _unit(d, j)
            shapes.append([zero, ei, ej, _add(ei, ej)])
        return shapes
    raise ValueError(f"unknown range pattern {pattern!r}; expected one of {PATTERNS}")


def build_range_family(lattice: LatticeGeometry, pattern: str) -> RangeFamily:
    """All lattice translates of the reference shape(s) for ``pattern``.

    Ordering is deterministic: base site in lattice order, then shape order.
    Periodic wrap-arounds that coincide with an existing range are dropped.
    """
    d, L = lattice.d, lattice.L
    min_L = {"sites": 1, "nearest_neighbor_bonds": 2, "next_nearest_bonds": 3 if d == 1 else 2,
             "plaquettes": 2}
    if pattern not in min_L:
        raise ValueError(f"unknown range pattern {pattern!r}; expected one of {PATTERNS}")
    if pattern == "plaquettes" and d < 2:
        raise ValueError("plaquettes need a lattice of dimension >= 2")
    if L < min_L[pattern]:
        raise ValueError(f"L={L} is too small for pattern {pattern!r} (need L >= {min_L[pattern]})")

    periodic = lattice.boundary == "periodic"
    seen: dict[tuple[int, ...], None] = {}
    for base in lattice.sites:
        for shape in _shapes(pattern, d):
            coords = []
            for offset in shape:
                c = _add(base, offset)
                if periodic:
                    c = tuple((x - 1) % L + 1 for x in c)
                elif any(x > L for x in c):
                    break
                coords.append(c)
            else:
                X = tuple(sorted(lattice.index(c) for c in coords))
                if len(set(X)) == len(X):
                    seen.setdefault(X, None)
    return RangeFamily(pattern=pattern, ranges=tuple(seen))


def hilbert_dim(rep: SpinRep, n_sites: int, n_replicas: int = 1) -> int:
    return rep.dim ** (n_sites * n_replicas)


def check_capacity(dim: int, max_dim: int = MAX_DIM) -> None:
    if dim > max_dim:
        raise CapacityError(
            f"Hilbert dimension {dim} exceeds the dense limit {max_dim}; "
            "use a smaller L or raise max_dim"
        )


def _as_real_if_possible(M: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(M) and not np.any(M.imag):
        return M.real.copy()
    return M


def product_on_sites(local: dict[int, np.ndarray], n_sites: int, local_dim: int) -> np.ndarray:
    """Kronecker product with ``local[x]`` on site x and identity elsewhere."""
    eye = np.eye(local_dim)
    factors = [local.get(x, eye) for x in range(n_sites)]
    return _as_real_if_possible(reduce(np.kron, factors))


def embed_site_operator(rep: SpinRep, lattice: LatticeGeometry, site: int, axis: int,
                        max_dim: int = MAX_DIM) -> np.ndarray:
    """``S_x^i`` on the full lattice Hilbert space."""
    if not 0 <= site < lattice.volume:
        raise ValueError(f"site index {site} out of range for {lattice.volume} sites")
    check_capacity(hilbert_dim(rep, lattice.volume), max_dim)
    return product_on_sites({site: rep[axis]}, lattice.volume, rep.dim)


def range_product_operator(rep: SpinRep, lattice: LatticeGeometry, X, axis: int,
                           scale: float = 1.0, max_dim: int = MAX_DIM) -> np.ndarray:
    """``S_X^i = prod_{x in X} S_x^i``; ``scale`` multiplies every site factor."""
    X = tuple(X)
    if not X:
        raise ValueError("interaction range must be nonempty")
    if len(set(X)) != len(X):
        raise ValueError(f"interaction range {X} repeats a site")
    for x in X:
        if not 0 <= x < lattice.volume:
            raise ValueError(f"site index {x} out of range for {lattice.volume} sites")
    check_capacity(hilbert_dim(rep, lattice.volume), max_dim)
    local = {x: scale * rep[axis] for x in X}
    return product_on_sites(local, lattice.volume, rep.dim)


def embed_in_replica(op: np.ndarray, replica: int, n_replicas: int) -> np.ndarray:
    """Place a single-copy operator on replica ``replica`` (0-based) of ``n_replicas``."""
    if not 0 <= replica < n_replicas:
        raise ValueError(f"replica {replica} out of range for {n_replicas} replicas")
    eye = np.eye(op.shape[0])
    factors = [op if r == replica else eye for r in range(n_replicas)]
    return reduce(np.kron, factors)


def is_hermitian(M: np.ndarray, tol: float = 1e-12) -> bool:
    return M.ndim == 2 and M.shape[0] == M.shape[1] and np.max(np.abs(M - M.conj().T), initial=0.0) <= tol


def operator_norm(M: np.ndarray) -> float:
    """Spectral norm of a Hermitian matrix, by eigensolve."""
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))
