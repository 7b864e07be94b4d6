"""Disordered spin Hamiltonians, named presets, and the replica-coupled Hamiltonian.

A model is a list of terms ``sum_X (J1 g_X + J0) S_X^{i}`` over a range family,
multiplied by a global sign.  Terms with ``J1 == 0`` consume no Gaussian draw.
Terms in one ``share_group`` read the same draw ``g_X`` for the same range X.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .spin_algebra import (
    MAX_DIM,
    LatticeGeometry,
    RangeFamily,
    SpinRep,
    build_range_family,
    build_spin_rep,
    check_capacity,
    embed_in_replica,
    hilbert_dim,
    range_product_operator,
)


@dataclass(frozen=True)
class TermSpec:
    label: str
    family: RangeFamily
    axis: int
    J0: float = 0.0
    J1: float = 0.0
    share_group: str | None = None

    def __post_init__(self):
        if self.axis not in (1, 2, 3):
            raise ValueError(f"term {self.label!r}: axis must be 1, 2 or 3")

    @property
    def draw_group(self) -> str:
        return self.share_group if self.share_group is not None else self.label

    @property
    def disordered(self) -> bool:
        return self.J1 != 0


@dataclass(frozen=True)
class ModelSpec:
    rep: SpinRep
    lattice: LatticeGeometry
    terms: tuple[TermSpec, ...]
    sign: int = 1
    site_scale: float = 1.0
    name: str = "custom"
    max_dim: int = MAX_DIM
    _cache: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"term labels must be unique, got {labels}")
        groups: dict[str, RangeFamily] = {}
        for t in self.terms:
            if any(x >= self.lattice.volume for X in t.family for x in X):
                raise ValueError(f"term {t.label!r} has ranges outside the lattice")
            if t.share_group is not None:
                ref = groups.setdefault(t.share_group, t.family)
                if ref.ranges != t.family.ranges:
                    raise ValueError(f"share group {t.share_group!r} mixes different range families")
        check_capacity(self.dim, self.max_dim)

    @property
    def volume(self) -> int:
        return self.lattice.volume

    @property
    def dim(self) -> int:
        return hilbert_dim(self.rep, self.lattice.volume)

    def term(self, label: str) -> TermSpec:
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(f"unknown term label {label!r}; model has {[t.label for t in self.terms]}")

    def operator_bound(self, label: str) -> float:
        """Sup-norm ``K^a = (scale * S)^{n_a}`` of every ``S_X`` of a term."""
        t = self.term(label)
        return float((self.site_scale * self.rep.S) ** t.family.arity)

    def disorder_keys(self) -> tuple[tuple[str, int], ...]:
        """One key ``(draw group, range index)`` per independent Gaussian coupling."""
        keys: dict[tuple[str, int], None] = {}
        for t in self.terms:
            if t.disordered:
                for k in range(len(t.family)):
                    keys.setdefault((t.draw_group, k), None)
        return tuple(keys)

    @property
    def n_couplings(self) -> int:
        return len(self.disorder_keys())

    def range_operators(self, label: str) -> np.ndarray:
        """Stack of ``S_X^{i(a)}`` for every X of the term, shape (|C|, dim, dim)."""
        if label not in self._cache:
            t = self.term(label)
            ops = [range_product_operator(self.rep, self.lattice, X, t.axis, self.site_scale,
                                          self.max_dim) for X in t.family]
            stack = np.array(ops)
            stack.setflags(write=False)
            self._cache[label] = stack
        return self._cache[label]

    def affine_parts(self) -> tuple[np.ndarray, tuple[tuple[str, int], ...], np.ndarray]:
        """``H(g) = H0 + sum_k g_k B_k`` with keys ordered as :meth:`disorder_keys`."""
        if "_affine" not in self._cache:
            keys = self.disorder_keys()
            index = {k: i for i, k in enumerate(keys)}
            ops = [self.range_operators(t.label) for t in self.terms]
            dtype = np.result_type(float, *ops)
            H0 = np.zeros((self.dim, self.dim), dtype=dtype)
            B = np.zeros((len(keys), self.dim, self.dim), dtype=dtype)
            for t, stack in zip(self.terms, ops):
                if t.J0 != 0:
                    H0 += self.sign * t.J0 * stack.sum(axis=0)
                if t.disordered:
                    for k, S_X in enumerate(stack):
                        B[index[(t.draw_group, k)]] += self.sign * t.J1 * S_X
            H0.setflags(write=False)
            B.setflags(write=False)
            self._cache["_affine"] = (H0, keys, B)
        return self._cache["_affine"]


@dataclass(frozen=True)
class DisorderSample:
    """Gaussian draws keyed by ``(draw group, range index)``."""

    keys: tuple[tuple[str, int], ...]
    values: np.ndarray
    seed: object = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != len(self.keys):
            raise ValueError(f"{len(values)} values for {len(self.keys)} disorder keys")
        object.__setattr__(self, "keys", tuple(self.keys))
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict:
        return dict(zip(self.keys, self.values))

    def vector_for(self, keys) -> np.ndarray:
        """Draws reordered to ``keys``; raises on any missing key."""
        lookup = self.as_dict()
        missing = [k for k in keys if k not in lookup]
        if missing:
            raise ValueError(f"disorder sample lacks draws for {missing[:3]}"
                             f"{' ...' if len(missing) > 3 else ''}")
        return np.array([lookup[k] for k in keys], dtype=float)


def assemble_hamiltonian(model: ModelSpec, sample: DisorderSample | None = None) -> np.ndarray:
    """``sign * sum_a sum_X (J1^a g_X^a + J0^a) S_X^{i(a)}`` as a dense matrix."""
    H0, keys, B = model.affine_parts()
    if not keys:
        return H0.copy()
    if sample is None:
        raise ValueError(f"model {model.name!r} has {len(keys)} disordered couplings but no sample")
    g = sample.vector_for(keys)
    return H0 + np.tensordot(g, B, axes=1)


# --- presets -----------------------------------------------------------------

def preset_random_field_heisenberg(lattice: LatticeGeometry, J1_field: float = 1.0,
                                   J0_exchange: float = 1.0, spin: float = 0.5,
                                   max_dim: int = MAX_DIM) -> ModelSpec:
    """Heisenberg exchange on nearest-neighbour bonds plus a Gaussian z-field.

    ``H = -J1 sum_x g_x S_x^3 - J0 sum_<xy> sum_i S_x^i S_y^i``.  For L = 1
    there are no bonds and only the field term is kept.
    """
    rep = build_spin_rep(spin)
    terms = [TermSpec("field", build_range_family(lattice, "sites"), 3, J0=0.0, J1=J1_field)]
    if lattice.L > 1:
        bonds = build_range_family(lattice, "nearest_neighbor_bonds")
        terms += [TermSpec(f"exchange_{i}", bonds, i, J0=J0_exchange, J1=0.0) for i in (1, 2, 3)]
    return ModelSpec(rep, lattice, tuple(terms), sign=-1, name="random_field_heisenberg",
                     max_dim=max_dim)


def preset_random_bond_heisenberg(lattice: LatticeGeometry, J1=(1.0, 1.0, 1.0),
                                  J0=(0.0, 0.0, 0.0), su2_shared: bool = False,
                                  spin: float = 0.5, max_dim: int = MAX_DIM) -> ModelSpec:
    """``H = -sum_X sum_i (J1^i g_X^i + J0^i) S_X^i`` on nearest-neighbour bonds."""
    J1 = _per_axis(J1, "J1")
    J0 = _per_axis(J0, "J0")
    if su2_shared and (len(set(J1)) > 1 or len(set(J0)) > 1):
        raise ValueError("su2_shared requires equal couplings on all three axes")
    rep = build_spin_rep(spin)
    bonds = build_range_family(lattice, "nearest_neighbor_bonds")
    group = "bond" if su2_shared else None
    terms = tuple(TermSpec(f"bond_{i}", bonds, i, J0=J0[i - 1], J1=J1[i - 1], share_group=group)
                  for i in (1, 2, 3))
    return ModelSpec(rep, lattice, terms, sign=-1, name="random_bond_heisenberg", max_dim=max_dim)


def preset_classical_ising(lattice: LatticeGeometry, J1_bond: float = 1.0, J0_bond: float = 0.0,
                           h: float = 0.0, J1_field: float = 0.0,
                           max_dim: int = MAX_DIM) -> ModelSpec:
    """Edwards-Anderson type Ising model: every operator along axis 3, eigenvalues +-1."""
    rep = build_spin_rep(0.5)
    terms = [TermSpec("bond", build_range_family(lattice, "nearest_neighbor_bonds"), 3,
                      J0=J0_bond, J1=J1_bond)]
    if h != 0 or J1_field != 0:
        terms.append(TermSpec("field", build_range_family(lattice, "sites"), 3, J0=h, J1=J1_field))
    return ModelSpec(rep, lattice, tuple(terms), sign=-1, site_scale=2.0, name="classical_ising",
                     max_dim=max_dim)


def _per_axis(value, name):
    if np.ndim(value) == 0:
        return (float(value),) * 3
    value = tuple(float(v) for v in value)
    if len(value) != 3:
        raise ValueError(f"{name} needs one value per axis, got {value}")
    return value


PRESETS = {
    "random_field_heisenberg": preset_random_field_heisenberg,
    "random_bond_heisenberg": preset_random_bond_heisenberg,
    "classical_ising": preset_classical_ising,
}


def is_classical(model: ModelSpec) -> bool:
    """True when every term uses the same spin axis, so all operators commute."""
    return len({t.axis for t in model.terms}) <= 1


# --- replicas ----------------------------------------------------------------

@dataclass(frozen=True)
class ReplicaCouplingSpec:
    """Inter-replica term on the ranges of term ``c`` between replicas 1 and 2.

    ``share_with_c`` makes ``g^0_X`` the same draw as ``g^c_X``; by default the
    inter-replica disorder is an independent Gaussian family.
    """

    c: str
    J0: float = 0.0
    J1: float = 0.0
    n_replicas: int = 2
    share_with_c: bool = False

    def __post_init__(self):
        if self.n_replicas < 2:
            raise ValueError("the inter-replica coupling needs at least 2 replicas")

    def disorder_keys(self, model: ModelSpec) -> tuple[tuple[str, int], ...]:
        if self.J1 == 0 or self.share_with_c:
            return ()
        return tuple(("g0", k) for k in range(len(model.term(self.c).family)))


def interreplica_operators(model: ModelSpec, c: str, n_replicas: int) -> list[np.ndarray]:
    """``O^0_X = S_X^{i(c),1} S_X^{i(c),2}`` on the n-replica space, one per X in C^c."""
    return [embed_in_replica(S_X, 0, n_replicas) @ embed_in_replica(S_X, 1, n_replicas)
            for S_X in model.range_operators(c)]


def assemble_replicated_hamiltonian(model: ModelSpec, sample: DisorderSample | None,
                                    coupling: ReplicaCouplingSpec,
                                    sample0: DisorderSample | None = None) -> np.ndarray:
    """``sum_alpha H(S^alpha, g) + sign * sum_X (J1^0 g^0_X + J0^0) S_X^{1} S_X^{2}``."""
    n = coupling.n_replicas
    check_capacity(model.dim ** n, model.max_dim)
    H = assemble_hamiltonian(model, sample)
    eye = np.eye(model.dim)
    total = sum(reduce(np.kron, [H if r == alpha else eye for r in range(n)]) for alpha in range(n))

    term_c = model.term(coupling.c)
    if coupling.J1 == 0:
        g0 = np.zeros(len(term_c.family))
    elif coupling.share_with_c:
        if sample is None or not term_c.disordered:
            raise ValueError(f"g^0 shared with term {coupling.c!r}, which has no Gaussian draws")
        g0 = sample.vector_for([(term_c.draw_group, k) for k in range(len(term_c.family))])
    else:
        if sample0 is None:
            raise ValueError("inter-replica coupling J1^0 != 0 needs a g^0 disorder sample")
        g0 = sample0.vector_for(coupling.disorder_keys(model))
    coeffs = coupling.J1 * g0 + coupling.J0
    if np.any(coeffs):
        for coef, O in zip(coeffs, interreplica_operators(model, coupling.c, n)):
            total = total + model.sign * coef * O
    return total


def replica_swap_matrix(single_dim: int, n_replicas: int, a: int, b: int) -> np.ndarray:
    """Permutation matrix exchanging replica factors ``a`` and ``b`` (0-based)."""
    shape = (single_dim,) * n_replicas
    total = single_dim ** n_replicas
    idx = np.arange(total).reshape(shape)
    axes = list(range(n_replicas))
    axes[a], axes[b] = axes[b], axes[a]
    perm = idx.transpose(axes).reshape(-1)
    P = np.zeros((total, total))
    P[np.arange(total), perm] = 1.0
    return P
