import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsglab.errors import CapacityError
from qsglab.spin_algebra import (
    LatticeGeometry,
    build_range_family,
    build_spin_rep,
    check_capacity,
    embed_in_replica,
    embed_site_operator,
    hilbert_dim,
    is_hermitian,
    operator_norm,
    range_product_operator,
)

SPINS = [0.5, 1.0, 1.5, 2.0]


@pytest.mark.parametrize("S", SPINS)
def test_su2_commutators(S):
    rep = build_spin_rep(S)
    s1, s2, s3 = rep[1], rep[2], rep[3]
    for a, b, c in ((s1, s2, s3), (s2, s3, s1), (s3, s1, s2)):
        assert np.allclose(a @ b - b @ a, 1j * c, atol=1e-12)


@pytest.mark.parametrize("S", SPINS)
def test_casimir_and_hermiticity(S):
    rep = build_spin_rep(S)
    cas = sum(rep[i] @ rep[i] for i in (1, 2, 3))
    assert np.allclose(cas, S * (S + 1) * np.eye(rep.dim), atol=1e-12)
    assert all(is_hermitian(rep[i]) for i in (1, 2, 3))
    assert rep.dim == int(2 * S + 1)


def test_spin_half_is_half_pauli():
    rep = build_spin_rep(0.5)
    assert np.allclose(rep[1], [[0, 0.5], [0.5, 0]])
    assert np.allclose(rep[2], [[0, -0.5j], [0.5j, 0]])
    assert np.allclose(rep[3], [[0.5, 0], [0, -0.5]])


@pytest.mark.parametrize("bad", [0, -0.5, 0.3, np.nan])
def test_bad_spin_rejected(bad):
    with pytest.raises(ValueError):
        build_spin_rep(bad)


def test_bad_axis_rejected():
    with pytest.raises(ValueError):
        build_spin_rep(0.5)[0]


def test_site_embedding_order():
    # site 0 is the leftmost Kronecker factor
    lat = LatticeGeometry(1, 2)
    op = embed_site_operator(build_spin_rep(0.5), lat, 0, 3)
    assert np.allclose(np.diag(op), [0.5, 0.5, -0.5, -0.5])
    op = embed_site_operator(build_spin_rep(0.5), lat, 1, 3)
    assert np.allclose(np.diag(op), [0.5, -0.5, 0.5, -0.5])


def test_lattice_indexing():
    lat = LatticeGeometry(2, 3)
    assert lat.volume == 9
    assert [lat.index(c) for c in lat.sites] == list(range(9))
    with pytest.raises(ValueError):
        lat.index((0, 1))
    with pytest.raises(ValueError):
        LatticeGeometry(1, 0)
    with pytest.raises(ValueError):
        LatticeGeometry(1, 3, "twisted")


def test_range_family_counts():
    # counts on small lattices, worked out by hand
    assert len(build_range_family(LatticeGeometry(1, 5), "nearest_neighbor_bonds")) == 4
    assert len(build_range_family(LatticeGeometry(1, 5, "periodic"), "nearest_neighbor_bonds")) == 5
    assert len(build_range_family(LatticeGeometry(1, 2, "periodic"), "nearest_neighbor_bonds")) == 1
    assert len(build_range_family(LatticeGeometry(1, 5), "next_nearest_bonds")) == 3
    assert len(build_range_family(LatticeGeometry(2, 3), "nearest_neighbor_bonds")) == 12
    assert len(build_range_family(LatticeGeometry(2, 3), "plaquettes")) == 4
    assert len(build_range_family(LatticeGeometry(2, 3), "next_nearest_bonds")) == 8
    assert len(build_range_family(LatticeGeometry(2, 3, "periodic"), "plaquettes")) == 9
    fam = build_range_family(LatticeGeometry(1, 3), "sites")
    assert fam.ranges == ((0,), (1,), (2,)) and fam.arity == 1


def test_range_family_rejections():
    with pytest.raises(ValueError):
        build_range_family(LatticeGeometry(1, 4), "plaquettes")
    with pytest.raises(ValueError):
        build_range_family(LatticeGeometry(1, 1), "nearest_neighbor_bonds")
    with pytest.raises(ValueError):
        build_range_family(LatticeGeometry(1, 4), "triangles")


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 3), L=st.integers(2, 4),
       pattern=st.sampled_from(["sites", "nearest_neighbor_bonds", "plaquettes"]),
       boundary=st.sampled_from(["open", "periodic"]))
def test_range_family_properties(d, L, pattern, boundary):
    if pattern == "plaquettes" and d < 2:
        return
    lat = LatticeGeometry(d, L, boundary)
    fam = build_range_family(lat, pattern)
    assert len(set(fam.ranges)) == len(fam.ranges)
    assert all(len(X) == fam.arity and list(X) == sorted(set(X)) for X in fam)
    assert all(0 <= x < lat.volume for X in fam for x in X)
    if pattern == "nearest_neighbor_bonds":
        per_site = d * L ** d - (0 if boundary == "periodic" else d * L ** (d - 1))
        if boundary == "periodic" and L == 2:
            per_site = d * L ** d // 2
        assert len(fam) == per_site


@pytest.mark.parametrize("S", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("arity_pattern,d,L", [("sites", 1, 3), ("nearest_neighbor_bonds", 1, 3),
                                                ("plaquettes", 2, 2)])
def test_range_operator_norm(S, arity_pattern, d, L):
    rep = build_spin_rep(S)
    lat = LatticeGeometry(d, L)
    if rep.dim ** lat.volume > 256:
        pytest.skip("above the fast-test size")
    fam = build_range_family(lat, arity_pattern)
    for axis in (1, 2, 3):
        op = range_product_operator(rep, lat, fam.ranges[0], axis)
        assert is_hermitian(op)
        assert abs(operator_norm(op) - S ** fam.arity) < 1e-10


def test_range_operator_rejections():
    rep = build_spin_rep(0.5)
    lat = LatticeGeometry(1, 3)
    for X in ((), (0, 0), (3,)):
        with pytest.raises(ValueError):
            range_product_operator(rep, lat, X, 3)


def test_capacity():
    rep = build_spin_rep(0.5)
    assert hilbert_dim(rep, 4, 2) == 256
    check_capacity(4096)
    with pytest.raises(CapacityError):
        check_capacity(4097)
    with pytest.raises(CapacityError):
        embed_site_operator(rep, LatticeGeometry(1, 13), 0, 3)


def test_embed_in_replica():
    rep = build_spin_rep(0.5)
    op = embed_in_replica(rep[3], 1, 2)
    assert np.allclose(op, np.kron(np.eye(2), rep[3]))
    with pytest.raises(ValueError):
        embed_in_replica(rep[3], 2, 2)


def test_distinct_sites_commute():
    rep = build_spin_rep(1.0)
    lat = LatticeGeometry(1, 3)
    A = embed_site_operator(rep, lat, 0, 1)
    B = embed_site_operator(rep, lat, 2, 2)
    assert np.allclose(A @ B, B @ A)
