import numpy as np
import pytest

from qsglab.model import (
    ModelSpec,
    TermSpec,
    preset_classical_ising,
    preset_random_bond_heisenberg,
    preset_random_field_heisenberg,
)
from qsglab.spin_algebra import LatticeGeometry, build_range_family, build_spin_rep


def random_hermitian(rng, dim, scale=1.0, real=False):
    A = rng.standard_normal((dim, dim))
    if not real:
        A = A + 1j * rng.standard_normal((dim, dim))
    H = (A + A.conj().T) / 2
    return scale * H / max(1.0, np.linalg.norm(H, 2))


def chain(L, boundary="open"):
    return LatticeGeometry(1, L, boundary)


def rf_chain(L, boundary="open", **kw):
    return preset_random_field_heisenberg(chain(L, boundary), **kw)


def rb_chain(L, boundary="open", **kw):
    return preset_random_bond_heisenberg(chain(L, boundary), **kw)


def ising_chain(L, boundary="open", **kw):
    return preset_classical_ising(chain(L, boundary), **kw)


def field_only(N, J1=1.0, J0=0.0, axis=3, spin=0.5):
    """Independent spins in a random field: the simplest disordered model."""
    lat = chain(N)
    return ModelSpec(build_spin_rep(spin), lat,
                     (TermSpec("field", build_range_family(lat, "sites"), axis, J0=J0, J1=J1),),
                     sign=-1, name="field_only")


def transverse_rf(N, J1=0.5, Gamma=0.7, J=1.0):
    """Random z-field, uniform transverse field and z-z bonds; noncommuting terms."""
    lat = chain(N)
    rep = build_spin_rep(0.5)
    sites = build_range_family(lat, "sites")
    terms = [TermSpec("field", sites, 3, J1=J1), TermSpec("transverse", sites, 1, J0=Gamma)]
    if N > 1:
        terms.append(TermSpec("zz", build_range_family(lat, "nearest_neighbor_bonds"), 3, J0=J))
    return ModelSpec(rep, lat, tuple(terms), sign=-1, name="transverse_rf")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.REPORT:
            terminalreporter.write_line(line)
