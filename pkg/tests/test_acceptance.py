"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test appends a ``PASS``/``FAIL`` line to ``REPORT``; conftest prints
them at the end of the run.  Run alone with ``pytest tests/test_acceptance.py``.
"""

import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.special import logsumexp

from qsglab.config import parse_config
from qsglab.disorder import SeedSpec, make_grid, sample_disorder
from qsglab.experiments import RUNNERS, run_classical_identity, run_rsb_sweep, run_variance_scaling
from qsglab.model import assemble_hamiltonian
from qsglab.replica import ONE, R, ReplicaEvaluator, TensorReplicaSystem, gg_bracket
from qsglab.results import to_csv
from qsglab.spectral import diagonalize, duhamel_bracket, gibbs_expectation, harris_terms
from qsglab.spin_algebra import (
    MAX_DIM,
    LatticeGeometry,
    build_range_family,
    build_spin_rep,
    embed_site_operator,
    operator_norm,
    range_product_operator,
)

from conftest import field_only, ising_chain, random_hermitian, rb_chain, rf_chain, transverse_rf

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
REPORT: list[str] = []


def report(number, name, ok, detail):
    REPORT.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} ({detail})")
    assert ok, detail


# --- 1 -------------------------------------------------------------------------

def test_criterion_1_spin_algebra():
    worst = 0.0
    cases = {0.5: [(1, 10), (2, 3)], 1.0: [(1, 6), (2, 2)], 1.5: [(1, 5), (2, 2)]}
    for S, lattices in cases.items():
        rep = build_spin_rep(S)
        for d, L in lattices:
            lat = LatticeGeometry(d, L)
            x = lat.volume // 2
            s1, s2, s3 = (embed_site_operator(rep, lat, x, i) for i in (1, 2, 3))
            worst = max(worst, np.max(np.abs(s1 @ s2 - s2 @ s1 - 1j * s3)))
            cas = s1 @ s1 + s2 @ s2 + s3 @ s3
            worst = max(worst, np.max(np.abs(cas - S * (S + 1) * np.eye(len(cas)))))
            patterns = ["sites", "nearest_neighbor_bonds"] + (["plaquettes"] if d == 2 else [])
            for pattern in patterns:
                fam = build_range_family(lat, pattern)
                for axis in (1, 2, 3):
                    op = range_product_operator(rep, lat, fam.ranges[-1], axis)
                    worst = max(worst, abs(operator_norm(op) - S ** fam.arity))
    # at the dimension cap: S^3 is diagonal, so its norm is its largest entry
    lat = LatticeGeometry(1, 12)
    big = embed_site_operator(build_spin_rep(0.5), lat, 5, 3)
    assert big.shape == (MAX_DIM, MAX_DIM)
    worst = max(worst, abs(np.max(np.abs(np.diag(big))) - 0.5),
                float(np.max(np.abs(big - np.diag(np.diag(big))))))
    report(1, "spin algebra exactness", worst <= 1e-10, f"max deviation {worst:.2e} <= 1e-10")


# --- 2 -------------------------------------------------------------------------

def _log_z(H, beta):
    return logsumexp(-beta * np.linalg.eigvalsh(H))


def duhamel_instances(count, rng):
    for k in range(count):
        if k % 5 == 4:
            model = [rf_chain(3), rb_chain(3), transverse_rf(4)][k % 3]
            sample = sample_disorder(model, SeedSpec(77, k))
            H = assemble_hamiltonian(model, sample)
            O = model.range_operators(model.terms[0].label).mean(axis=0)
        else:
            dim = int(rng.integers(2, 65))
            H = random_hermitian(rng, dim, scale=float(rng.uniform(0.5, 3.0)), real=bool(k % 2))
            O = random_hermitian(rng, dim, real=bool(k % 2))
        yield H, O, float(rng.uniform(0.2, 2.5))


def test_criterion_2_duhamel_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-4
    worst, n = 0.0, 0
    for H, O, beta in duhamel_instances(60, rng):
        f = [_log_z(H - x * O, beta) for x in (-h, 0.0, h)]
        d1 = (f[2] - f[0]) / (2 * h)
        d2 = (f[2] - 2 * f[1] + f[0]) / h ** 2
        ctx = diagonalize(H, beta)
        mean = gibbs_expectation(ctx, O)
        exact1 = beta * mean
        exact2 = beta ** 2 * (duhamel_bracket(ctx, O, O) - mean ** 2)
        worst = max(worst, abs(d1 - exact1), abs(d2 - exact2))
        n += 1
    report(2, "Duhamel bracket vs finite differences of log Z",
           n >= 50 and worst <= 1e-6, f"{n} instances, max error {worst:.2e} <= 1e-6")


# --- 3 -------------------------------------------------------------------------

def harris_instances(rng):
    for k in range(160):
        dim = int(rng.integers(2, 33))
        H = random_hermitian(rng, dim, scale=float(rng.uniform(0.5, 5.0)), real=bool(k % 3 == 0))
        yield H, random_hermitian(rng, dim), float(rng.uniform(0.01, 5.0))
    models = [rf_chain(4), rb_chain(3), transverse_rf(4), ising_chain(5)]
    for k in range(60):
        model = models[k % len(models)]
        sample = sample_disorder(model, SeedSpec(33, k))
        H = assemble_hamiltonian(model, sample)
        for t in model.terms[:2]:
            yield H, model.range_operators(t.label).mean(axis=0), float(rng.uniform(0.1, 4.0))


def test_criterion_3_harris_inequality():
    rng = np.random.default_rng(3)
    worst, n = math.inf, 0
    for H, O, beta in harris_instances(rng):
        t = harris_terms(diagonalize(H, beta), O, H)
        worst = min(worst, t.middle - t.lower, t.upper - t.middle)
        n += 1
    report(3, "Harris ordering lower <= middle <= upper",
           n >= 200 and worst >= -1e-10, f"{n} instances, min slack {worst:.2e} >= -1e-10")


# --- 4 -------------------------------------------------------------------------

def test_criterion_4_factorized_vs_tensor():
    cases = [
        (rf_chain(4), [R("field", 1, 2), R("field", 1, 2) * R("field", 1, 2),
                       R("field", 1, 2) * R("exchange_3", 1, 2)], "field"),
        (rb_chain(3), [R("bond_1", 1, 2), R("bond_2", 1, 2) * R("bond_3", 1, 2)], "bond_2"),
        (transverse_rf(4), [R("field", 1, 2), R("zz", 1, 2) * R("transverse", 1, 2)], "field"),
    ]
    worst, samples = 0.0, 0
    for model, monomials, term in cases:
        for i in range(8):
            sample = sample_disorder(model, SeedSpec(44, i))
            beta = 0.5 + 0.25 * (i % 4)
            ev = ReplicaEvaluator.from_sample(model, sample, beta)
            system = TensorReplicaSystem(model, sample, 2, beta)
            for f in monomials:
                worst = max(worst, abs(ev.expectation(f) - system.expectation(system.monomial_operator(f))))
            for f, alpha in itertools.product((ONE, R(term, 1, 2)), (1, 2)):
                worst = max(worst, abs(ev.cross_bracket(term, alpha, f, 2) - system.cross_bracket(term, alpha, f)))
            samples += 1
    report(4, "factorized vs tensor replicas (n=2, N<=4)",
           samples >= 20 and worst <= 1e-10, f"{samples} samples, max deviation {worst:.2e} <= 1e-10")


# --- 5 -------------------------------------------------------------------------

# Gauss-Hermite order per model: the integrand has poles near the real g axis,
# so fewer dimensions get a higher order within the same time budget.
GG_MODELS = [(field_only(1, J1=0.5), 40), (rf_chain(2, J1_field=0.5), 24), (rf_chain(3, J1_field=0.5), 20)]


def test_criterion_5_exact_gg_identity():
    worst, cases = 0.0, 0
    for model, order in GG_MODELS:
        grid = make_grid(order, model.n_couplings)
        for beta in (0.5, 1.0, 2.0):
            for f in (ONE, R("field", 1, 2), R("field", 2, 3)):
                worst = max(worst, abs(gg_bracket(model, "field", f, beta, grid).residual))
                cases += 1
    report(5, "exact finite-L GG identity under quadrature",
           worst <= 1e-8, f"{cases} cases on 1/2/3-coupling models, max residual {worst:.2e} <= 1e-8")


# --- 6 -------------------------------------------------------------------------

def test_criterion_6_self_averaging_scaling():
    cfg = parse_config(CONFIGS / "scaling_rf_chain.toml")
    res = run_variance_scaling(cfg)
    points = [r for r in res.records if r["kind"] == "point"]
    below = all(r["var_psi"] <= r["bound_free"] for r in points)
    fit = res.fits[cfg.beta_grid[0]]
    ok = below and [r["L"] for r in points] == list(range(2, 9)) and fit["slope_ci_high"] <= -0.8
    report(6, "Var(psi_L) below bound, log-log slope <= -0.8", ok,
           f"bound holds at all L: {below}; slope {fit['slope']:.3f} +- {fit['slope_stderr']:.3f}, "
           f"upper 95% {fit['slope_ci_high']:.3f}")


# --- 7 -------------------------------------------------------------------------

def test_criterion_7_classical_identity():
    cfg = parse_config(CONFIGS / "classical_ising.toml")
    records = run_classical_identity(cfg)
    assert [r["L"] for r in records] == list(range(2, 11))
    decomposition = max(abs(r["decomposition_error"]) for r in records)
    violations = []
    for gap in ("gap_Delta_delta", "gap_delta_mean", "gap_Delta_mean"):
        for a, b in zip(records, records[1:]):
            noise = math.hypot(a[gap + "_stderr"], b[gap + "_stderr"])
            if abs(b[gap]) > abs(a[gap]) + noise:
                violations.append((gap, b["L"]))
    ok = not violations and decomposition <= 1e-10
    report(7, "classical 2:3:6 gaps shrink with L", ok,
           f"non-monotone steps {violations or 'none'}; max |vDelta - vdelta - vmean| {decomposition:.1e}")


# --- 8 -------------------------------------------------------------------------

def test_criterion_8_rsb_sweep():
    cfg = parse_config(CONFIGS / "rsb_sweep.toml")
    records = run_rsb_sweep(cfg)
    points = [r for r in records if r["kind"] == "point"]
    zero = [r for r in points if (r["J0_0"], r["J1_0"]) == (0.0, 0.0)]
    decoupling = max(r["decoupling_error"] for r in zero)
    identical = all(r["m0_operator_gap"] == 0.0 and r["m0_minus_R_max"] == 0.0 for r in points)
    L_first = [r for r in records if r["kind"] == "table_L_first"]
    c_first = [r for r in records if r["kind"] == "table_coupling_first"]
    tables = (len(L_first) == len(cfg.coupling_path) and all(r["L"] == max(cfg.L_grid) for r in L_first)
              and [r["L"] for r in c_first] == list(cfg.L_grid)
              and len({(r["seed"], r["config_hash"], r["n_samples"]) for r in records}) == 1)
    ok = decoupling <= 1e-10 and identical and tables and max(cfg.L_grid) <= 5
    report(8, "RSB sweep consistency", ok,
           f"decoupling error {decoupling:.1e}; m0 == R exactly: {identical}; "
           f"both tables from one seed set: {tables}")


# --- 9 -------------------------------------------------------------------------

REPRO = [
    ("scaling_rf_chain.toml", {"L_grid": (2, 3, 4, 5), "samples": 200}),
    ("gg_exact.toml", {"L_grid": (1, 2), "quadrature_order": 12}),
    ("gg_mc.toml", {"L_grid": (2, 3, 4), "samples": 60}),
    ("classical_ising.toml", {"L_grid": (2, 3, 4, 5, 6), "samples": 2000}),
    ("rsb_sweep.toml", {"L_grid": (2, 3), "samples": 6}),
]


def test_criterion_9_reproducibility():
    mismatched = []
    for name, shrink in REPRO:
        payloads = []
        for jobs in (1, 2):
            cfg = parse_config(CONFIGS / name, dict(shrink, jobs=jobs))
            payloads.append(to_csv(RUNNERS[cfg.experiment](cfg)).encode())
        if payloads[0] != payloads[1]:
            mismatched.append(name)
    report(9, "bitwise-identical CSV for jobs=1 and jobs=2", not mismatched,
           f"{len(REPRO)} configs, mismatches: {mismatched or 'none'}")
