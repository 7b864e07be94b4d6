"""Replicated expectations, overlaps, and the finite-volume Ghirlanda-Guerra bracket.

Replicas that share one disorder sample and no inter-replica coupling are
independent thermal copies.  Any expectation of a product of operators that
live on different replicas therefore factorizes into single-replica pieces:
plain Gibbs averages, or a Duhamel bracket on the one replica that carries
operators at both imaginary times.  :class:`ReplicaEvaluator` uses this, and
:class:`TensorReplicaSystem` does the same computations on the full tensor
space as an independent check.

Replica indices are 1-based throughout, matching overlap notation ``R_{1,2}``.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .disorder import QuadratureGrid, gauss_hermite_expectation
from .errors import NumericalError
from .model import (
    DisorderSample,
    ModelSpec,
    ReplicaCouplingSpec,
    assemble_hamiltonian,
    assemble_replicated_hamiltonian,
    is_classical,
)
from .spectral import GibbsContext, diagonalize, duhamel_eig, thermal_trace


@dataclass(frozen=True, order=True)
class Overlap:
    """``R^a_{alpha,beta}`` for replicas alpha < beta, or the self-overlap when equal."""

    term: str
    alpha: int
    beta: int

    def __post_init__(self):
        if self.alpha < 1 or self.beta < 1:
            raise ValueError("replica indices start at 1")
        if self.alpha > self.beta:
            a, b = self.beta, self.alpha
            object.__setattr__(self, "alpha", a)
            object.__setattr__(self, "beta", b)


@dataclass(frozen=True)
class Monomial:
    """Product of overlaps ``prod_j R^{a_j}_{alpha_j, beta_j}`` over ``n`` replicas."""

    factors: tuple[Overlap, ...] = ()
    n: int = 0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        for f in self.factors:
            if f.alpha == f.beta:
                raise ValueError(f"self-overlap {f} is a Duhamel object, not a monomial factor")
        used = max((f.beta for f in self.factors), default=1)
        if self.n and self.n < used:
            raise ValueError(f"monomial uses replica {used} but declares n={self.n}")
        object.__setattr__(self, "n", max(self.n, used))

    def __mul__(self, other: Monomial) -> Monomial:
        return Monomial(self.factors + other.factors, max(self.n, other.n))

    def __str__(self):
        if not self.factors:
            return "1"
        return "*".join(f"R[{f.term}]_{f.alpha}{f.beta}" for f in self.factors)


def R(term: str, alpha: int, beta: int) -> Monomial:
    return Monomial((Overlap(term, alpha, beta),))


ONE = Monomial()


class ReplicaEvaluator:
    """Factorized replica evaluations for one (model, disorder sample, beta)."""

    def __init__(self, model: ModelSpec, ctx: GibbsContext):
        self.model = model
        self.ctx = ctx
        self._ops: dict[str, np.ndarray] = {}

    @classmethod
    def from_sample(cls, model: ModelSpec, sample: DisorderSample | None, beta: float):
        return cls(model, diagonalize(assemble_hamiltonian(model, sample), beta))

    def ops(self, term: str) -> np.ndarray:
        """``V^dag S_X V`` for every X of a term, shape (|C|, dim, dim)."""
        if term not in self._ops:
            V = self.ctx.spectral.vectors
            self._ops[term] = V.conj().T @ self.model.range_operators(term) @ V
        return self._ops[term]

    def _replica_tensor(self, later: list[tuple[int, str]], earlier: tuple[int, str] | None):
        """Single-replica factor as a tensor over the range variables it touches."""
        variables: dict[int, str] = {}
        for var, term in ([earlier] if earlier else []) + later:
            variables.setdefault(var, term)
        order = list(variables)
        sizes = [len(self.model.term(variables[v]).family) for v in order]
        out = np.empty(sizes, dtype=complex)
        eye = np.eye(self.ctx.dim)
        for idx in itertools.product(*(range(s) for s in sizes)):
            pick = dict(zip(order, idx))
            prod = reduce(np.matmul, (self.ops(t)[pick[v]] for v, t in later), eye)
            if earlier is None:
                out[idx] = thermal_trace(self.ctx, prod)
            else:
                out[idx] = duhamel_eig(self.ctx, self.ops(earlier[1])[pick[earlier[0]]], prod)
        return order, out

    def contract(self, n: int, later: dict[int, list[tuple[int, str]]],
                 earlier: dict[int, tuple[int, str]] | None = None, free: tuple[int, ...] = ()):
        """Sum over range variables of the product of per-replica factors.

        ``later[rho]`` lists ``(variable, term)`` operators acting on replica
        rho at the later imaginary time, in product order; ``earlier`` places
        at most one operator per replica at the earlier time.  Variables in
        ``free`` are left unsummed.
        """
        earlier = earlier or {}
        operands, subs = [], []
        letters: dict[int, str] = {}
        for rho in range(1, n + 1):
            if not later.get(rho) and rho not in earlier:
                continue
            order, tensor = self._replica_tensor(later.get(rho, []), earlier.get(rho))
            for v in order:
                letters.setdefault(v, string.ascii_letters[len(letters)])
            operands.append(tensor)
            subs.append("".join(letters[v] for v in order))
        if not operands:
            return complex(1.0)
        spec = ",".join(subs) + "->" + "".join(letters[v] for v in free)
        return np.einsum(spec, *operands)

    def _norm(self, terms) -> float:
        return float(np.prod([len(self.model.term(t).family) for t in terms]))

    def _monomial_ops(self, f: Monomial, first_var: int = 1):
        later: dict[int, list[tuple[int, str]]] = {}
        for j, factor in enumerate(f.factors, start=first_var):
            later.setdefault(factor.alpha, []).append((j, factor.term))
            later.setdefault(factor.beta, []).append((j, factor.term))
        return later

    def expectation(self, f: Monomial) -> float:
        """``<f>`` in the n-replica product Gibbs state."""
        value = self.contract(f.n, self._monomial_ops(f)) / self._norm(x.term for x in f.factors)
        return _real(value, f"<{f}>")

    def overlap(self, spec: Overlap) -> float:
        if spec.alpha == spec.beta:
            raise ValueError("use self_overlap_duhamel for the self-overlap")
        return self.expectation(Monomial((spec,)))

    def self_overlap_duhamel(self, term: str) -> float:
        """``(R^a_{1,1})_D = |C|^{-1} sum_X (S_X, S_X)_D``."""
        ops = self.ops(term)
        return _real(sum(duhamel_eig(self.ctx, A, A) for A in ops) / len(ops), "(R_11)_D")

    def range_expectations(self, term: str) -> np.ndarray:
        """``<S_X>`` for every X of a term."""
        return np.real(np.einsum("xkk,k->x", self.ops(term), self.ctx.weights))

    def cross_bracket(self, term: str, alpha: int, f: Monomial, n: int | None = None) -> float:
        """``|C^a|^{-1} sum_X (S_X^{alpha}, S_X^{1} f)_D`` in the n-replica state."""
        n = max(n or 0, f.n, alpha)
        later = {rho: list(v) for rho, v in self._monomial_ops(f).items()}
        later[1] = [(0, term)] + later.get(1, [])
        value = self.contract(n, later, {alpha: (0, term)})
        value = value / self._norm([term] + [x.term for x in f.factors])
        return _real(value, f"cross bracket alpha={alpha}, f={f}")

    def per_range_expectation(self, term: str, f: Monomial, n: int | None = None) -> np.ndarray:
        """``<S_X^{1} f>`` for every X of ``term``, as a vector over X."""
        n = max(n or 0, f.n)
        later = {rho: list(v) for rho, v in self._monomial_ops(f).items()}
        later[1] = [(0, term)] + later.get(1, [])
        value = self.contract(n, later, free=(0,)) / self._norm(x.term for x in f.factors)
        value = np.asarray(value)
        if np.max(np.abs(value.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(value.real), initial=0.0)):
            raise NumericalError(f"<S_X f> for f={f} is not real")
        return value.real


def _real(value, what: str) -> float:
    value = complex(value)
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise NumericalError(f"{what} has imaginary residue {value.imag:.3e}")
    return value.real


def overlap_expectation(ctx: GibbsContext, model: ModelSpec, spec: Overlap) -> float:
    return ReplicaEvaluator(model, ctx).overlap(spec)


def self_overlap_duhamel(ctx: GibbsContext, model: ModelSpec, term: str) -> float:
    return ReplicaEvaluator(model, ctx).self_overlap_duhamel(term)


def replicated_expectation(ctx: GibbsContext, model: ModelSpec, f: Monomial) -> float:
    return ReplicaEvaluator(model, ctx).expectation(f)


# --- brute-force tensor space -------------------------------------------------

def overlap_operator(model: ModelSpec, term: str, alpha: int, beta: int, n: int) -> np.ndarray:
    """``R^a_{alpha beta}`` on the n-fold tensor space (cached on the model)."""
    key = ("_overlap", term, alpha, beta, n)
    cache = model._cache
    if key not in cache:
        eye = np.eye(model.dim)
        ops = model.range_operators(term)
        total = sum(reduce(np.kron, [S_X if rho in (alpha, beta) else eye for rho in range(1, n + 1)])
                    for S_X in ops) / len(ops)
        total.setflags(write=False)
        cache[key] = total
    return cache[key]


class TensorReplicaSystem:
    """The n-replica system diagonalized on the full tensor-product space.

    With a :class:`ReplicaCouplingSpec` this is the only evaluation path; at
    zero coupling it must agree with :class:`ReplicaEvaluator`.
    """

    def __init__(self, model: ModelSpec, sample: DisorderSample | None, n: int, beta: float,
                 coupling: ReplicaCouplingSpec | None = None,
                 sample0: DisorderSample | None = None):
        self.model = model
        self.n = n
        if n == 1:
            if coupling is not None:
                raise ValueError("an inter-replica coupling needs n >= 2")
            self.H = assemble_hamiltonian(model, sample)
        else:
            coupling = coupling or ReplicaCouplingSpec(model.terms[0].label, 0.0, 0.0, n)
            if coupling.n_replicas != n:
                coupling = ReplicaCouplingSpec(coupling.c, coupling.J0, coupling.J1, n,
                                               coupling.share_with_c)
            self.H = assemble_replicated_hamiltonian(model, sample, coupling, sample0)
        self.ctx = diagonalize(self.H, beta)
        self._eye = np.eye(model.dim)

    def on_replicas(self, placed: dict[int, np.ndarray]) -> np.ndarray:
        """Kronecker product with ``placed[rho]`` on replica rho (1-based)."""
        return reduce(np.kron, [placed.get(rho, self._eye) for rho in range(1, self.n + 1)])

    def overlap_operator(self, term: str, alpha: int, beta: int) -> np.ndarray:
        return overlap_operator(self.model, term, alpha, beta, self.n)

    def moments(self, O: np.ndarray) -> tuple[float, float]:
        """``(<O>, <O^2>)`` for Hermitian O with a single product against V."""
        V = self.ctx.spectral.vectors
        OV = O @ V
        first = np.einsum("ik,ik->k", V.conj(), OV)
        second = np.einsum("ik,ik->k", OV.conj(), OV)
        p = self.ctx.weights
        return _real(np.dot(p, first), "<O>"), _real(np.dot(p, second), "<O^2>")

    def monomial_operator(self, f: Monomial) -> np.ndarray:
        if f.n > self.n:
            raise ValueError(f"monomial needs {f.n} replicas, system has {self.n}")
        out = np.eye(self.model.dim ** self.n)
        for x in f.factors:
            out = out @ self.overlap_operator(x.term, x.alpha, x.beta)
        return out

    def expectation(self, O: np.ndarray) -> float:
        return _real(thermal_trace(self.ctx, self.ctx.to_eigenbasis(O)), "tensor expectation")

    def duhamel(self, A: np.ndarray, B: np.ndarray) -> float:
        return _real(duhamel_eig(self.ctx, self.ctx.to_eigenbasis(A), self.ctx.to_eigenbasis(B)),
                     "tensor Duhamel bracket")

    def cross_bracket(self, term: str, alpha: int, f: Monomial) -> float:
        F = self.monomial_operator(f)
        ops = self.model.range_operators(term)
        total = 0.0
        for S_X in ops:
            A = self.on_replicas({alpha: S_X})
            B = self.on_replicas({1: S_X}) @ F
            total += self.duhamel(A, B)
        return total / len(ops)


def tensor_oracle_expectation(model: ModelSpec, sample: DisorderSample | None, n: int,
                              f: Monomial, beta: float) -> float:
    system = TensorReplicaSystem(model, sample, n, beta)
    return system.expectation(system.monomial_operator(f))


# --- Ghirlanda-Guerra bracket ------------------------------------------------

@dataclass(frozen=True)
class GGBracket:
    """Pieces of the finite-volume Ghirlanda-Guerra identity for one (term, f, beta).

    ``bracket = duhamel_sum - coupling_term - disconnected`` is the quantity
    that vanishes as L grows.  At finite L and exact disorder averages,
    ``probe = E<Delta h f>`` equals ``beta * J1_eff * bracket``; ``residual``
    is ``probe / (beta J1_eff) - bracket`` (or ``probe`` when beta J1 = 0).
    """

    term: str
    f: str
    n: int
    beta: float
    J1_eff: float
    duhamel_sum: float
    coupling_term: float
    self_overlap: float
    overlap_12: float
    f_mean: float
    h_mean: float
    disconnected: float
    bracket: float
    probe: float
    residual: float
    extras: dict = field(default_factory=dict, compare=False)


def _gg_check(model: ModelSpec, term: str):
    t = model.term(term)
    if t.share_group is not None and any(
            o.share_group == t.share_group and o.label != term and o.disordered for o in model.terms):
        raise ValueError(f"term {term!r} shares its Gaussian draws with other terms; "
                         "the single-term integration by parts does not apply")
    return t


def _probe_keys(model: ModelSpec, term: str):
    """Model keys plus the term's own keys (present even when J1 = 0)."""
    t = model.term(term)
    keys = list(model.disorder_keys())
    own = [(t.draw_group, k) for k in range(len(t.family))]
    keys += [k for k in own if k not in keys]
    return tuple(keys), own


def gg_pieces(model: ModelSpec, sample: DisorderSample, term: str, f: Monomial, beta: float,
              n: int | None = None) -> np.ndarray:
    """Per-sample thermal pieces of the GG identity as one vector.

    Order: duhamel_sum, coupling_term, (R11)_D, <R12>, <f>, <h f>, <h>.
    """
    n = max(n or 0, f.n)
    _gg_check(model, term)
    ev = ReplicaEvaluator.from_sample(model, sample, beta)
    t = model.term(term)
    g = sample.vector_for([(t.draw_group, k) for k in range(len(t.family))])
    dsum = sum(ev.cross_bracket(term, alpha, f, n) for alpha in range(1, n + 1))
    coupling = n * ev.expectation(R(term, 1, n + 1) * f)
    r11 = ev.self_overlap_duhamel(term)
    r12 = ev.overlap(Overlap(term, 1, 2))
    f_mean = ev.expectation(f) if f.factors else 1.0
    hf = float(np.dot(g, ev.per_range_expectation(term, f, n))) / len(g)
    h = float(np.dot(g, ev.range_expectations(term))) / len(g)
    return np.array([dsum, coupling, r11, r12, f_mean, hf, h])


def effective_coupling(model: ModelSpec, term: str) -> float:
    """Coefficient ``J1_eff`` with ``d<B>/dg_X = beta J1_eff [...]``; equals ``-sign * J1``."""
    return -model.sign * model.term(term).J1


def gg_from_means(model: ModelSpec, term: str, f: Monomial, beta: float, means, n: int) -> GGBracket:
    dsum, coupling, r11, r12, f_mean, hf, h = (float(x) for x in means)
    J1_eff = effective_coupling(model, term)
    disconnected = (r11 - r12) * f_mean
    bracket = dsum - coupling - disconnected
    probe = hf - h * f_mean
    scale = beta * J1_eff
    residual = probe / scale - bracket if scale != 0 else probe
    return GGBracket(term, str(f), n, beta, J1_eff, dsum, coupling, r11, r12, f_mean, h,
                     disconnected, bracket, probe, residual)



def gg_bracket(model: ModelSpec, term: str, f: Monomial, beta: float, grid: QuadratureGrid,
               n: int | None = None, jobs: int = 1) -> GGBracket:
    """All pieces of the GG identity under exact (quadrature) disorder averages."""
    n = max(n or 0, f.n)
    _gg_check(model, term)
    keys, _ = _probe_keys(model, term)
    if grid.dims != len(keys):
        raise ValueError(f"quadrature grid has {grid.dims} dims but the model needs {len(keys)}")
    means = gauss_hermite_expectation(
        _NodeFunctional(model, keys, term, f, beta, n), grid, jobs)
    return gg_from_means(model, term, f, beta, means, n)


@dataclass(frozen=True)
class _NodeFunctional:
    model: ModelSpec
    keys: tuple
    term: str
    f: Monomial
    beta: float
    n: int

    def __call__(self, g):
        return gg_pieces(self.model, DisorderSample(self.keys, g), self.term, self.f, self.beta, self.n)


def integration_by_parts_residual(model: ModelSpec, term: str, X: int, f: Monomial, beta: float,
                                  grid: QuadratureGrid, n: int | None = None) -> float:
    """``|E[g_X <S_X^1 f>] - beta J1_eff (sum_alpha E(S_X^alpha, S_X^1 f)_D - n E<S_X><S_X^1 f>)|``.

    The derivative side comes from the replica expansion of ``d<S_X f>/dg_X``,
    never from numerically differentiating in g.
    """
    n = max(n or 0, f.n)
    _gg_check(model, term)
    keys, own = _probe_keys(model, term)
    if grid.dims != len(keys):
        raise ValueError(f"quadrature grid has {grid.dims} dims but the model needs {len(keys)}")
    if not 0 <= X < len(own):
        raise ValueError(f"range index {X} out of range for term {term!r}")
    gpos = keys.index(own[X])
    one_range = _SingleRangeFunctional(model, keys, term, X, gpos, f, beta, n)
    lhs, dsum, disc = gauss_hermite_expectation(one_range, grid)
    rhs = beta * effective_coupling(model, term) * (dsum - n * disc)
    return float(abs(lhs - rhs))


@dataclass(frozen=True)
class _SingleRangeFunctional:
    model: ModelSpec
    keys: tuple
    term: str
    X: int
    gpos: int
    f: Monomial
    beta: float
    n: int

    def __call__(self, g):
        ev = ReplicaEvaluator.from_sample(self.model, DisorderSample(self.keys, g), self.beta)
        sxf = ev.per_range_expectation(self.term, self.f, self.n)[self.X]
        sx = ev.range_expectations(self.term)[self.X]
        # one range only: restrict the X-sum of cross_bracket to index X
        dsum = 0.0
        for alpha in range(1, self.n + 1):
            later = {rho: list(v) for rho, v in ev._monomial_ops(self.f).items()}
            later[1] = [(0, self.term)] + later.get(1, [])
            vec = ev.contract(self.n, later, {alpha: (0, self.term)}, free=(0,))
            vec = np.asarray(vec) / ev._norm(x.term for x in self.f.factors)
            dsum += _real(vec[self.X], "single-range Duhamel bracket")
        return np.array([g[self.gpos] * sxf, dsum, sx * sxf])


# --- classical limit -----------------------------------------------------------

@dataclass(frozen=True)
class ClassicalTerms:
    """``E<Delta R^2>``, ``E<delta R^2>``, ``E<Delta R>^2`` for a classical model."""

    v_Delta: float
    v_delta: float
    v_mean: float

    def scaled(self) -> tuple[float, float, float]:
        return 2 * self.v_Delta, 3 * self.v_delta, 6 * self.v_mean


def classical_overlap_moments(model: ModelSpec, sample: DisorderSample | None, term: str,
                              beta: float) -> np.ndarray:
    """``(<R_12>, <R_12^2>)`` for one sample of a single-axis (commuting) model.

    Every operator is diagonal in the eigenbasis of the common axis, so the
    Gibbs state is a probability vector over product states.
    """
    if not is_classical(model):
        raise ValueError(f"model {model.name!r} mixes spin axes; the classical identities "
                         "need mutually commuting operators")
    diag = _classical_diagonals(model)
    H0, keys = diag["H0"], diag["keys"]
    E = H0 + (sample.vector_for(keys) @ diag["B"] if keys else 0.0)
    logits = -beta * (E - E.min())
    p = np.exp(logits)
    p /= p.sum()
    D = diag[term]
    s = D @ p
    ss = (D * p) @ D.T
    C = len(D)
    return np.array([np.dot(s, s) / C, np.sum(ss ** 2) / C ** 2])


def _classical_diagonals(model: ModelSpec) -> dict:
    cache = model._cache
    if "_classical" not in cache:
        rep = model.rep
        N = model.volume
        m = rep.S - np.arange(rep.dim)
        states = np.indices((rep.dim,) * N).reshape(N, -1) if N else np.zeros((0, 1), int)
        mvals = model.site_scale * m[states]  # (N, dim)
        out = {}
        for t in model.terms:
            out[t.label] = np.array([np.prod(mvals[list(X)], axis=0) for X in t.family])
        keys = model.disorder_keys()
        index = {k: i for i, k in enumerate(keys)}
        H0 = np.zeros(mvals.shape[1])
        B = np.zeros((len(keys), mvals.shape[1]))
        for t in model.terms:
            H0 += model.sign * t.J0 * out[t.label].sum(axis=0)
            if t.disordered:
                for k, d in enumerate(out[t.label]):
                    B[index[(t.draw_group, k)]] += model.sign * t.J1 * d
        out.update(H0=H0, B=B, keys=keys)
        cache["_classical"] = out
    return cache["_classical"]


def classical_terms_from_moments(moments: np.ndarray, weights: np.ndarray | None = None) -> ClassicalTerms:
    """Aggregate per-sample ``(<R>, <R^2>)`` into the three variances.

    The decomposition ``v_Delta = v_delta + v_mean`` holds identically.
    """
    moments = np.asarray(moments, dtype=float)
    w = np.full(len(moments), 1.0 / len(moments)) if weights is None else np.asarray(weights)
    r = moments[:, 0]
    r2 = moments[:, 1]
    Er = np.dot(w, r)
    Er2 = np.dot(w, r2)
    Er_sq = np.dot(w, r ** 2)
    return ClassicalTerms(v_Delta=Er2 - Er ** 2, v_delta=Er2 - Er_sq, v_mean=Er_sq - Er ** 2)


def classical_identity_terms(model: ModelSpec, samples, term: str, beta: float,
                             weights=None) -> ClassicalTerms:
    """Variances of the overlap for a stream of disorder samples (MC or quadrature nodes)."""
    moments = np.array([classical_overlap_moments(model, s, term, beta) for s in samples])
    return classical_terms_from_moments(moments, weights)
