"""Batch experiments: variance scaling, GG residuals, classical identity, RSB sweeps.

Every run is a pure function of its :class:`RunConfig`.  Disorder averages
are either exact (tensor Gauss-Hermite, when ``quadrature_order`` is set) or
Monte Carlo over per-sample Philox streams; reductions run in sample order,
so the numbers do not depend on ``jobs``.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .disorder import (
    DEFAULT_SEED,
    MAX_QUADRATURE_DIMS,
    _map,
    jackknife,
    make_grid,
    map_samples,
    sample_disorder,
)
from .model import (
    PRESETS,
    DisorderSample,
    ModelSpec,
    ReplicaCouplingSpec,
    interreplica_operators,
    is_classical,
)
from .replica import (
    ONE,
    Monomial,
    Overlap,
    R,
    ReplicaEvaluator,
    TensorReplicaSystem,
    _probe_keys,
    classical_overlap_moments,
    gg_from_means,
    gg_pieces,
    overlap_operator,
)
from .spectral import duhamel_eig, thermal_trace
from .spin_algebra import BOUNDARIES, MAX_DIM, LatticeGeometry, check_capacity

EXPERIMENTS = ("scaling", "gg", "classical", "rsb")
DEFAULT_TERM = {"random_field_heisenberg": "field", "random_bond_heisenberg": "bond_3",
                "classical_ising": "bond"}
# desk-scale caps on the linear size (1D, spin-1/2); larger grids are rejected
L_CAPS = {"scaling": 8, "gg": 8, "classical": 10, "rsb": 5}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: str = "random_field_heisenberg"
    model_params: dict = field(default_factory=dict)
    d: int = 1
    boundary: str = "open"
    term: str | None = None
    L_grid: tuple[int, ...] = (2, 3, 4)
    beta_grid: tuple[float, ...] = (1.0,)
    samples: int = 200
    quadrature_order: int | None = None
    seed: int = DEFAULT_SEED
    monomials: tuple[str, ...] = ("1", "R12", "R23")
    coupling_path: tuple[tuple[float, float], ...] = ((0.4, 0.4), (0.2, 0.2), (0.1, 0.1), (0.0, 0.0))
    share_g0: bool = False
    max_dim: int = MAX_DIM
    format: str = "csv"
    out: str | None = None
    jobs: int = 1

    @property
    def observable(self) -> str:
        return self.term or DEFAULT_TERM.get(self.model, "field")

    def build_model(self, L: int) -> ModelSpec:
        lattice = LatticeGeometry(self.d, L, self.boundary)
        return PRESETS[self.model](lattice, **self.model_params, max_dim=self.max_dim)

    def canonical(self) -> dict:
        """Configuration that determines the numbers (execution options excluded)."""
        data = asdict(self)
        for k in ("format", "out", "jobs"):
            data.pop(k)
        data["term"] = self.observable
        return data

    def config_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.config_json().encode()).hexdigest()[:16]

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.model not in PRESETS:
            raise ValueError(f"unknown model {self.model!r}; presets: {sorted(PRESETS)}")
        allowed = set(inspect.signature(PRESETS[self.model]).parameters) - {"lattice", "max_dim"}
        unknown = set(self.model_params) - allowed
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for model {self.model!r}; "
                             f"allowed: {sorted(allowed)}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if not self.L_grid or any(int(L) != L or L < 1 for L in self.L_grid):
            raise ValueError(f"L grid must be a nonempty list of positive integers, got {self.L_grid}")
        if len(set(self.L_grid)) != len(self.L_grid):
            raise ValueError(f"L grid has duplicates: {self.L_grid}")
        if max(self.L_grid) > L_CAPS[self.experiment]:
            raise ValueError(f"L={max(self.L_grid)} exceeds the desk-scale cap "
                             f"{L_CAPS[self.experiment]} for {self.experiment!r}")
        if not self.beta_grid or any(not (math.isfinite(b) and b > 0) for b in self.beta_grid):
            raise ValueError(f"beta grid must hold positive finite numbers, got {self.beta_grid}")
        if self.samples < 2:
            raise ValueError("samples must be >= 2 (a standard error needs two samples)")
        if self.quadrature_order is not None and self.quadrature_order < 1:
            raise ValueError("quadrature order must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.format not in ("csv", "jsonl"):
            raise ValueError(f"format must be csv or jsonl, got {self.format!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.experiment == "scaling" and len(self.L_grid) < 3:
            raise ValueError("the scaling fit needs at least 3 L values")
        if self.experiment == "rsb":
            if not self.coupling_path or tuple(self.coupling_path[-1]) != (0.0, 0.0):
                raise ValueError("the RSB coupling path must end at (0, 0)")
        for mono in self.monomials:
            parse_monomial(mono, self.observable)
        for L in self.L_grid:
            model = self.build_model(L)
            try:
                model.term(self.observable)
            except KeyError as exc:
                raise ValueError(f"L={L}: {exc.args[0]}") from None
            if self.experiment == "rsb":
                check_capacity(model.dim ** 2, self.max_dim)
            if self.experiment == "classical" and not is_classical(model):
                raise ValueError(f"model {self.model!r} is not classical (mixed spin axes)")
            if self.quadrature_order is not None and self.experiment in ("scaling", "gg", "classical"):
                dims = len(_probe_keys(model, self.observable)[0]) if self.experiment == "gg" \
                    else model.n_couplings
                if dims > MAX_QUADRATURE_DIMS:
                    raise ValueError(f"L={L} has {dims} Gaussian couplings; quadrature is capped at "
                                     f"{MAX_QUADRATURE_DIMS} (drop quadrature_order to use Monte Carlo)")
        return self


_MONO = re.compile(r"R(\d)(\d)")


def parse_monomial(text: str, term: str) -> Monomial:
    """``"1"``, ``"R12"``, ``"R12*R13"`` -> overlap monomial of one term."""
    text = text.replace(" ", "")
    if text == "1":
        return ONE
    out = ONE
    for part in text.split("*"):
        match = _MONO.fullmatch(part)
        if not match or match.group(1) == match.group(2):
            raise ValueError(f"cannot parse monomial {text!r}; use forms like 1, R12, R23, R12*R13")
        out = out * R(term, int(match.group(1)), int(match.group(2)))
    return out


def _base_record(cfg: RunConfig, model: ModelSpec, L: int, beta: float, mode: str, n: int) -> dict:
    return {
        "experiment": cfg.experiment, "version": __version__, "config_hash": cfg.config_hash(),
        "seed": cfg.seed, "model": cfg.model, "sign": model.sign, "boundary": cfg.boundary,
        "L": L, "volume": model.volume, "beta": float(beta), "term": cfg.observable,
        "disorder_mode": mode, "n_samples": n,
    }


def _with_config(cfg: RunConfig, records: list[dict]) -> list[dict]:
    blob = cfg.config_json()
    for r in records:
        r["config"] = blob
    return records


def _disorder_values(cfg: RunConfig, functional, dims: int):
    """Per-sample (or per-node) values and weights for the configured disorder mode."""
    if cfg.quadrature_order is not None:
        grid = make_grid(cfg.quadrature_order, dims)
        values = np.asarray(_map(functional, [_NodeSeed(node) for node in grid.nodes], cfg.jobs))
        return values, grid.weights, f"quadrature({cfg.quadrature_order})"
    values = map_samples(functional, cfg.samples, cfg.seed, cfg.jobs)
    return values, None, "mc"


@dataclass(frozen=True)
class _NodeSeed:
    """Stand-in for a SeedSpec that carries quadrature node values instead."""

    g: np.ndarray


def _draw(model: ModelSpec, seed, extra_keys=()) -> DisorderSample:
    keys = model.disorder_keys() + tuple(extra_keys)
    if isinstance(seed, _NodeSeed):
        return DisorderSample(keys, seed.g)
    return sample_disorder(model, seed, extra_keys)


def _estimate(values, weights, estimator):
    """Estimator of means with a jackknife error (MC) or exact weighted value (quadrature)."""
    if weights is not None:
        return float(estimator(np.tensordot(weights, values, axes=1)[None, :])[0]), 0.0
    est, err = jackknife(values, estimator)
    return float(est), float(err)


# --- variance scaling --------------------------------------------------------

@dataclass(frozen=True)
class _ScalingSample:
    model: ModelSpec
    term: str
    beta: float

    def __call__(self, seed):
        sample = _draw(self.model, seed)
        ev = ReplicaEvaluator.from_sample(self.model, sample, self.beta)
        ctx = ev.ctx
        ops = ev.ops(self.term)
        t = self.model.term(self.term)
        keys = [(t.draw_group, k) for k in range(len(t.family))]
        g = sample.vector_for(keys) if t.disordered else np.zeros(len(keys))
        m = ops.mean(axis=0)
        h = np.tensordot(g, ops, axes=1) / len(ops)
        return np.array([
            ctx.log_z / self.model.volume,
            thermal_trace(ctx, m).real, thermal_trace(ctx, m @ m).real, duhamel_eig(ctx, m, m).real,
            thermal_trace(ctx, h).real, thermal_trace(ctx, h @ h).real, duhamel_eig(ctx, h, h).real,
        ])


def variance_bounds(model: ModelSpec, term: str, beta: float) -> dict:
    """Explicit variance bounds for psi, dm and dh, with ``K^a = S^{n_a}``."""
    vol = model.volume
    free = sum((beta * t.J1 * model.operator_bound(t.label)) ** 2 * t.family.arity
               for t in model.terms if t.disordered) / vol
    t = model.term(term)
    K, n_a = model.operator_bound(term), t.family.arity
    if beta * t.J1 == 0:
        return {"bound_free": free, "bound_delta": None, "bound_deltah": None}
    pref = K / abs(beta * t.J1)
    return {
        "bound_free": free,
        "bound_delta": pref * math.sqrt(1 / (n_a * vol)),
        "bound_deltah": pref * (math.sqrt(6 / (n_a * vol)) + 1 / (n_a * vol)),
    }


def loglog_fit(x, y, y_err) -> dict:
    """Weighted least squares of log y on log x with errors propagated from y_err."""
    x = np.log(np.asarray(x, float))
    y_arr = np.asarray(y, float)
    if len(x) < 3 or np.any(y_arr <= 0):
        return {"slope": None, "intercept": None, "slope_stderr": None,
                "slope_ci_low": None, "slope_ci_high": None, "n_points": len(x)}
    ly = np.log(y_arr)
    sig = np.asarray(y_err, float) / y_arr
    w = 1.0 / np.maximum(sig, 1e-12) ** 2 if np.all(sig > 0) else np.ones_like(ly)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * ly) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (ly - ym)) / sxx
    intercept = ym - slope * xm
    se = math.sqrt(1.0 / sxx) if np.all(sig > 0) else 0.0
    return {"slope": float(slope), "intercept": float(intercept), "slope_stderr": se,
            "slope_ci_low": float(slope - 1.96 * se), "slope_ci_high": float(slope + 1.96 * se),
            "n_points": len(x)}


# columns: psi, psi^2, <m>, <m^2>, (m,m)_D, <h>, <h^2>, (h,h)_D, <m>^2, <h>^2
SCALING_STATS = {
    "var_psi": lambda e: e[:, 1] - e[:, 0] ** 2,
    "var_m_Delta": lambda e: e[:, 3] - e[:, 2] ** 2,
    "var_m_delta": lambda e: e[:, 3] - e[:, 8],
    "duhamel_dm": lambda e: e[:, 4] - e[:, 8],
    "var_h_Delta": lambda e: e[:, 6] - e[:, 5] ** 2,
    "var_h_delta": lambda e: e[:, 6] - e[:, 9],
    "duhamel_dh": lambda e: e[:, 7] - e[:, 9],
}


@dataclass
class ScalingResult:
    records: list[dict]
    fits: dict[float, dict]


def run_variance_scaling(cfg: RunConfig) -> ScalingResult:
    cfg.validate()
    records, fits = [], {}
    term = cfg.observable
    for beta in cfg.beta_grid:
        points = []
        for L in cfg.L_grid:
            model = cfg.build_model(L)
            values, weights, mode = _disorder_values(cfg, _ScalingSample(model, term, beta),
                                                     model.n_couplings)
            n = len(values)
            # shift psi by its first value: exact zero variance when psi is constant
            psi = values[:, 0] - values[0, 0]
            cols = np.column_stack([psi, psi ** 2, values[:, 1:]])
            rec = _base_record(cfg, model, L, beta, mode, n)
            rec["kind"] = "point"
            ext = np.column_stack([cols, cols[:, 2] ** 2, cols[:, 5] ** 2])
            for name, fn in SCALING_STATS.items():
                est, err = _estimate(ext, weights, fn)
                rec[name], rec[name + "_stderr"] = est, err
            rec.update(variance_bounds(model, term, beta))
            for quantity, bound in (("var_psi", "bound_free"), ("duhamel_dm", "bound_delta"),
                                    ("duhamel_dh", "bound_deltah")):
                if rec[bound] is not None:
                    rec[f"{quantity}_within_bound"] = bool(
                        rec[quantity] <= rec[bound] + 4 * rec[quantity + "_stderr"])
            records.append(rec)
            points.append(rec)
        fit = loglog_fit([p["volume"] for p in points], [p["var_psi"] for p in points],
                         [p["var_psi_stderr"] for p in points])
        fits[beta] = fit
        fit_rec = {k: v for k, v in points[-1].items() if k in ("experiment", "version", "config_hash",
                                                                "seed", "model", "sign", "boundary",
                                                                "beta", "term", "disorder_mode")}
        fit_rec.update(kind="fit", quantity="var_psi", **fit)
        records.append(fit_rec)
    return ScalingResult(_with_config(cfg, records), fits)


# --- GG residuals ------------------------------------------------------------

@dataclass(frozen=True)
class _GGSample:
    model: ModelSpec
    extra: tuple
    term: str
    f: Monomial
    beta: float
    n: int

    def __call__(self, seed):
        sample = _draw(self.model, seed, self.extra)
        return gg_pieces(self.model, sample, self.term, self.f, self.beta, self.n)


def run_gg_residuals(cfg: RunConfig) -> list[dict]:
    """GG identity pieces for each (L, beta, f).

    Quadrature mode checks the exact finite-L identity (``residual``); MC mode
    tabulates ``E<Delta h f>`` and the bracket with jackknife errors so their
    decay with L can be followed.
    """
    cfg.validate()
    term = cfg.observable
    records = []
    for L in cfg.L_grid:
        model = cfg.build_model(L)
        keys, _ = _probe_keys(model, term)
        extra = keys[len(model.disorder_keys()):]
        for beta in cfg.beta_grid:
            for text in cfg.monomials:
                f = parse_monomial(text, term)
                n = f.n
                values, weights, mode = _disorder_values(
                    cfg, _GGSample(model, extra, term, f, beta, n), len(keys))
                means = (np.tensordot(weights, values, axes=1) if weights is not None
                         else values.mean(axis=0))
                gg = gg_from_means(model, term, f, beta, means, n)
                rec = _base_record(cfg, model, L, beta, mode, len(values))
                rec.update(kind="gg", f=text, n_replicas=n, J1_eff=gg.J1_eff,
                           duhamel_sum=gg.duhamel_sum, coupling_term=gg.coupling_term,
                           self_overlap=gg.self_overlap, overlap_12=gg.overlap_12,
                           f_mean=gg.f_mean, h_mean=gg.h_mean, disconnected=gg.disconnected,
                           bracket=gg.bracket, probe=gg.probe, abs_probe=abs(gg.probe),
                           residual=gg.residual)
                for name, fn in (("probe", _probe_est), ("bracket", _bracket_est)):
                    rec[name + "_stderr"] = _estimate(values, weights, fn)[1]
                records.append(rec)
    return _with_config(cfg, records)


def _probe_est(e):
    return e[:, 5] - e[:, 6] * e[:, 4]


def _bracket_est(e):
    return e[:, 0] - e[:, 1] - (e[:, 2] - e[:, 3]) * e[:, 4]


# --- classical identity ------------------------------------------------------

@dataclass(frozen=True)
class _ClassicalSample:
    model: ModelSpec
    term: str
    beta: float

    def __call__(self, seed):
        r, r2 = classical_overlap_moments(self.model, _draw(self.model, seed), self.term, self.beta)
        return np.array([r, r2, r * r])


CLASSICAL_STATS = {
    "v_Delta": lambda e: e[:, 1] - e[:, 0] ** 2,
    "v_delta": lambda e: e[:, 1] - e[:, 2],
    "v_mean": lambda e: e[:, 2] - e[:, 0] ** 2,
    "gap_Delta_delta": lambda e: 2 * (e[:, 1] - e[:, 0] ** 2) - 3 * (e[:, 1] - e[:, 2]),
    "gap_delta_mean": lambda e: 3 * (e[:, 1] - e[:, 2]) - 6 * (e[:, 2] - e[:, 0] ** 2),
    "gap_Delta_mean": lambda e: 2 * (e[:, 1] - e[:, 0] ** 2) - 6 * (e[:, 2] - e[:, 0] ** 2),
}


def run_classical_identity(cfg: RunConfig) -> list[dict]:
    """Per-L values of ``(2 E<DR^2>, 3 E<dR^2>, 6 E<DR>^2)`` and their pairwise gaps."""
    cfg.validate()
    term = cfg.observable
    records = []
    for beta in cfg.beta_grid:
        for L in cfg.L_grid:
            model = cfg.build_model(L)
            if not is_classical(model):
                raise ValueError(f"model {model.name!r} is not classical")
            values, weights, mode = _disorder_values(cfg, _ClassicalSample(model, term, beta),
                                                     model.n_couplings)
            rec = _base_record(cfg, model, L, beta, mode, len(values))
            rec["kind"] = "classical"
            for name, fn in CLASSICAL_STATS.items():
                rec[name], rec[name + "_stderr"] = _estimate(values, weights, fn)
            rec["two_v_Delta"] = 2 * rec["v_Delta"]
            rec["three_v_delta"] = 3 * rec["v_delta"]
            rec["six_v_mean"] = 6 * rec["v_mean"]
            rec["decomposition_error"] = rec["v_Delta"] - rec["v_delta"] - rec["v_mean"]
            records.append(rec)
    return _with_config(cfg, records)


# --- RSB sweep ---------------------------------------------------------------

@dataclass(frozen=True)
class _RSBSample:
    model: ModelSpec
    term: str
    beta: float
    path: tuple
    share_g0: bool
    R_op: np.ndarray
    m0_op: np.ndarray

    def g0_keys(self):
        template = ReplicaCouplingSpec(self.term, 0.0, 1.0, 2, self.share_g0)
        return template.disorder_keys(self.model)

    def __call__(self, seed):
        sample = _draw(self.model, seed, self.g0_keys())
        rows = []
        for J0, J1 in self.path:
            coupling = ReplicaCouplingSpec(self.term, J0, J1, 2, self.share_g0)
            system = TensorReplicaSystem(self.model, sample, 2, self.beta, coupling, sample)
            r, r2 = system.moments(self.R_op)
            m0, _ = system.moments(self.m0_op)
            decoupling = np.nan
            if J0 == 0 and J1 == 0:
                ev = ReplicaEvaluator.from_sample(self.model, sample, self.beta)
                fr = ev.overlap(Overlap(self.term, 1, 2))
                fr2 = ev.expectation(R(self.term, 1, 2) * R(self.term, 1, 2))
                decoupling = max(abs(fr - r), abs(fr2 - r2))
            rows.append([r, r2, m0, decoupling])
        return np.array(rows)


def run_rsb_sweep(cfg: RunConfig) -> list[dict]:
    """Two-replica overlap statistics along a coupling path ending at (0, 0).

    Emits per-point aggregates plus two limit-ordering tables built from the
    same seeds: ``table_L_first`` (largest L at each coupling point) and
    ``table_coupling_first`` (zero coupling at each L).  At desk scale these
    are finite-size proxies, not limits.
    """
    cfg.validate()
    term = cfg.observable
    path = tuple((float(a), float(b)) for a, b in cfg.coupling_path)
    records = []
    for beta in cfg.beta_grid:
        per_L = {}
        for L in cfg.L_grid:
            model = cfg.build_model(L)
            R_op = overlap_operator(model, term, 1, 2, 2)
            m0_op = sum(interreplica_operators(model, term, 2)) / len(model.term(term).family)
            op_gap = float(np.max(np.abs(R_op - m0_op)))
            values = map_samples(_RSBSample(model, term, beta, path, cfg.share_g0, R_op, m0_op),
                                 cfg.samples, cfg.seed, cfg.jobs)  # (n, points, 4)
            for p, (J0, J1) in enumerate(path):
                v = values[:, p, :]
                r, r2, m0 = v[:, 0], v[:, 1], v[:, 2]
                rbar = r.mean()
                rec = _base_record(cfg, model, L, beta, "mc", len(v))
                cols = np.column_stack([r, r2, r * r])
                rec.update(kind="point", J0_0=J0, J1_0=J1)
                for name, fn in (("E_R", lambda e: e[:, 0]), ("E_R2", lambda e: e[:, 1]),
                                 ("var_delta", lambda e: e[:, 1] - e[:, 2]),
                                 ("var_Delta", lambda e: e[:, 1] - e[:, 0] ** 2)):
                    rec[name], rec[name + "_stderr"] = _estimate(cols, None, fn)
                rec["m0_minus_R_max"] = float(np.max(np.abs(m0 - r)))
                rec["m0_operator_gap"] = op_gap
                rec["decoupling_error"] = float(np.nanmax(v[:, 3])) if J0 == 0 and J1 == 0 else None
                rec["sample_var_Delta_mean"] = float(np.mean(r2 - 2 * rbar * r + rbar ** 2))
                records.append(rec)
                per_L.setdefault(L, {})[(J0, J1)] = rec
        L_max = max(cfg.L_grid)
        for (J0, J1), rec in per_L[L_max].items():
            records.append(_table_row(rec, "table_L_first"))
        for L in cfg.L_grid:
            records.append(_table_row(per_L[L][path[-1]], "table_coupling_first"))
    return _with_config(cfg, records)


def _table_row(rec: dict, kind: str) -> dict:
    keep = ("experiment", "version", "config_hash", "seed", "model", "sign", "boundary", "L",
            "volume", "beta", "term", "disorder_mode", "n_samples", "J0_0", "J1_0", "E_R",
            "E_R_stderr", "E_R2", "var_delta", "var_delta_stderr", "var_Delta", "var_Delta_stderr")
    row = {k: rec[k] for k in keep}
    row["kind"] = kind
    return row


RUNNERS = {
    "scaling": lambda cfg: run_variance_scaling(cfg).records,
    "gg": run_gg_residuals,
    "classical": run_classical_identity,
    "rsb": run_rsb_sweep,
}


def config_fields() -> set[str]:
    return {f.name for f in fields(RunConfig)}
