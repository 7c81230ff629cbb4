"""Paired-ensemble studies at desk scale.

The central estimator is common-random-number pairing: two coupling
ensembles with the same variance profile are compared by sharing the
initial condition and the driving noise within each replica while
sampling the coupling independently per arm.  The product structure of
the randomness makes this legitimate, and the pairing removes most of
the replica variance from the arm difference, so the decay of the
difference with dimension is visible with a few thousand replicas.

Replicas are independent units of work keyed by their stream id.
Chunks of replicas integrate in one batched matrix-vector loop; chunk
boundaries depend only on the problem size, never on the thread count,
and chunk results are reduced in submission order, so reports are
deterministic functions of (config, seed).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .dynamics import IntegratorConfig, SystemParams, Trajectory, SimulationBlowupError
from .ensembles import (CouplingMatrix, EntryDistribution, InitialLaw,
                        VarianceProfile, sample_entries, sample_initial,
                        sample_matrix)
from .generator import taylor_mean, taylor_mean_multitime, taylor_terms
from .algebra import MomentOracle, Polynomial
from .observables import autocorrelation, grad_sq_density, hamiltonian_density
from .rng import PURPOSE_COUPLING, PURPOSE_INITIAL, PURPOSE_NOISE, RngStream

__all__ = [
    "SystemTemplate",
    "SuiteItem",
    "ExperimentConfig",
    "UniversalityReport",
    "ConcentrationReport",
    "AgingReport",
    "TaylorVsMcReport",
    "RayleighReport",
    "run_universality",
    "run_concentration",
    "run_aging",
    "run_taylor_vs_mc",
    "run_hopfield",
    "run_rayleigh",
    "default_suite",
    "hopfield_suite",
    "autocorr_item",
    "hamiltonian_item",
    "gradsq_item",
    "overlap_item",
    "rayleigh_quotient_curve",
    "ExperimentError",
]


class ExperimentError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SystemTemplate:
    """How a sampled coupling becomes a full parameter set.

    ``langevin=True`` uses the gradient-flow drift ``2J - K I`` of the
    quadratic energy; otherwise the coupling enters unscaled,
    ``J - K I``.  ``beta`` sets the additive noise ``sigma_0j =
    1/sqrt(2 beta)`` (``inf`` for a noiseless flow) and ``thresholds``
    the constant drift, either one value for all coordinates or a full
    vector.
    """

    confinement: float = 1.0
    beta: float = 1.0
    langevin: bool = False
    thresholds: object = 0.0

    def build(self, coupling: CouplingMatrix) -> SystemParams:
        j = coupling.j
        if self.langevin:
            j = 2.0 * j
        n = j.shape[0]
        sigma = np.zeros((n + 1, n))
        if not self.beta > 0:
            raise ExperimentError("beta must be positive (math.inf for no noise)")
        if math.isfinite(self.beta):
            sigma[0] = 1.0 / math.sqrt(2.0 * self.beta)
        h = np.broadcast_to(np.asarray(self.thresholds, dtype=np.float64), (n,))
        return SystemParams(coupling=j, lam=-self.confinement * np.eye(n),
                            h=np.array(h), sigma=sigma)

    @property
    def constant_diffusion(self) -> bool:
        return True  # templates only ever produce additive noise


@dataclass(frozen=True)
class SuiteItem:
    """Named scalar observable with the snapshot times it needs."""

    name: str
    times: tuple
    fn: Callable


def autocorr_item(s: float, t: float) -> SuiteItem:
    return SuiteItem(f"autocorr[{s:g},{t:g}]", (float(s), float(t)),
                     lambda traj, s=float(s), t=float(t): autocorrelation(traj, s, t))


def hamiltonian_item(t: float) -> SuiteItem:
    return SuiteItem(f"hamiltonian[{t:g}]", (float(t),),
                     lambda traj, t=float(t): hamiltonian_density(traj, t))


def gradsq_item(t: float) -> SuiteItem:
    return SuiteItem(f"gradsq[{t:g}]", (float(t),),
                     lambda traj, t=float(t): grad_sq_density(traj, t))


def overlap_item(t: float) -> SuiteItem:
    """Overlap with the initial state, (1/N) sum X_i(t) X_i(0)."""
    return SuiteItem(f"overlap[{t:g}]", (0.0, float(t)),
                     lambda traj, t=float(t): autocorrelation(traj, 0.0, t))


def default_suite(t: float = 1.0) -> tuple:
    return (autocorr_item(t, t), hamiltonian_item(t))


def hopfield_suite(t: float = 1.0) -> tuple:
    return (autocorr_item(t, t), hamiltonian_item(t), gradsq_item(t), overlap_item(t))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment run depends on, seed included.

    Fields beyond the common block apply only to specific experiments
    and keep their defaults elsewhere (documented per run function).
    """

    dist_a: EntryDistribution = EntryDistribution.GAUSSIAN
    dist_b: EntryDistribution = EntryDistribution.RADEMACHER
    symmetric: bool = True
    profile: object = "offdiagonal"  # preset name or a VarianceProfile
    init_dist: EntryDistribution = EntryDistribution.GAUSSIAN
    template: SystemTemplate = SystemTemplate()
    suite: tuple = ()
    sizes: tuple = (32, 64, 128, 256)
    replicas: int = 2000
    dt: float = 1e-3
    horizon: float = 1.0
    seed: int = 0
    coupling_seed: Optional[int] = None  # separate seed for the coupling streams
    threads: int = 1
    # aging
    s_values: tuple = (2.0, 4.0, 8.0)
    lambdas: tuple = (1.0, 2.0)
    confinement_mode: str = "auto"
    # concentration
    tail_thresholds: tuple = (0.05, 0.1, 0.2, 0.4)
    grid_points: int = 21
    # taylor vs MC
    truncation: int = 8
    time: float = 0.2
    mc_paths: int = 100_000
    # rayleigh
    rayleigh_horizon: float = 20.0
    rayleigh_points: int = 81
    rayleigh_replicas: int = 8

    def __post_init__(self) -> None:
        if self.replicas < 1:
            raise ExperimentError("replica count must be positive")
        if not self.sizes:
            raise ExperimentError("need at least one system size")
        if self.threads < 1:
            raise ExperimentError("thread count must be positive")

    def make_profile(self, n: int) -> VarianceProfile:
        if isinstance(self.profile, VarianceProfile):
            if self.profile.n != n:
                raise ExperimentError(
                    f"fixed variance profile is {self.profile.n}x{self.profile.n}, "
                    f"cannot run at size {n}")
            return self.profile
        if self.profile == "offdiagonal":
            return VarianceProfile.offdiagonal(n)
        if self.profile == "full":
            return VarianceProfile.full(n)
        raise ExperimentError(f"unknown profile preset {self.profile!r}")

    @property
    def jseed(self) -> int:
        return self.seed if self.coupling_seed is None else self.coupling_seed


# ---------------------------------------------------------------------------
# batched integration of one chunk of replicas


def _chunk_size(n: int, steps: int) -> int:
    # keep the per-chunk noise buffer around 32 MB; never a function of
    # the thread count, so outputs cannot depend on parallelism
    budget = 32 * 2 ** 20 // max(1, steps * n * 8)
    return max(1, min(64, budget))


def _integrate_batch(dmats: np.ndarray, h: np.ndarray, sig0: np.ndarray,
                     sig_state, x0s: np.ndarray, cfg: IntegratorConfig,
                     xi: np.ndarray) -> tuple:
    """Euler-Maruyama for a stack of systems sharing everything but the drift.

    ``dmats`` has shape (C, N, N) with the transposed combined drift per
    replica; ``xi`` holds the standard-normal increments, shape
    (steps, C, N).  Returns snapshot arrays of shape (C, S, N).
    """
    c, n = x0s.shape
    sqrt2dt = math.sqrt(2.0 * cfg.dt)
    x = x0s.copy()
    m = np.zeros((c, n))
    want = {s: i for i, s in enumerate(cfg.snapshot_steps)}
    xs = np.empty((c, len(want), n))
    ms = np.empty((c, len(want), n))
    if 0 in want:
        xs[:, want[0]] = x
        ms[:, want[0]] = m
    for step in range(1, cfg.n_steps + 1):
        amp = sig0 if sig_state is None else sig0 + x @ sig_state
        dm = sqrt2dt * amp * xi[step - 1]
        x = x + cfg.dt * (np.matmul(dmats, x[:, :, None])[:, :, 0] + h) + dm
        m = m + dm
        if not np.all(np.isfinite(x)):
            raise SimulationBlowupError(step)
        if step in want:
            xs[:, want[step]] = x
            ms[:, want[step]] = m
    return xs, ms


def _suite_grid(cfg: ExperimentConfig) -> IntegratorConfig:
    times = sorted({t for item in cfg.suite for t in item.times})
    horizon = max(cfg.horizon, times[-1] if times else 0.0)
    return IntegratorConfig(cfg.dt, horizon, tuple(times))


def _paired_chunk(cfg: ExperimentConfig, n: int, profile: VarianceProfile,
                  law: InitialLaw, icfg: IntegratorConfig, chunk: range,
                  arms: tuple = ("a", "b")) -> list:
    """Per-replica suite values, one array of shape (C, len(suite)) per arm.

    Initial conditions and noise are drawn once per replica and shared
    by every arm; only the coupling streams differ.
    """
    c = len(chunk)
    steps = icfg.n_steps
    dists = {"a": cfg.dist_a, "b": cfg.dist_b}
    x0s = np.stack([sample_initial(law, RngStream(cfg.seed, r, PURPOSE_INITIAL))
                    for r in chunk])
    xi = np.empty((steps, c, n))
    for k, r in enumerate(chunk):
        gen = RngStream(cfg.seed, r, PURPOSE_NOISE).generator()
        xi[:, k, :] = gen.standard_normal((steps, n))

    out = []
    for arm in arms:
        params = [cfg.template.build(sample_matrix(dists[arm], profile, cfg.symmetric,
                                                   RngStream(cfg.jseed, r, PURPOSE_COUPLING)))
                  for r in chunk]
        dmats = np.stack([p.drift_matrix() for p in params])
        p0 = params[0]
        sig_state = None if p0.constant_diffusion else p0.sigma[1:]
        xs, ms = _integrate_batch(dmats, p0.h, p0.sigma[0], sig_state,
                                  x0s, icfg, xi)
        vals = np.empty((c, len(cfg.suite)))
        for k in range(c):
            traj = Trajectory(icfg.times, xs[k], ms[k], x0s[k], params[k], icfg)
            for q, item in enumerate(cfg.suite):
                vals[k, q] = item.fn(traj)
        out.append(vals)
    return out


def _map_chunks(cfg: ExperimentConfig, work: Callable, chunks: list) -> list:
    if cfg.threads == 1 or len(chunks) <= 1:
        return [work(ch) for ch in chunks]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(work, chunks))


def _paired_values(cfg: ExperimentConfig, n: int) -> tuple:
    """(values_a, values_b): arrays of shape (replicas, len(suite))."""
    profile = cfg.make_profile(n)
    law = InitialLaw.uniform(cfg.init_dist, n)
    icfg = _suite_grid(cfg)
    size = _chunk_size(n, icfg.n_steps)
    chunks = [range(lo, min(lo + size, cfg.replicas))
              for lo in range(0, cfg.replicas, size)]
    parts = _map_chunks(cfg, lambda ch: _paired_chunk(cfg, n, profile, law, icfg, ch),
                        chunks)
    values_a = np.concatenate([part[0] for part in parts], axis=0)
    values_b = np.concatenate([part[1] for part in parts], axis=0)
    return values_a, values_b


# ---------------------------------------------------------------------------
# universality


@dataclass(frozen=True)
class UniversalityRow:
    n: int
    observable: str
    delta: float
    se: float
    mean_a: float
    mean_b: float
    replicas: int


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    lo: float
    hi: float


@dataclass(frozen=True)
class UniversalityReport:
    rows: tuple
    slopes: dict

    def row(self, n: int, observable: str) -> UniversalityRow:
        for r in self.rows:
            if r.n == n and r.observable == observable:
                return r
        raise KeyError((n, observable))


def _fit_loglog(ns, values) -> Optional[SlopeFit]:
    pts = [(math.log(n), math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 3:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        return None
    slope = float(xc @ y) / sxx
    resid = y - (y.mean() + slope * xc)
    dof = len(pts) - 2
    if dof > 0:
        stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    else:
        stderr = 0.0
    return SlopeFit(slope, slope - 1.96 * stderr, slope + 1.96 * stderr)


def run_universality(cfg: ExperimentConfig) -> UniversalityReport:
    """Paired-arm expectation differences across sizes.

    Per replica the initial condition and the noise are shared between
    arms and only the coupling is redrawn, so with identical entry
    distributions the per-replica difference is exactly zero.
    """
    if cfg.replicas < 2:
        raise ExperimentError("need at least 2 replicas for a standard error")
    if not cfg.suite:
        cfg = replace(cfg, suite=default_suite(cfg.horizon))
    rows = []
    per_obs_delta: dict = {item.name: [] for item in cfg.suite}
    for n in cfg.sizes:
        va, vb = _paired_values(cfg, n)
        diffs = va - vb
        for q, item in enumerate(cfg.suite):
            d = diffs[:, q]
            delta = float(d.mean())
            se = float(d.std(ddof=1)) / math.sqrt(len(d))
            rows.append(UniversalityRow(n, item.name, delta, se,
                                        float(va[:, q].mean()), float(vb[:, q].mean()),
                                        len(d)))
            per_obs_delta[item.name].append(abs(delta))
    slopes = {name: _fit_loglog(cfg.sizes, deltas)
              for name, deltas in per_obs_delta.items()}
    return UniversalityReport(tuple(rows), slopes)


def run_hopfield(cfg: ExperimentConfig) -> UniversalityReport:
    """Universality for the thresholded gradient flow.

    Forces the gradient-flow drift with the configured thresholds and
    the four-observable suite (autocorrelation, energy density, squared
    field strength, overlap with the start); otherwise identical to
    :func:`run_universality`, to which it delegates.
    """
    template = cfg.template
    if not template.langevin:
        template = replace(template, langevin=True)
    suite = cfg.suite if cfg.suite else hopfield_suite(cfg.horizon)
    forced = replace(cfg, template=template, suite=suite)
    return run_universality(forced)


# ---------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationRow:
    n: int
    observable: str
    sup_std: float
    dev_std: float
    dev_mean: float
    replicas: int
    tails: tuple  # ((threshold, count), ...)


@dataclass(frozen=True)
class ConcentrationReport:
    rows: tuple

    def row(self, n: int, observable: str) -> ConcentrationRow:
        for r in self.rows:
            if r.n == n and r.observable == observable:
                return r
        raise KeyError((n, observable))


def run_concentration(cfg: ExperimentConfig) -> ConcentrationReport:
    """Replica spread of sup-over-grid observables, single arm.

    Requires an additive-noise template (state-dependent diffusion is
    outside the concentration statement this checks).  The deviation
    statistics center each grid point at its replica mean and take the
    sup over the grid per replica.
    """
    probe = cfg.template.build(
        sample_matrix(cfg.dist_a, cfg.make_profile(2), cfg.symmetric,
                      RngStream(cfg.jseed, 0, PURPOSE_COUPLING)))
    if not probe.constant_diffusion:
        raise ExperimentError("concentration runs need constant diffusion")
    # Snap the evaluation grid to step multiples so lookups are exact.
    steps = sorted({int(round(t / cfg.dt))
                    for t in np.linspace(0.0, cfg.horizon, cfg.grid_points)})
    grid = tuple(k * cfg.dt for k in steps)
    suite = tuple(autocorr_item(t, t) for t in grid)
    sub = replace(cfg, suite=suite, dist_b=cfg.dist_a)
    rows = []
    for n in cfg.sizes:
        profile = sub.make_profile(n)
        law = InitialLaw.uniform(sub.init_dist, n)
        icfg = _suite_grid(sub)
        size = _chunk_size(n, icfg.n_steps)
        chunks = [range(lo, min(lo + size, sub.replicas))
                  for lo in range(0, sub.replicas, size)]
        parts = _map_chunks(sub, lambda ch: _paired_chunk(sub, n, profile, law,
                                                          icfg, ch, arms=("a",))[0],
                            chunks)
        curve = np.concatenate(parts, axis=0)  # (replicas, grid)
        sups = curve.max(axis=1)
        dev = np.abs(curve - curve.mean(axis=0)).max(axis=1)
        tails = tuple((lam, int((dev > lam).sum())) for lam in cfg.tail_thresholds)
        rows.append(ConcentrationRow(n, "autocorr[t,t]",
                                     float(sups.std(ddof=1)),
                                     float(dev.std(ddof=1)),
                                     float(dev.mean()),
                                     sub.replicas, tails))
    return ConcentrationReport(tuple(rows))


# ---------------------------------------------------------------------------
# aging (noise-free flow, exact in the eigenbasis)


@dataclass(frozen=True)
class AgingRow:
    n: int
    s: float
    lam: float
    mean_a: float
    se_a: float
    mean_b: float
    se_b: float
    gap: float


@dataclass(frozen=True)
class AgingReport:
    rows: tuple
    dropped_a: int
    dropped_b: int

    def row(self, n: int, s: float, lam: float) -> AgingRow:
        for r in self.rows:
            if r.n == n and r.s == s and r.lam == lam:
                return r
        raise KeyError((n, s, lam))


def _aging_ratios_one(coupling: CouplingMatrix, x0: np.ndarray,
                      pairs: list) -> list:
    """Normalized autocorrelation ratios of the noise-free flow.

    The flow ``x_t = exp((2J - K I) t) x0`` gives
    ``C(s, t) = (1/N) sum_i c_i^2 exp((mu_i - K)(s + t))`` over the
    eigenpairs ``mu_i`` of ``2J``.  The confinement cancels from the
    normalized ratio exactly, so the computation shifts all exponents
    by the spectral top and never forms the (possibly huge or tiny)
    bare correlations.
    """
    w, v = np.linalg.eigh(2.0 * coupling.j)
    c2 = (v.T @ x0) ** 2
    top = w[-1]
    shifted = w - top

    def corr(sum_t: float) -> float:
        return float(c2 @ np.exp(shifted * sum_t))

    out = []
    for s, lam in pairs:
        t = lam * s
        num = corr(s + t)
        den = math.sqrt(corr(2 * s) * corr(2 * t))
        out.append(num / den)
    return out


def run_aging(cfg: ExperimentConfig) -> AgingReport:
    """Two-time autocorrelation ratios of the noise-free gradient flow.

    Requires ``beta = inf``.  With ``confinement_mode = "auto"`` each
    replica uses a confinement just above its own spectral radius (the
    normalized ratio does not depend on the choice); with a fixed
    confinement, replicas whose sampled operator norm reaches it are
    dropped and counted.
    """
    if math.isfinite(cfg.template.beta):
        raise ExperimentError("aging runs are defined for beta = inf (noise-free flow)")
    if cfg.replicas < 2:
        raise ExperimentError("need at least 2 replicas")
    pairs = [(float(s), float(lam)) for s in cfg.s_values for lam in cfg.lambdas]
    rows = []
    dropped = {"a": 0, "b": 0}
    for n in cfg.sizes:
        profile = cfg.make_profile(n)
        law = InitialLaw.uniform(cfg.init_dist, n)
        per_arm = {}
        for arm, dist in (("a", cfg.dist_a), ("b", cfg.dist_b)):
            vals = []
            for r in range(cfg.replicas):
                coupling = sample_matrix(dist, profile, cfg.symmetric,
                                         RngStream(cfg.jseed, r, PURPOSE_COUPLING))
                if cfg.confinement_mode != "auto":
                    radius = float(np.abs(np.linalg.eigvalsh(2.0 * coupling.j)).max())
                    if cfg.template.confinement <= radius:
                        dropped[arm] += 1
                        continue
                x0 = sample_initial(law, RngStream(cfg.seed, r, PURPOSE_INITIAL))
                vals.append(_aging_ratios_one(coupling, x0, pairs))
            if len(vals) < 2:
                raise ExperimentError(
                    f"arm {arm!r} at n={n}: only {len(vals)} replicas below the "
                    f"confinement {cfg.template.confinement} ({dropped[arm]} dropped)")
            per_arm[arm] = np.asarray(vals)
        for q, (s, lam) in enumerate(pairs):
            stats = {}
            for arm in ("a", "b"):
                col = per_arm[arm][:, q]
                stats[arm] = (float(col.mean()),
                              float(col.std(ddof=1)) / math.sqrt(len(col)))
            rows.append(AgingRow(n, s, lam, stats["a"][0], stats["a"][1],
                                 stats["b"][0], stats["b"][1],
                                 abs(stats["a"][0] - stats["b"][0])))
    return AgingReport(tuple(rows), dropped["a"], dropped["b"])


# ---------------------------------------------------------------------------
# truncated series vs Monte Carlo


@dataclass(frozen=True)
class TaylorRow:
    observable: str
    value: float
    tail_bound: float
    diverging: bool
    mc_mean: float
    mc_se: float
    z: float


@dataclass(frozen=True)
class OrderRow:
    observable: str
    order: int
    term: float
    partial_sum: float


@dataclass(frozen=True)
class TaylorVsMcReport:
    rows: tuple
    orders: tuple
    any_diverging: bool


def _mc_moments(cfg: ExperimentConfig, n: int, specs: list) -> tuple:
    """Monte Carlo of ``E[prod_k f_k(X_{t_k})]`` over coupling, start, noise.

    Each spec is (list of x-polynomials, matching times).  Chunks are
    keyed by their index, so the estimate is deterministic in the seed
    and independent of the chunk width heuristic staying fixed.
    """
    profile = cfg.make_profile(n)
    law = InitialLaw.uniform(cfg.init_dist, n)
    all_times = sorted({t for _, ts in specs for t in ts})
    icfg = IntegratorConfig(cfg.dt, all_times[-1], tuple(all_times))
    steps = icfg.n_steps
    chunk = max(1, min(8192, 64 * 2 ** 20 // max(1, (steps + 1) * n * 8)))
    sums = np.zeros(len(specs))
    sums_sq = np.zeros(len(specs))
    base = _template_symbolic_params(cfg, n)
    scale = np.sqrt(profile.m)
    total = 0
    cid = 0
    while total < cfg.mc_paths:
        c = min(chunk, cfg.mc_paths - total)
        gen_j = RngStream(cfg.jseed, cid, PURPOSE_COUPLING).generator()
        gen_x0 = RngStream(cfg.seed, cid, PURPOSE_INITIAL).generator()
        gen_b = RngStream(cfg.seed, cid, PURPOSE_NOISE).generator()
        dmats = np.empty((c, n, n))
        for k in range(c):
            if cfg.symmetric:
                a = np.zeros((n, n))
                iu = np.triu_indices(n)
                a[iu] = scale[iu] * sample_entries(cfg.dist_a, len(iu[0]), gen_j)
                a = a + np.triu(a, 1).T
            else:
                a = scale * sample_entries(cfg.dist_a, (n, n), gen_j)
            j = a / math.sqrt(n)
            if cfg.template.langevin:
                j = 2.0 * j
            dmats[k] = (j + base.lam).T
        x0s = sample_entries(cfg.init_dist, (c, n), gen_x0)
        xi = gen_b.standard_normal((steps, c, n))
        xs, _ = _integrate_batch(dmats, base.h, base.sigma[0], None, x0s, icfg, xi)
        for q, (poly_list, ts) in enumerate(specs):
            vals = np.ones(c)
            for f, t in zip(poly_list, ts):
                row = int(np.nonzero(np.abs(icfg.times - t) <= 1e-9)[0][0])
                per = np.zeros(c)
                for mono in f:
                    contrib = np.full(c, mono.coeff)
                    for i in mono.x_idx:
                        if i != 0:
                            contrib = contrib * xs[:, row, i - 1]
                    per += contrib
                vals *= per
            sums[q] += vals.sum()
            sums_sq[q] += (vals * vals).sum()
        total += c
        cid += 1
    mean = sums / total
    var = np.maximum(sums_sq / total - mean ** 2, 0.0)
    se = np.sqrt(var / total)
    return mean, se


def run_taylor_vs_mc(cfg: ExperimentConfig) -> TaylorVsMcReport:
    """Symbolic truncated means against a full Monte Carlo, small systems.

    Uses the first configured size (must be at most 4) and the
    configured time (at most 0.5).  The report carries per-order terms
    for the single-time observables plus z-scores, and propagates the
    divergence warning of the symbolic engine.
    """
    n = cfg.sizes[0]
    if n > 4:
        raise ExperimentError("series-vs-MC runs are limited to dimension <= 4")
    t = cfg.time
    if t > 0.5:
        raise ExperimentError("series-vs-MC runs are limited to times <= 0.5")
    profile = cfg.make_profile(n)
    law = InitialLaw.uniform(cfg.init_dist, n)
    oracle = MomentOracle.from_ensemble(cfg.dist_a, profile, law, cfg.symmetric)
    params = _template_symbolic_params(cfg, n)

    singles = [("x1", Polynomial.from_x(1)), ("x1^2", Polynomial.from_x(1, 1))]
    if n >= 2:
        singles.append(("x1*x2", Polynomial.from_x(1, 2)))
    multi_name = "x1(t/2)*x1(t)"
    multi_fs = [Polynomial.from_x(1), Polynomial.from_x(1)]
    multi_ts = (t / 2, t)
    specs = [([f], (t,)) for _, f in singles] + [(multi_fs, multi_ts)]
    mean, se = _mc_moments(cfg, n, specs)

    rows = []
    orders = []
    any_div = False
    for q, (name, f) in enumerate(singles):
        terms = taylor_terms(f, params, oracle, t, cfg.truncation)
        res = taylor_mean(f, params, oracle, t, cfg.truncation)
        z = (res.value - mean[q]) / se[q] if se[q] > 0 else 0.0
        rows.append(TaylorRow(name, res.value, res.tail_bound, res.diverging,
                              float(mean[q]), float(se[q]), float(z)))
        any_div = any_div or res.diverging
        partial = 0.0
        for k, term in enumerate(terms):
            partial += term
            orders.append(OrderRow(name, k, term, partial))
    mv = taylor_mean_multitime(multi_fs, multi_ts, params, oracle, cfg.truncation)
    q = len(singles)
    z = (mv - mean[q]) / se[q] if se[q] > 0 else 0.0
    rows.append(TaylorRow(multi_name, mv, math.nan, False, float(mean[q]),
                          float(se[q]), float(z)))
    return TaylorVsMcReport(tuple(rows), tuple(orders), any_div)


def _template_symbolic_params(cfg: ExperimentConfig, n: int) -> SystemParams:
    """Template parameters with a symbolic (identity-free) coupling slot.

    The symbolic engine only reads the deterministic parts plus the
    dimension, so the coupling array content is irrelevant; zeros keep
    accidental numeric use harmless.
    """
    sigma = np.zeros((n + 1, n))
    if math.isfinite(cfg.template.beta):
        sigma[0] = 1.0 / math.sqrt(2.0 * cfg.template.beta)
    h = np.broadcast_to(np.asarray(cfg.template.thresholds, dtype=np.float64), (n,))
    return SystemParams(coupling=np.zeros((n, n)),
                        lam=-cfg.template.confinement * np.eye(n),
                        h=np.array(h), sigma=sigma)


# ---------------------------------------------------------------------------
# rayleigh quotient along the noise-free flow


@dataclass(frozen=True)
class RayleighRow:
    arm: str
    replica: int
    top_eigenvalue: float
    final_quotient: float
    deficit: float
    monotone: bool


@dataclass(frozen=True)
class RayleighReport:
    rows: tuple
    times: tuple
    mean_gap: float

    def arm_rows(self, arm: str) -> list:
        return [r for r in self.rows if r.arm == arm]


def rayleigh_quotient_curve(eigvals: np.ndarray, coeffs_sq: np.ndarray,
                            times: np.ndarray) -> np.ndarray:
    """Quotient ``<x_t, J x_t>/|x_t|^2`` of the flow, eigen-exactly.

    ``eigvals`` are the eigenvalues of the coupling itself and
    ``coeffs_sq`` the squared eigenbasis coefficients of the start.
    Weights are shifted by the top eigenvalue so late times never
    overflow; the confinement cancels identically.
    """
    lam = np.asarray(eigvals, dtype=np.float64)
    c2 = np.asarray(coeffs_sq, dtype=np.float64)
    if c2.sum() <= 0:
        raise ExperimentError("start vector has no component in the eigenbasis")
    shifted = lam - lam.max()
    out = np.empty(len(times))
    for k, t in enumerate(times):
        w = c2 * np.exp(4.0 * shifted * t)
        out[k] = float((lam * w).sum() / w.sum())
    return out


def run_rayleigh(cfg: ExperimentConfig) -> RayleighReport:
    """Gradient ascent of the quotient toward the spectral top.

    Noise-free flow only; per replica the quotient curve is computed in
    the eigenbasis and compared with the top eigenvalue of the sampled
    coupling.  Monotonicity is recorded per replica as a strict
    step-by-step check.
    """
    if math.isfinite(cfg.template.beta):
        raise ExperimentError("rayleigh runs are defined for beta = inf")
    n = cfg.sizes[0]
    profile = cfg.make_profile(n)
    law = InitialLaw.uniform(cfg.init_dist, n)
    times = np.linspace(0.0, cfg.rayleigh_horizon, cfg.rayleigh_points)
    rows = []
    finals = {"a": [], "b": []}
    for arm, dist in (("a", cfg.dist_a), ("b", cfg.dist_b)):
        for r in range(cfg.rayleigh_replicas):
            coupling = sample_matrix(dist, profile, cfg.symmetric,
                                     RngStream(cfg.jseed, r, PURPOSE_COUPLING))
            lam, v = np.linalg.eigh(coupling.j)
            x0 = sample_initial(law, RngStream(cfg.seed, r, PURPOSE_INITIAL))
            c2 = (v.T @ x0) ** 2
            curve = rayleigh_quotient_curve(lam, c2, times)
            # the exact quotient is nondecreasing; allow ulp-level rounding
            # wiggle once the curve has plateaued at the top
            tol = 8 * np.finfo(np.float64).eps * max(1.0, float(np.abs(lam).max()))
            monotone = bool(np.all(np.diff(curve) >= -tol))
            top = float(lam[-1])
            final = float(curve[-1])
            rows.append(RayleighRow(arm, r, top, final, top - final, monotone))
            finals[arm].append(final)
    gap = abs(float(np.mean(finals["a"])) - float(np.mean(finals["b"])))
    return RayleighReport(tuple(rows), tuple(times), gap)
