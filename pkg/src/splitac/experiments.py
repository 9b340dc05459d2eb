"""Convergence-order estimation with coupled paths, and path diagnostics.

The temporal order of a scheme is read off the decay of the coupled
two-level estimators

    strong:  E || X_N^{(dt)} - X_{2N}^{(dt/2)} ||_H^2
    weak:    E[ phi(X_N^{(dt)}) ] - E[ phi(X_{2N}^{(dt/2)}) ]

where both trajectories of a pair are driven by the same noise (the
coarse increments are the pairwise sums of the fine ones) and pairs at
different dt use independent streams.  Coupling collapses the variance
of the per-replica differences, which is what lets the weak order be
seen through the Monte Carlo error at all; a telescoping sum of the
per-level increments recovers the gap to a much finer reference step.

Everything here is a pure function of (config, master_seed): replicas
are reduced in index order into preallocated arrays, so results are
bit-identical for any worker count or chunk schedule.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import t as student_t

from .grid import GridFunction, Mesh, norm_h, norm_h_values
from .noise import NoisePlan, standard_normals
from .schemes import SchemeSpec, Stepper, is_blown

_CHUNK = 256          # replicas advanced together; fixed so results never depend on it
_STEP_BLOCK = 128     # fine steps of noise generated per replica at a time

TEST_FUNCTIONS = ("exp_neg5_h2",)


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence study: grid, horizon, replica budget, scheme family."""

    T: float
    mesh: Mesh
    dt_list: tuple
    n_replicas: int
    scheme: SchemeSpec
    master_seed: int
    test_function: str = "exp_neg5_h2"
    localization_M: float | None = None
    x0_kind: str = "zero"
    x0_scale: float = 1.0
    noise_amplitude: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if self.n_replicas < 2:
            raise ValueError("n_replicas must be >= 2")
        if self.test_function not in TEST_FUNCTIONS:
            raise ValueError(f"unknown test function {self.test_function!r}")
        dts = tuple(float(d) for d in self.dt_list)
        object.__setattr__(self, "dt_list", dts)
        for dt in dts:
            _level_tag(self.T, dt)
        for a, b in zip(dts, dts[1:]):
            if abs(a / b - 2.0) > 1e-9:
                raise ValueError("dt_list must decrease by factors of 2")

    def spec_at(self, dt: float) -> SchemeSpec:
        return replace(self.scheme, dt=dt)


def _level_tag(T: float, dt: float) -> int:
    """Index k of the dyadic step dt = T * 2^-k, used to key noise streams."""
    k = round(math.log2(T / dt))
    if k < 0 or abs(T * 2.0 ** (-k) - dt) > 1e-9 * dt:
        raise ValueError(f"dt={dt} is not T*2^-k for the horizon T={T}")
    return k


def _stream_id(tag: int, replica: int) -> int:
    # distinct streams per (dt column, replica); replicas fit in 32 bits
    return (tag << 32) | replica


def initial_condition(mesh: Mesh, kind: str = "zero", scale: float = 1.0) -> GridFunction:
    """Initial fields used by the studies: zero, scaled first sine mode,
    or a two-phase step profile (-scale left of 1/2, +scale right)."""
    xi = mesh.nodes
    if kind == "zero":
        values = np.zeros(mesh.n_interior)
    elif kind == "sine":
        values = scale * np.sin(np.pi * xi)
    elif kind == "step":
        values = scale * np.sign(xi - 0.5)
    else:
        raise ValueError(f"unknown initial condition {kind!r}")
    return GridFunction(mesh, values)


def evaluate_test_function(x: GridFunction) -> float:
    """phi(x) = exp(-5 ||x||_H^2), bounded in (0, 1]."""
    return float(np.exp(-5.0 * norm_h(x) ** 2))


def _phi_batch(values: np.ndarray, dx: float) -> np.ndarray:
    return np.exp(-5.0 * dx * np.sum(values * values, axis=-1))


# ---------------------------------------------------------------------------
# coupled two-level ensembles


@dataclass(frozen=True)
class CoupledEnsemble:
    """Per-replica records of a coarse/fine pair driven by shared noise."""

    dt: float
    sq_err: np.ndarray     # ||coarse - fine||_H^2 at time N*dt
    phi_coarse: np.ndarray
    phi_fine: np.ndarray
    sup_e: np.ndarray      # running sup norm over both trajectories
    blown: np.ndarray      # bool; either trajectory blew up


def _run_coupled_chunk(
    cfg, dt, r0, r1, stepper_c, stepper_f, out_sq, out_pc, out_pf, out_sup, out_blown
):
    mesh = cfg.mesh
    n = mesh.n_interior
    tag = _level_tag(cfg.T, dt)
    dt_f = dt / 2.0
    n_fine = 2 * int(np.floor(cfg.T / dt + 1e-9))
    scale = cfg.noise_amplitude * math.sqrt(dt_f / mesh.dx)

    plans = [
        NoisePlan(cfg.master_seed, _stream_id(tag, r), mesh, dt_f, n_levels=1)
        for r in range(r0, r1)
    ]
    c = len(plans)
    x0 = initial_condition(mesh, cfg.x0_kind, cfg.x0_scale).values
    xf = np.tile(x0, (c, 1))
    xc = xf.copy()
    sup = np.full(c, np.abs(x0).max() if n else 0.0)
    blown = np.zeros(c, dtype=bool)

    def note(x):
        nonlocal sup, blown
        amax = np.abs(x).max(axis=-1)
        with np.errstate(invalid="ignore"):
            bad = ~np.isfinite(amax) | (amax > 1e8)
        blown |= bad
        sup = np.where(blown, sup, np.maximum(sup, amax))

    s = 0
    while s < n_fine:
        b = min(_STEP_BLOCK, n_fine - s)
        dwf = np.empty((c, b, n))
        for i, plan in enumerate(plans):
            dwf[i] = standard_normals(plan, s, s + b)
        dwf *= scale
        dwc = dwf[:, 0::2, :] + dwf[:, 1::2, :]
        for i in range(b):
            xf = stepper_f.step_values(xf, dwf[:, i, :])
            note(xf)
        for i in range(b // 2):
            xc = stepper_c.step_values(xc, dwc[:, i, :])
            note(xc)
        s += b

    diff = xc - xf
    out_sq[r0:r1] = mesh.dx * np.sum(diff * diff, axis=-1)
    out_pc[r0:r1] = _phi_batch(xc, mesh.dx)
    out_pf[r0:r1] = _phi_batch(xf, mesh.dx)
    out_sup[r0:r1] = sup
    out_blown[r0:r1] = blown


def coupled_ensemble(config: ExperimentConfig, dt: float) -> CoupledEnsemble:
    """Simulate all replicas of the coarse(dt)/fine(dt/2) pair.

    The fine trajectory consumes the level-0 increments of the
    replica's stream and the coarse one their pairwise sums, so both
    see the same underlying path.  Chunks write disjoint slices of the
    result arrays; the chunk size is a fixed constant, which keeps the
    output independent of the thread count.
    """
    spec_c = config.spec_at(dt)
    spec_f = config.spec_at(dt / 2.0)
    stepper_c = Stepper(spec_c, config.mesh)
    stepper_f = Stepper(spec_f, config.mesh)

    R = config.n_replicas
    sq = np.empty(R)
    pc = np.empty(R)
    pf = np.empty(R)
    sup = np.empty(R)
    blown = np.empty(R, dtype=bool)

    tasks = [
        (r0, min(r0 + _CHUNK, R)) for r0 in range(0, R, _CHUNK)
    ]

    def work(bounds):
        r0, r1 = bounds
        _run_coupled_chunk(
            config, dt, r0, r1, stepper_c, stepper_f, sq, pc, pf, sup, blown
        )

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(work, tasks))
    else:
        for bounds in tasks:
            work(bounds)

    return CoupledEnsemble(dt, sq, pc, pf, sup, blown)


# ---------------------------------------------------------------------------
# estimators and tables


@dataclass(frozen=True)
class LevelResult:
    """One row of a convergence table."""

    dt: float
    estimate: float
    stderr: float
    n_valid: int
    n_blowup: int
    valid: bool


def _reduce(dt, samples, blown, n_replicas) -> LevelResult:
    good = ~blown
    n_valid = int(good.sum())
    n_blowup = n_replicas - n_valid
    if n_valid < 2:
        return LevelResult(dt, math.nan, math.nan, n_valid, n_blowup, False)
    vals = samples[good]
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_valid))
    valid = n_blowup <= 0.01 * n_replicas
    return LevelResult(dt, est, se, n_valid, n_blowup, valid)


def strong_error(config: ExperimentConfig, dt: float) -> LevelResult:
    """Mean-square H-distance between the coupled dt and dt/2 solutions.

    Blown-up replicas are excluded and counted; the row is flagged
    invalid when more than 1% of replicas blow up.
    """
    ens = coupled_ensemble(config, dt)
    return _reduce(dt, ens.sq_err, ens.blown, config.n_replicas)


def weak_error_increment(config: ExperimentConfig, dt: float) -> LevelResult:
    """Coupled estimate of E[phi(X^(dt))] - E[phi(X^(dt/2))]."""
    ens = coupled_ensemble(config, dt)
    return _reduce(
        dt, ens.phi_coarse - ens.phi_fine, ens.blown, config.n_replicas
    )


def weak_error_telescoped(config: ExperimentConfig, dt: float, k_levels: int):
    """Sum of per-level weak increments from dt down to dt/2^(k-1).

    Estimates E[phi(X^(dt))] - E[phi(X^(dt/2^k))]; the levels use
    independent streams and their standard errors combine in
    quadrature.  Returns (estimate, stderr).
    """
    if k_levels < 1:
        raise ValueError("k_levels must be >= 1")
    total = 0.0
    var = 0.0
    for j in range(k_levels):
        row = weak_error_increment(config, dt / 2.0**j)
        if not row.valid:
            raise ValueError(f"invalid level row at dt={dt / 2.0 ** j}")
        total += row.estimate
        var += row.stderr**2
    return total, math.sqrt(var)


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of (dt, estimate, stderr) with a fitted log-log slope."""

    rows: tuple
    slope: float
    slope_half_width: float


def fit_slope(table_or_rows):
    """Least-squares slope of log2|estimate| against log2(dt).

    Only rows that are valid, have a nonzero estimate, and carry a
    standard error below 30% of |estimate| enter the fit; fewer than 3
    such rows is an error.  The half-width is the 95% Student-t
    interval of the slope.
    """
    rows = getattr(table_or_rows, "rows", table_or_rows)
    pts = [
        r
        for r in rows
        if r.valid and r.estimate != 0 and np.isfinite(r.estimate)
        and r.stderr < 0.3 * abs(r.estimate)
    ]
    if len(pts) < 3:
        raise ValueError(f"need >= 3 fittable rows, have {len(pts)}")
    x = np.log2([r.dt for r in pts])
    y = np.log2([abs(r.estimate) for r in pts])
    m = len(pts)
    xb = x - x.mean()
    slope = float(np.dot(xb, y) / np.dot(xb, xb))
    resid = y - y.mean() - slope * xb
    dof = m - 2
    se = math.sqrt(float(np.dot(resid, resid)) / dof / float(np.dot(xb, xb)))
    half = float(student_t.ppf(0.975, dof)) * se
    return slope, half


def _build_table(rows) -> ConvergenceTable:
    try:
        slope, half = fit_slope(rows)
    except ValueError:
        slope, half = math.nan, math.nan
    return ConvergenceTable(tuple(rows), slope, half)


def strong_table(config: ExperimentConfig) -> ConvergenceTable:
    """Strong-error rows for every dt of the config, with fitted slope."""
    return _build_table([strong_error(config, dt) for dt in config.dt_list])


def weak_table(config: ExperimentConfig) -> ConvergenceTable:
    """Per-level weak-increment rows for every dt, with slope of |estimate|."""
    return _build_table(
        [weak_error_increment(config, dt) for dt in config.dt_list]
    )


def telescoped_rows(table: ConvergenceTable):
    """Suffix sums of a weak table: row dt accumulates every increment
    from dt down to the finest listed level (gap to the finest/2 grid)."""
    out = []
    total = 0.0
    var = 0.0
    for row in reversed(table.rows):
        total += row.estimate
        var += row.stderr**2
        out.append(
            LevelResult(
                row.dt, total, math.sqrt(var), row.n_valid, row.n_blowup, row.valid
            )
        )
    return list(reversed(out))


# ---------------------------------------------------------------------------
# localization and moment diagnostics


@dataclass(frozen=True)
class LocalizationStats:
    """Exceedance probability of the sup-norm threshold M and the
    strong-error estimate with the non-exceedance indicator inside."""

    M: float
    prob_exceed: float
    localized_mse: float
    n_valid: int
    n_blowup: int


def localization_scan(config: ExperimentConfig, dt: float, thresholds):
    """Localization stats for several thresholds from one ensemble pass."""
    ens = coupled_ensemble(config, dt)
    good = ~ens.blown
    n_valid = int(good.sum())
    n_blowup = config.n_replicas - n_valid
    out = []
    for M in thresholds:
        exceed = ens.sup_e[good] > M
        inside = ens.sq_err[good] * ~exceed
        out.append(
            LocalizationStats(
                float(M),
                float(exceed.mean()) if n_valid else math.nan,
                float(inside.mean()) if n_valid else math.nan,
                n_valid,
                n_blowup,
            )
        )
    return out


def localization_stats(config: ExperimentConfig, dt: float, M: float) -> LocalizationStats:
    """Exceedance probability and localized mean-square error at one M."""
    return localization_scan(config, dt, [M])[0]


def _run_single_chunk(cfg, dt, r0, r1, stepper, out_sup, out_term, out_blown):
    mesh = cfg.mesh
    n = mesh.n_interior
    tag = _level_tag(cfg.T, dt)
    n_steps = int(np.floor(cfg.T / dt + 1e-9))
    scale = cfg.noise_amplitude * math.sqrt(dt / mesh.dx)
    plans = [
        NoisePlan(cfg.master_seed, _stream_id(tag, r), mesh, dt, n_levels=1)
        for r in range(r0, r1)
    ]
    c = len(plans)
    x = np.tile(initial_condition(mesh, cfg.x0_kind, cfg.x0_scale).values, (c, 1))
    sup = np.full(c, np.abs(x[0]).max() if n else 0.0)
    blown = np.zeros(c, dtype=bool)

    s = 0
    while s < n_steps:
        b = min(_STEP_BLOCK, n_steps - s)
        dw = np.empty((c, b, n))
        for i, plan in enumerate(plans):
            dw[i] = standard_normals(plan, s, s + b)
        dw *= scale
        for i in range(b):
            x = stepper.step_values(x, dw[:, i, :])
            amax = np.abs(x).max(axis=-1)
            with np.errstate(invalid="ignore"):
                bad = ~np.isfinite(amax) | (amax > 1e8)
            blown |= bad
            sup = np.where(blown, sup, np.maximum(sup, amax))
        s += b

    out_sup[r0:r1] = sup
    out_term[r0:r1] = x
    out_blown[r0:r1] = blown


@dataclass(frozen=True)
class SingleEnsemble:
    """Per-replica records of uncoupled trajectories at one dt."""

    dt: float
    sup_e: np.ndarray
    terminal: np.ndarray   # (n_replicas, n_interior)
    blown: np.ndarray


def single_ensemble(config: ExperimentConfig, dt: float) -> SingleEnsemble:
    """Simulate all replicas independently at step size dt."""
    stepper = Stepper(config.spec_at(dt), config.mesh)
    R = config.n_replicas
    sup = np.empty(R)
    term = np.empty((R, config.mesh.n_interior))
    blown = np.empty(R, dtype=bool)
    tasks = [(r0, min(r0 + _CHUNK, R)) for r0 in range(0, R, _CHUNK)]

    def work(bounds):
        r0, r1 = bounds
        _run_single_chunk(config, dt, r0, r1, stepper, sup, term, blown)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(work, tasks))
    else:
        for bounds in tasks:
            work(bounds)
    return SingleEnsemble(dt, sup, term, blown)


def sup_norm_moment(config: ExperimentConfig, dt: float):
    """Monte Carlo estimate of E[sup_n |X_n|_E^2] with its standard error."""
    ens = single_ensemble(config, dt)
    good = ~ens.blown
    vals = ens.sup_e[good] ** 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(good.sum()))
