"""Replicated simulate-estimate runs and their distributional scorecards.

A plan fixes the model, horizon, grid, and replication budget; running it
produces scaled estimation errors, one row per replication seed, plus the
comparison against the matching limit distribution: a normal law with the
sandwich covariance in the subcritical regime, Monte Carlo reference draws
in the critical and supercritical ones.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ExcessiveExclusions
from .estimators import (
    COND_LIMIT,
    PathFunctionals,
    functionals_from_arrays,
    functionals_from_path,
    gram_blocks,
    solve_continuous,
    target_blocks,
)
from .limit_laws import critical_limit_batch, subcritical_limit, supercritical_limit_sample
from .model import ModelSpec, Regime, classify_regime, validate_spec
from .rng import RngStream
from .simulate import SCHEMES, euler_paths_per_stream, simulate_path

# fraction of replications allowed to fail with a singular Gram matrix
EXCLUSION_CAP = 0.01

_PURPOSE = {
    Regime.SUBCRITICAL: "subcritical-limit",
    Regime.CRITICAL: "critical-limit",
    Regime.SUPERCRITICAL: "supercritical-limit",
}

# KS thresholds: asymptotic 5% critical values at the reference sizes
# (R = 2000 one-sample, R = 1000 paired two-sample), doubled to leave
# room for time-discretization bias in the simulated errors.
ONE_SAMPLE_KS_TOL = 0.05
TWO_SAMPLE_KS_TOL = 0.1
FROBENIUS_TOL = 0.10


def scale_vector(regime: Regime, T: float, b: float, gamma: float) -> np.ndarray:
    """Per-component normalization applied to theta_hat - theta."""
    if regime is Regime.SUBCRITICAL:
        return np.full(5, math.sqrt(T))
    if regime is Regime.CRITICAL:
        return np.array([1.0, T, 1.0, T, T])
    grow = math.exp(-b * T / 2.0)
    return np.array([
        T / grow, grow, T / grow, grow, math.exp((b - 2.0 * gamma) * T / 2.0),
    ])


@dataclass(frozen=True)
class ExperimentPlan:
    spec: ModelSpec
    T: float
    dt: float
    replications: int
    base_seed: int
    scheme: str = "exact_y_euler_x"
    regime: Regime = field(init=False)

    def __post_init__(self):
        if not self.T > 0.0 or not self.dt > 0.0:
            raise ValueError("T and dt must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        regime = classify_regime(self.spec.drift)
        report = validate_spec(self.spec, _PURPOSE[regime])
        if not report.ok:
            raise ValueError("; ".join(report.violations))
        object.__setattr__(self, "regime", regime)

    def scales(self) -> np.ndarray:
        return scale_vector(self.regime, self.T, self.spec.b, self.spec.gamma)


@dataclass(frozen=True)
class LimitLawReport:
    plan: ExperimentPlan
    theory: str
    scaled_errors: np.ndarray
    replication_ids: np.ndarray
    excluded_ids: np.ndarray
    component_mean: np.ndarray
    component_sd: np.ndarray
    cov_hat: np.ndarray
    ks_distance: np.ndarray
    ks_pass: np.ndarray
    ks_tolerance: float
    theory_cov: np.ndarray | None = None
    frobenius_gap: float | None = None
    frobenius_tolerance: float | None = None
    reference_draws: np.ndarray | None = None
    vx_sign_counts: tuple | None = None

    @property
    def included(self) -> int:
        return int(self.replication_ids.size)

    @property
    def excluded(self) -> int:
        return int(self.excluded_ids.size)

    def to_text(self) -> str:
        def row(vals):
            return " ".join("%.17g" % v for v in np.asarray(vals, dtype=float))

        lines = [
            f"regime = {self.plan.regime.name.lower()}",
            f"theory = {self.theory}",
            f"replications = {self.plan.replications}",
            f"included = {self.included}",
            f"excluded = {self.excluded}",
            "component_mean = " + row(self.component_mean),
            "component_sd = " + row(self.component_sd),
            "ks_distance = " + row(self.ks_distance),
            "ks_pass = " + " ".join("yes" if p else "no" for p in self.ks_pass),
            "ks_tolerance = %.17g" % self.ks_tolerance,
        ]
        if self.frobenius_gap is not None:
            lines.append("frobenius_gap = %.17g" % self.frobenius_gap)
            lines.append("frobenius_pass = "
                         + ("yes" if self.frobenius_gap <= self.frobenius_tolerance
                            else "no"))
        if self.vx_sign_counts is not None:
            lines.append("vx_signs = %d positive, %d negative"
                         % self.vx_sign_counts)
        lines.append("cov_hat =")
        lines.extend("  " + row(r) for r in self.cov_hat)
        if self.theory_cov is not None:
            lines.append("theory_cov =")
            lines.extend("  " + row(r) for r in self.theory_cov)
        return "\n".join(lines)


def _theta_true(spec: ModelSpec) -> np.ndarray:
    d = spec.drift
    return np.array([d.a, d.b, d.alpha, d.beta, d.gamma])


_FN_FIELDS = tuple(PathFunctionals.__dataclass_fields__)


def _collect_functionals_per_path(spec, T, dt, scheme, streams):
    """One scalar simulation per stream, reduced to stacked functionals."""
    singles = [
        functionals_from_path(simulate_path(spec, T, dt, scheme, stream))
        for stream in streams
    ]
    stacked = PathFunctionals(**{
        name: np.array([getattr(s, name) for s in singles])
        for name in _FN_FIELDS
    })
    return stacked, np.asarray(stacked.x_end, dtype=float)


def _collect_functionals_batched(spec, T, dt, streams, chunk, time_block):
    parts = [
        functionals_from_arrays(y, x, dt)
        for _, y, x in euler_paths_per_stream(
            spec, T, dt, streams, chunk=chunk, time_block=time_block)
    ]
    # every chunk rides the same grid, so horizon stays scalar
    data = {
        name: np.concatenate([np.atleast_1d(getattr(p, name)) for p in parts])
        for name in _FN_FIELDS if name != "horizon"
    }
    stacked = PathFunctionals(horizon=parts[0].horizon, **data)
    return stacked, np.asarray(stacked.x_end, dtype=float)


def _theta_rows(fn: PathFunctionals, y_only: bool = False) -> np.ndarray:
    """Per-path estimates with NaN rows where a condition gate fails.

    y_only solves just the 2x2 block (the supercritical X Gram overflows
    any double-precision condition budget once exp(2|gamma|T) is large)
    and leaves the last three components NaN by contract.
    """
    n = np.asarray(fn.int_y).shape[0]
    thetas = np.full((n, 5), np.nan)
    if y_only:
        g1, _ = gram_blocks(fn)
        f1, _ = target_blocks(fn)
        cond1 = np.linalg.cond(g1)
        ok = cond1 <= COND_LIMIT
        if ok.any():
            thetas[ok, :2] = np.linalg.solve(g1[ok], f1[ok, :, None])[..., 0]
        return thetas
    theta, cond1, cond2 = solve_continuous(fn)
    bad = ~((cond1 <= COND_LIMIT) & (cond2 <= COND_LIMIT))
    theta[bad] = np.nan
    thetas[:] = theta
    return thetas


def _apply_exclusion_cap(thetas, replications, y_only: bool = False):
    cols = thetas[:, :2] if y_only else thetas
    good = np.isfinite(cols).all(axis=1)
    excluded = int(replications - good.sum())
    if excluded > EXCLUSION_CAP * replications:
        raise ExcessiveExclusions(
            f"{excluded} of {replications} replications were singular "
            f"(cap {EXCLUSION_CAP:.0%})"
        )
    return good


def run_experiment(
    plan: ExperimentPlan,
    engine: str = "per-path",
    n_reference: int = 1000,
    reference_dt: float | None = None,
    chunk: int = 64,
    time_block: int = 8192,
) -> LimitLawReport:
    """Run the replications and score the scaled errors against theory.

    engine="per-path" replays replication r on its own RngStream(base_seed,
    r) through the scalar simulator; engine="batched" produces the very
    same rows (full_euler scheme only) with chunked vector stepping.
    """
    if engine not in ("per-path", "batched"):
        raise ValueError(f"engine must be 'per-path' or 'batched', got {engine!r}")
    spec = plan.spec
    streams = [RngStream(plan.base_seed, r) for r in range(plan.replications)]
    if engine == "batched":
        if plan.scheme != "full_euler":
            raise ValueError("the batched engine only steps the full_euler scheme")
        fn, x_end = _collect_functionals_batched(
            spec, plan.T, plan.dt, streams, chunk, time_block)
    else:
        fn, x_end = _collect_functionals_per_path(
            spec, plan.T, plan.dt, plan.scheme, streams)
    thetas = _theta_rows(fn)

    good = _apply_exclusion_cap(thetas, plan.replications)
    if good.sum() < 2:
        raise ValueError("summary statistics need at least 2 included replications")
    ids = np.flatnonzero(good)
    errors = (thetas[good] - _theta_true(spec)) * plan.scales()

    mean = errors.mean(axis=0)
    sd = errors.std(axis=0, ddof=1)
    cov_hat = np.cov(errors, rowvar=False, ddof=1)

    theory_cov = frob = frob_tol = None
    reference = None
    vx_counts = None
    ks = np.empty(5)
    if plan.regime is Regime.SUBCRITICAL:
        theory = "normal"
        theory_cov = subcritical_limit(spec).asym_cov
        marginal_sd = np.sqrt(theory_cov.diagonal())
        for j in range(5):
            ks[j] = stats.kstest(errors[:, j], "norm",
                                 args=(0.0, marginal_sd[j])).statistic
        tol = ONE_SAMPLE_KS_TOL
        frob = float(np.linalg.norm(cov_hat - theory_cov)
                     / np.linalg.norm(theory_cov))
        frob_tol = FROBENIUS_TOL
    else:
        theory = "sample-based"
        tol = TWO_SAMPLE_KS_TOL
        if n_reference < 1:
            raise ValueError("sample-based comparison needs n_reference >= 1")
        ref_dt = plan.dt if reference_dt is None else reference_dt
        ref_seed = RngStream(plan.base_seed, plan.replications)
        if plan.regime is Regime.CRITICAL:
            reference, _ = critical_limit_batch(
                n_reference, spec.a, spec.alpha, spec.sigma1, spec.sigma2,
                spec.rho, ref_dt, ref_seed)
        else:
            reference = np.empty((n_reference, 5))
            for j in range(n_reference):
                _, reference[j] = supercritical_limit_sample(
                    spec, None, ref_dt,
                    RngStream(plan.base_seed, plan.replications + j))
            vx_counts = (int((x_end[good] > 0.0).sum()),
                         int((x_end[good] < 0.0).sum()))
        for j in range(5):
            ks[j] = stats.ks_2samp(errors[:, j], reference[:, j]).statistic

    return LimitLawReport(
        plan=plan,
        theory=theory,
        scaled_errors=errors,
        replication_ids=ids,
        excluded_ids=np.flatnonzero(~good),
        component_mean=mean,
        component_sd=sd,
        cov_hat=cov_hat,
        ks_distance=ks,
        ks_pass=ks <= tol,
        ks_tolerance=tol,
        theory_cov=theory_cov,
        frobenius_gap=frob,
        frobenius_tolerance=frob_tol,
        reference_draws=reference,
        vx_sign_counts=vx_counts,
    )


@dataclass(frozen=True)
class SweepRow:
    T: float
    median_abs_error: np.ndarray
    q90_abs_error: np.ndarray
    included: int
    excluded: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    trend: np.ndarray  # fraction of T-steps where the q90 error shrank

    def to_text(self) -> str:
        lines = ["T included excluded median_abs... q90_abs..."]
        for r in self.rows:
            vals = " ".join("%.17g" % v for v in
                            np.concatenate([r.median_abs_error, r.q90_abs_error]))
            lines.append("%.17g %d %d %s" % (r.T, r.included, r.excluded, vals))
        lines.append("q90_decreasing_fraction = "
                     + " ".join("%.17g" % t for t in self.trend))
        return "\n".join(lines)


def consistency_sweep(
    spec: ModelSpec,
    T_list,
    dt: float,
    replications: int,
    rng: RngStream,
    scheme: str = "exact_y_euler_x",
    engine: str = "per-path",
    chunk: int = 64,
    time_block: int = 8192,
) -> SweepResult:
    """Absolute-error quantiles of the drift estimator across horizons.

    Subcritical models back the full five-component claim; supercritical
    ones are admitted for the second component (the Y reversion rate)
    only, the others stay informational.
    """
    if engine not in ("per-path", "batched"):
        raise ValueError(f"engine must be 'per-path' or 'batched', got {engine!r}")
    regime = classify_regime(spec.drift)
    if regime is Regime.CRITICAL:
        raise ValueError("quantile shrinkage needs a strictly noncritical regime")
    report = validate_spec(spec, _PURPOSE[regime])
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    if len(T_list) < 2:
        raise ValueError("need at least two horizons to exhibit a trend")
    if replications < 2:
        raise ValueError("need at least two replications per horizon")
    theta = _theta_true(spec)
    y_only = regime is Regime.SUPERCRITICAL
    rows = []
    for i, T in enumerate(T_list):
        branch = rng.spawn(i)
        streams = [branch.spawn(r) for r in range(replications)]
        if engine == "batched":
            if scheme != "full_euler":
                raise ValueError("the batched engine only steps the full_euler scheme")
            fn, _ = _collect_functionals_batched(spec, T, dt, streams,
                                                 chunk, time_block)
        else:
            fn, _ = _collect_functionals_per_path(spec, T, dt, scheme, streams)
        thetas = _theta_rows(fn, y_only=y_only)
        good = _apply_exclusion_cap(thetas, replications, y_only=y_only)
        abs_err = np.abs(thetas[good] - theta)
        rows.append(SweepRow(
            T=float(T),
            median_abs_error=np.median(abs_err, axis=0),
            q90_abs_error=np.quantile(abs_err, 0.9, axis=0),
            included=int(good.sum()),
            excluded=int(replications - good.sum()),
        ))
    q90 = np.stack([r.q90_abs_error for r in rows])
    trend = (q90[1:] < q90[:-1]).mean(axis=0).astype(float)
    trend[np.isnan(q90).any(axis=0)] = np.nan
    return SweepResult(rows=tuple(rows), trend=trend)
