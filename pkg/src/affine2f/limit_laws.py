"""Theoretical limit objects for the three drift regimes.

Subcritical: the estimator error scaled by sqrt(T) is asymptotically
normal with sandwich covariance [E G]^-1 E(Gtilde) [E G]^-1, every entry
a stationary moment. Critical: the scaled error converges to an explicit
functional of a degenerate auxiliary pair on [0, 1], which we sample.
Supercritical: the error under exponential scaling is mixed normal,
V^-1 eta xi with (V, eta) built from the almost-sure limits
V_Y = lim e^{bt} Y_t and V_X = lim e^{gamma t} X_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveVY, SingularGram
from .estimators import (
    COND_LIMIT,
    functionals_from_arrays,
    functionals_from_path,
    gram_blocks,
)
from .model import ModelSpec, make_spec, validate_spec
from .moments import stationary_moments
from .rng import RngStream
from .simulate import (
    PathGrid,
    simulate_critical_limit_process,
    simulate_ensemble,
    simulate_path,
)


def _matrix_text(label: str, m: np.ndarray) -> str:
    rows = [" ".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(m)]
    return "\n".join([label] + rows)


# ---------------------------------------------------------------- subcritical


@dataclass(eq=False)
class SubcriticalLimit:
    """E(G), E(Gtilde) and the sandwich covariance of sqrt(T)(theta_hat - theta)."""

    g_inf: np.ndarray
    g_tilde_inf: np.ndarray
    asym_cov: np.ndarray

    def to_text(self) -> str:
        return "\n".join([
            _matrix_text("g_inf", self.g_inf),
            _matrix_text("g_tilde_inf", self.g_tilde_inf),
            _matrix_text("asym_cov", self.asym_cov),
        ]) + "\n"


def subcritical_limit(spec: ModelSpec) -> SubcriticalLimit:
    """Assemble the asymptotic covariance from stationary moments.

    The Y block of every object involves only (a, b, sigma1); the
    blockwise inverse below preserves that separation bit for bit.
    """
    report = validate_spec(spec, "subcritical-limit")
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    mom = stationary_moments(spec, 3, 2)
    m10, m20, m30 = mom.get(1, 0), mom.get(2, 0), mom.get(3, 0)
    m01, m11, m02 = mom.get(0, 1), mom.get(1, 1), mom.get(0, 2)
    m21, m12 = mom.get(2, 1), mom.get(1, 2)

    g1 = np.array([[1.0, -m10], [-m10, m20]])
    g2 = np.array([[1.0, -m10, -m01], [-m10, m20, m11], [-m01, m11, m02]])
    g_inf = np.zeros((5, 5))
    g_inf[:2, :2] = g1
    g_inf[2:, 2:] = g2

    s1, s2, s3 = spec.sigma1**2, spec.sigma2**2, spec.sigma3**2
    c = spec.rho * spec.sigma1 * spec.sigma2
    gt = np.array([
        [s1 * m10, -s1 * m20, c * m10, -c * m20, -c * m11],
        [-s1 * m20, s1 * m30, -c * m20, c * m30, c * m21],
        [c * m10, -c * m20, s2 * m10 + s3,
         -(s2 * m20 + s3 * m10), -(s2 * m11 + s3 * m01)],
        [-c * m20, c * m30, -(s2 * m20 + s3 * m10),
         s2 * m30 + s3 * m20, s2 * m21 + s3 * m11],
        [-c * m11, c * m21, -(s2 * m11 + s3 * m01),
         s2 * m21 + s3 * m11, s2 * m12 + s3 * m02],
    ])

    g_inv = np.zeros((5, 5))
    g_inv[:2, :2] = np.linalg.inv(g1)
    g_inv[2:, 2:] = np.linalg.inv(g2)
    cov = g_inv @ gt @ g_inv
    cov = 0.5 * (cov + cov.T)  # exact symmetry; matmul roundoff is one-sided
    return SubcriticalLimit(g_inf=g_inf, g_tilde_inf=gt, asym_cov=cov)


# ------------------------------------------------------------------- critical


def critical_limit_blocks(fn, a, alpha, sigma1, sigma2, rho):
    """Gram blocks and target functionals of the critical limit vector.

    fn holds the path functionals of the auxiliary pair on [0, 1]
    (scalars for one draw, arrays for a stack of draws). The additive
    X noise of the original model does not survive the time rescaling,
    so no sigma3 appears here: the targets are the Ito expansions of
    the auxiliary pair's own martingale integrals, whose X quadratic
    variation is sigma2^2 times the occupied Y mass.
    """
    g1, g2 = gram_blocks(fn)
    y1 = np.asarray(fn.y_end, dtype=float)
    x1 = np.asarray(fn.x_end, dtype=float)
    t1 = np.stack([
        y1 - a,
        -0.5 * y1**2 + (a + 0.5 * sigma1**2) * np.asarray(fn.int_y),
    ], axis=-1)
    t2 = np.stack([
        x1 - alpha,
        -y1 * x1 + (alpha + rho * sigma1 * sigma2) * np.asarray(fn.int_y)
        + np.asarray(fn.s_x_dy),
        -0.5 * x1**2 + alpha * np.asarray(fn.int_x)
        + 0.5 * sigma2**2 * np.asarray(fn.int_y),
    ], axis=-1)
    return g1, t1, g2, t2


def _solve_critical(g1, t1, g2, t2):
    c1, c2 = np.linalg.cond(g1), np.linalg.cond(g2)
    if not (c1 <= COND_LIMIT and c2 <= COND_LIMIT):
        raise SingularGram(
            f"degenerate critical draw: conditions {c1:.3e}, {c2:.3e}",
            cond=float(max(c1, c2)),
        )
    return np.concatenate([np.linalg.solve(g1, t1), np.linalg.solve(g2, t2)])


def critical_limit_sample(
    a: float,
    alpha: float,
    sigma1: float,
    sigma2: float,
    rho: float,
    dt: float,
    rng: RngStream,
    max_redraws: int = 50,
    return_redraws: bool = False,
):
    """One draw of the critical limit of (a_hat-a, T b_hat, alpha_hat-alpha,
    T beta_hat, T gamma_hat).

    Simulates the auxiliary pair from (0, 0), assembles the two blocks,
    and solves. Near-singular draws (a finite-dt artifact; the limit law
    is supported on invertible Grams) are rejected and redrawn from
    spawned substreams, up to max_redraws.
    """
    last: SingularGram | None = None
    for attempt in range(max_redraws + 1):
        sub = rng if attempt == 0 else rng.spawn(attempt)
        path = simulate_critical_limit_process(a, alpha, sigma1, sigma2, rho,
                                               dt, sub)
        blocks = critical_limit_blocks(functionals_from_path(path),
                                       a, alpha, sigma1, sigma2, rho)
        try:
            vec = _solve_critical(*blocks)
        except SingularGram as err:
            last = err
            continue
        return (vec, attempt) if return_redraws else vec
    raise SingularGram(
        f"no invertible critical draw after {max_redraws} redraws: {last}",
        cond=last.cond if last is not None else None,
    )


def critical_limit_batch(
    n_draws: int,
    a: float,
    alpha: float,
    sigma1: float,
    sigma2: float,
    rho: float,
    dt: float,
    rng: RngStream,
    max_redraws: int = 50,
) -> tuple[np.ndarray, int]:
    """n_draws critical limit samples, simulated as one vectorized ensemble.

    Returns (draws, n_redrawn) where draws has shape (n_draws, 5). Rows
    whose Gram blocks fail the condition threshold are redrawn one at a
    time from spawned streams and counted.
    """
    aux = make_spec(a, 0.0, alpha, 0.0, 0.0, sigma1, sigma2, 0.0, rho)
    res = simulate_ensemble(aux, 1.0, dt, n_paths=n_draws, rng=rng,
                            record="paths")
    fn = functionals_from_arrays(res.y, res.x, dt)
    g1, t1, g2, t2 = critical_limit_blocks(fn, a, alpha, sigma1, sigma2, rho)
    c1, c2 = np.linalg.cond(g1), np.linalg.cond(g2)
    ok = (c1 <= COND_LIMIT) & (c2 <= COND_LIMIT)
    out = np.full((n_draws, 5), np.nan)
    if ok.any():
        out[ok, :2] = np.linalg.solve(g1[ok], t1[ok, :, None])[..., 0]
        out[ok, 2:] = np.linalg.solve(g2[ok], t2[ok, :, None])[..., 0]
    redrawn = 0
    for i in np.nonzero(~ok)[0]:
        out[i] = critical_limit_sample(a, alpha, sigma1, sigma2, rho,
                                       dt, rng.spawn(n_draws + int(i)),
                                       max_redraws=max_redraws)
        redrawn += 1
    return out, redrawn


# --------------------------------------------------------------- supercritical


@dataclass(eq=False)
class SupercriticalLimit:
    """One realization of the random scaling objects of the mixed-normal law."""

    v_y_sample: float
    v_x_sample: float
    v_matrix: np.ndarray
    eta_sq: np.ndarray

    def to_text(self) -> str:
        return "\n".join([
            f"v_y_sample {self.v_y_sample:.17g}",
            f"v_x_sample {self.v_x_sample:.17g}",
            _matrix_text("v_matrix", self.v_matrix),
            _matrix_text("eta_sq", self.eta_sq),
        ]) + "\n"


def v_matrix(b: float, gamma: float, v_y: float, v_x: float) -> np.ndarray:
    """The scaling matrix V of the supercritical limit."""
    vy2 = v_y * v_y
    return np.array([
        [1.0, v_y / b, 0.0, 0.0, 0.0],
        [0.0, -vy2 / (2.0 * b), 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, v_y / b, v_x / gamma],
        [0.0, 0.0, 0.0, -vy2 / (2.0 * b), -v_y * v_x / (b + gamma)],
        [0.0, 0.0, 0.0, -v_y * v_x / (b + gamma), -v_x**2 / (2.0 * gamma)],
    ])


def v_det_closed_form(b: float, gamma: float, v_y: float, v_x: float) -> float:
    return (-((b - gamma) ** 2) * v_y**4 * v_x**2
            / (8.0 * (b + gamma) ** 2 * b**2 * gamma))


def eta_sq_matrix(
    b: float,
    gamma: float,
    v_y: float,
    v_x: float,
    sigma1: float,
    sigma2: float,
    rho: float,
) -> np.ndarray:
    """The displayed eta eta^T matrix; every cross block carries rho*sigma1*sigma2."""
    s1, s2 = sigma1**2, sigma2**2
    c = rho * sigma1 * sigma2
    w1 = -v_y / b
    w2 = v_y**2 / (2.0 * b)
    w3 = -v_y**3 / (3.0 * b)
    u1 = v_y * v_x / (b + gamma)
    u2 = -(v_y**2) * v_x / (2.0 * b + gamma)
    u3 = -v_y * v_x**2 / (b + 2.0 * gamma)
    return np.array([
        [s1 * w1, s1 * w2, c * w1, c * w2, c * u1],
        [s1 * w2, s1 * w3, c * w2, c * w3, c * u2],
        [c * w1, c * w2, s2 * w1, s2 * w2, s2 * u1],
        [c * w2, c * w3, s2 * w2, s2 * w3, s2 * u2],
        [c * u1, c * u2, s2 * u1, s2 * u2, s2 * u3],
    ])


def eta_factor(eta_sq: np.ndarray) -> np.ndarray:
    """Symmetric square root; eigenvalues negative from roundoff are clipped."""
    w, u = np.linalg.eigh(eta_sq)
    root = (u * np.sqrt(np.clip(w, 0.0, None))) @ u.T
    return 0.5 * (root + root.T)  # matmul roundoff is one-sided


def supercritical_limit_sample(
    spec: ModelSpec,
    T_probe: float | None,
    dt: float,
    rng: RngStream,
) -> tuple[SupercriticalLimit, np.ndarray]:
    """Probe V_Y, V_X on one path, then draw V^-1 eta xi.

    The probe extracts e^{bT} Y_T and e^{gamma T} X_T at a single horizon
    (default 30/|b|; the remaining drift of the products is exponentially
    small there). xi is standard normal from a substream never touched by
    the path simulation, realizing the independence in the limit law.
    """
    report = validate_spec(spec, "supercritical-limit")
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    b, gamma = spec.b, spec.gamma
    if T_probe is None:
        T_probe = 30.0 / abs(b)
    path = simulate_path(spec, T_probe, dt, rng=rng)
    T = path.horizon
    v_y = math.exp(b * T) * float(path.y[-1])
    v_x = math.exp(gamma * T) * float(path.x[-1])
    if not v_y > 0.0:
        raise NonPositiveVY(
            f"probe gave e^(bT) Y_T = {v_y!r}; the Y factor died out "
            "(longer T_probe cannot fix an absorbed path)"
        )
    V = v_matrix(b, gamma, v_y, v_x)
    eta2 = eta_sq_matrix(b, gamma, v_y, v_x, spec.sigma1, spec.sigma2,
                         spec.rho)
    xi = rng.generator(4).standard_normal(5)
    draw = np.linalg.solve(V, eta_factor(eta2) @ xi)
    limit = SupercriticalLimit(v_y_sample=v_y, v_x_sample=v_x, v_matrix=V,
                               eta_sq=eta2)
    return limit, draw
