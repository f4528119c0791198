"""Conditional least squares estimation of the five drift constants.

Three flavors:

  discrete      normal equations on the sampled increments, solved for the
                transformed quantities (c, d, delta, epsilon, zeta), then
                mapped back through the exact inverse of the one-step
                conditional-mean map g_n.
  approximate   n times the transformed estimate, the first-order Taylor
                shortcut; differs from the exact back-transform by O(1/n).
  continuous    the integral normal equations G_T theta = f_T with time
                integrals as left-point Riemann sums and stochastic
                integrals as left-point Ito sums.

The two estimation blocks never mix: (a, b) come from the Y series alone,
(alpha, beta, gamma) from the X series given Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import OutOfDomain, SingularGram
from .kernels import i1, i2, psi
from .model import DiffusionParams, DriftParams
from .simulate import PathGrid

COND_LIMIT = 1e12


@dataclass(eq=False)
class PathFunctionals:
    """Everything the continuous estimator needs from a path.

    Scalar-valued for a single path; array-valued (one entry per path)
    when accumulated by the batched replication engine.
    """

    horizon: float
    y0: np.ndarray | float
    x0: np.ndarray | float
    y_end: np.ndarray | float
    x_end: np.ndarray | float
    int_y: np.ndarray | float
    int_y2: np.ndarray | float
    int_x: np.ndarray | float
    int_xy: np.ndarray | float
    int_x2: np.ndarray | float
    s_y_dy: np.ndarray | float
    s_y_dx: np.ndarray | float
    s_x_dx: np.ndarray | float
    s_x_dy: np.ndarray | float


def functionals_from_arrays(y: np.ndarray, x: np.ndarray, dt: float) -> PathFunctionals:
    """Left-point sums over the grid; last axis is time."""
    yl, xl = y[..., :-1], x[..., :-1]
    dy, dx = np.diff(y, axis=-1), np.diff(x, axis=-1)
    return PathFunctionals(
        horizon=(y.shape[-1] - 1) * dt,
        # copies, not views: a view would pin the whole path buffer for
        # as long as a batch collector keeps the summary alive
        y0=y[..., 0].copy(), x0=x[..., 0].copy(),
        y_end=y[..., -1].copy(), x_end=x[..., -1].copy(),
        int_y=yl.sum(axis=-1) * dt,
        int_y2=(yl * yl).sum(axis=-1) * dt,
        int_x=xl.sum(axis=-1) * dt,
        int_xy=(xl * yl).sum(axis=-1) * dt,
        int_x2=(xl * xl).sum(axis=-1) * dt,
        s_y_dy=(yl * dy).sum(axis=-1),
        s_y_dx=(yl * dx).sum(axis=-1),
        s_x_dx=(xl * dx).sum(axis=-1),
        s_x_dy=(xl * dy).sum(axis=-1),
    )


def functionals_from_path(path: PathGrid) -> PathFunctionals:
    return functionals_from_arrays(path.y, path.x, path.dt)


def gram_blocks(fn: PathFunctionals) -> tuple[np.ndarray, np.ndarray]:
    """G_T blocks, stacked over leading axes when fn holds arrays."""
    T = np.broadcast_arrays(np.asarray(fn.horizon, dtype=float), np.asarray(fn.int_y))[0]
    g1 = np.stack(
        [
            np.stack([T, -np.asarray(fn.int_y)], axis=-1),
            np.stack([-np.asarray(fn.int_y), np.asarray(fn.int_y2)], axis=-1),
        ],
        axis=-2,
    )
    g2 = np.stack(
        [
            np.stack([T, -np.asarray(fn.int_y), -np.asarray(fn.int_x)], axis=-1),
            np.stack(
                [-np.asarray(fn.int_y), np.asarray(fn.int_y2), np.asarray(fn.int_xy)],
                axis=-1,
            ),
            np.stack(
                [-np.asarray(fn.int_x), np.asarray(fn.int_xy), np.asarray(fn.int_x2)],
                axis=-1,
            ),
        ],
        axis=-2,
    )
    return g1, g2


def target_blocks(fn: PathFunctionals) -> tuple[np.ndarray, np.ndarray]:
    """f_T blocks matching gram_blocks."""
    f1 = np.stack(
        [np.asarray(fn.y_end - fn.y0, dtype=float), -np.asarray(fn.s_y_dy)], axis=-1
    )
    f2 = np.stack(
        [
            np.asarray(fn.x_end - fn.x0, dtype=float),
            -np.asarray(fn.s_y_dx),
            -np.asarray(fn.s_x_dx),
        ],
        axis=-1,
    )
    return f1, f2


@dataclass(eq=False)
class TransformedEstimate:
    """Solution of the discrete normal equations, before back-transform."""

    c: float
    d: float
    delta: float
    epsilon: float
    zeta: float
    gram1: np.ndarray
    gram2: np.ndarray
    n: float  # sampling frequency: steps per unit time
    cond1: float
    cond2: float
    x_block_error: str | None = None


@dataclass(eq=False)
class DriftEstimate:
    """A five-vector estimate (a, b, alpha, beta, gamma) and its pedigree."""

    theta_hat: np.ndarray
    source: str  # "discrete" | "approximate" | "continuous"
    n: float | None = None
    gram_cont: tuple[np.ndarray, np.ndarray] | None = None
    conds: tuple[float, float] | None = None


def _solve_block(G: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    cond = float(np.linalg.cond(G))
    if not cond <= COND_LIMIT:
        # callers reject or flag these rows; never divide by a zero det
        return np.full(rhs.shape, np.nan), cond
    if G.shape == (2, 2):
        # adjugate form so zero-residual fits with representable
        # coefficients come back exact, not within a QR rounding cloud
        det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        return np.array([
            (G[1, 1] * rhs[0] - G[0, 1] * rhs[1]) / det,
            (G[0, 0] * rhs[1] - G[1, 0] * rhs[0]) / det,
        ]), cond
    # rank-revealing QR for the 3x3 block; short paths sit close to the
    # condition gate and a plain LU would hide how marginal they are
    sol = scipy.linalg.lstsq(G, rhs, lapack_driver="gelsy")[0]
    return sol, cond


def clse_discrete_transformed(path: PathGrid, stride: int = 1) -> TransformedEstimate:
    """Least squares on the subsampled increment regressions.

    Minimizes sum (dY_i - (c - d Y_{i-1}))^2 and
    sum (dX_i - (delta - epsilon Y_{i-1} - zeta X_{i-1}))^2 over the
    series thinned to every stride-th point (trailing partial interval
    dropped). A singular Y block raises; a singular X block leaves
    (delta, epsilon, zeta) as NaN with the failure recorded, since the Y
    block is still informative.
    """
    if stride < 1:
        raise ValueError(f"stride must be a positive integer, got {stride}")
    y = path.y[::stride]
    x = path.x[::stride]
    if y.size < 3:
        raise ValueError(f"need at least 3 subsampled points, got {y.size}")
    n_freq = 1.0 / (stride * path.dt)
    yl, xl = y[:-1], x[:-1]
    dy, dx = np.diff(y), np.diff(x)
    m = float(yl.size)

    sy, sy2 = yl.sum(), (yl * yl).sum()
    gram1 = np.array([[m, -sy], [-sy, sy2]])
    phi1 = np.array([y[-1] - y[0], -(yl * dy).sum()])
    (c, d), cond1 = _solve_block(gram1, phi1)
    if not cond1 <= COND_LIMIT:
        raise SingularGram(
            f"Y-block normal matrix has condition {cond1:.3e}; "
            "the Y series is (nearly) degenerate",
            cond=cond1,
        )

    sx, sx2, sxy = xl.sum(), (xl * xl).sum(), (xl * yl).sum()
    gram2 = np.array([[m, -sy, -sx], [-sy, sy2, sxy], [-sx, sxy, sx2]])
    phi2 = np.array([x[-1] - x[0], -(yl * dx).sum(), -(xl * dx).sum()])
    (delta, epsilon, zeta), cond2 = _solve_block(gram2, phi2)
    err = None
    if not cond2 <= COND_LIMIT:
        delta = epsilon = zeta = float("nan")
        err = (
            f"X-block normal matrix has condition {cond2:.3e}; "
            "delta, epsilon, zeta are not identifiable from this path"
        )
    return TransformedEstimate(
        c=float(c), d=float(d), delta=float(delta), epsilon=float(epsilon),
        zeta=float(zeta), gram1=gram1, gram2=gram2, n=n_freq,
        cond1=cond1, cond2=cond2, x_block_error=err,
    )


def gn_forward(drift: DriftParams, n: float) -> tuple[float, float, float, float, float]:
    """The one-step conditional-mean map at sampling frequency n.

    Sends theta to the regression constants (c, d, delta, epsilon, zeta)
    that make the one-step conditional means exact:
    E(Y_h|y) = c + (1-d) y and E(X_h|y,x) = delta - epsilon y + (1-zeta) x
    with h = 1/n.
    """
    h = 1.0 / n
    c = drift.a * psi(drift.b, h)
    d = -math.expm1(-drift.b * h)
    delta = drift.alpha * psi(drift.gamma, h) - drift.a * drift.beta * i2(
        drift.b, drift.gamma, h
    )
    epsilon = drift.beta * i1(drift.b, drift.gamma, h)
    zeta = -math.expm1(-drift.gamma * h)
    return c, d, delta, epsilon, zeta


def gn_inverse(te: TransformedEstimate) -> DriftEstimate:
    """Exact back-transform of the transformed estimate.

    Inverts gn_forward:
        b = -n log(1-d),  a = c / psi(b, 1/n)
        gamma = -n log(1-zeta),  beta = epsilon / i1(b, gamma, 1/n)
        alpha = (delta + a beta i2(b, gamma, 1/n)) / psi(gamma, 1/n)
    """
    if te.x_block_error is not None:
        raise SingularGram(te.x_block_error, cond=te.cond2)
    if te.d >= 1.0 or te.zeta >= 1.0:
        raise OutOfDomain(
            f"back-transform undefined: d={te.d!r}, zeta={te.zeta!r} "
            "(both must be < 1)"
        )
    n, h = te.n, 1.0 / te.n
    b = -n * math.log1p(-te.d)
    a = te.c / psi(b, h)
    gamma = -n * math.log1p(-te.zeta)
    beta = te.epsilon / i1(b, gamma, h)
    alpha = (te.delta + a * beta * i2(b, gamma, h)) / psi(gamma, h)
    return DriftEstimate(
        theta_hat=np.array([a, b, alpha, beta, gamma]),
        source="discrete",
        n=n,
        conds=(te.cond1, te.cond2),
    )


def clse_approx(te: TransformedEstimate) -> DriftEstimate:
    """First-order back-transform: n times the transformed estimate."""
    vec = np.array([te.c, te.d, te.delta, te.epsilon, te.zeta])
    return DriftEstimate(
        theta_hat=te.n * vec, source="approximate", n=te.n,
        conds=(te.cond1, te.cond2),
    )


def solve_continuous(
    fn: PathFunctionals,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the integral normal equations for one path or a stack.

    Returns (theta, cond1, cond2); rows whose blocks exceed the condition
    limit come back NaN rather than raising, so batch callers can count
    exclusions. theta has shape (..., 5).
    """
    g1, g2 = gram_blocks(fn)
    f1, f2 = target_blocks(fn)
    cond1 = np.linalg.cond(g1)
    cond2 = np.linalg.cond(g2)
    ok1 = np.asarray(cond1 <= COND_LIMIT)
    ok2 = np.asarray(cond2 <= COND_LIMIT)

    shape = np.broadcast_shapes(ok1.shape, ok2.shape)
    theta = np.full(shape + (5,), np.nan)
    ab = np.full(shape + (2,), np.nan)
    abg = np.full(shape + (3,), np.nan)
    # trailing singleton keeps the stacked solve unambiguous
    if shape == ():
        if ok1:
            ab = np.linalg.solve(g1, f1[..., None])[..., 0]
        if ok2:
            abg = np.linalg.solve(g2, f2[..., None])[..., 0]
    else:
        if ok1.any():
            ab[ok1] = np.linalg.solve(g1[ok1], f1[ok1, :, None])[..., 0]
        if ok2.any():
            abg[ok2] = np.linalg.solve(g2[ok2], f2[ok2, :, None])[..., 0]
    theta[..., 0:2] = ab
    theta[..., 2:5] = abg
    return theta, np.asarray(cond1, dtype=float), np.asarray(cond2, dtype=float)


def clse_continuous(path: PathGrid) -> DriftEstimate:
    """Continuous-record CLSE from the discretized integral functionals."""
    if len(path) < 3:
        raise ValueError(f"need at least 3 grid points, got {len(path)}")
    fn = functionals_from_path(path)
    theta, cond1, cond2 = solve_continuous(fn)
    if not float(cond1) <= COND_LIMIT:
        raise SingularGram(
            f"Y-block integral Gram has condition {float(cond1):.3e}", cond=float(cond1)
        )
    if not float(cond2) <= COND_LIMIT:
        raise SingularGram(
            f"X-block integral Gram has condition {float(cond2):.3e}", cond=float(cond2)
        )
    g1, g2 = gram_blocks(fn)
    return DriftEstimate(
        theta_hat=theta, source="continuous", gram_cont=(g1, g2),
        conds=(float(cond1), float(cond2)),
    )


def h_vector(
    path: PathGrid, true_theta: DriftParams, diffusion: DiffusionParams
) -> np.ndarray:
    """The martingale part f_T - G_T theta of the estimation error.

    Algebraically f - G theta collapses to the pure noise integrals (the
    diffusion argument documents which noise law that is; it does not
    enter the computation). Useful as a diagnostic on simulated paths
    where theta is known: theta_hat - theta = G_T^{-1} h_T exactly.
    """
    fn = functionals_from_path(path)
    g1, g2 = gram_blocks(fn)
    f1, f2 = target_blocks(fn)
    th1 = np.array([true_theta.a, true_theta.b])
    th2 = np.array([true_theta.alpha, true_theta.beta, true_theta.gamma])
    return np.concatenate([f1 - g1 @ th1, f2 - g2 @ th2])
