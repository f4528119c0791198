"""Trajectory generation on uniform grids.

Two schemes:

  exact_y_euler_x   Y moves by exact conditional draws (noncentral
                    chi-square via a Poisson mixture of gammas); the W
                    increment driving X is reconstructed from the Y
                    increment, which preserves the Y-X correlation to
                    O(sqrt(dt)).
  full_euler        full-truncation Euler for Y (positive part in drift
                    and diffusion, real-valued internal state) and plain
                    Euler for X. The only scheme whose noise can be drawn
                    in bulk, so the batched replication engine uses it.

Both consume substreams 0 (Y drivers), 1 (B), 2 (L) and 3 (initial draws)
of one RngStream, so a path is addressed entirely by (seed, stream_id).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import psi
from .model import InitialLaw, ModelSpec, Regime, classify_regime, make_spec
from .rng import RngStream

Y_FLOOR = 1e-12
SCHEMES = ("exact_y_euler_x", "full_euler")
DEFAULT_BURN_IN_RATE = 20.0


@dataclass(eq=False)
class PathGrid:
    """A uniformly sampled trajectory (t_i, Y_i, X_i), immutable by convention."""

    t0: float
    dt: float
    y: np.ndarray
    x: np.ndarray
    seed_record: str = ""

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.y.shape != self.x.shape or self.y.ndim != 1 or self.y.size < 2:
            raise ValueError("y and x must be equal-length 1-d arrays of size >= 2")
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if np.any(self.y < 0.0):
            raise ValueError("negative Y value in path")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.y.size)

    @property
    def horizon(self) -> float:
        return (self.y.size - 1) * self.dt

    def __len__(self) -> int:
        return self.y.size


@dataclass(eq=False)
class EnsembleResult:
    """Cross-path simulation output. Arrays indexed by path."""

    y_end: np.ndarray
    x_end: np.ndarray
    y: np.ndarray | None = None  # (n_paths, n_grid) when paths were recorded
    x: np.ndarray | None = None


def _n_grid(T: float, dt: float) -> int:
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if T < dt:
        raise ValueError(f"horizon T={T} shorter than one step dt={dt}")
    return int(math.floor(T / dt + 1e-9)) + 1


class _CirKernel:
    """Per-step constants of the exact Y transition at fixed dt."""

    def __init__(self, a: float, b: float, sigma1: float, dt: float):
        self.scale = sigma1**2 * psi(b, dt) / 4.0
        self.half_df = 2.0 * a / sigma1**2
        self.decay = math.exp(-b * dt)

    def draw(self, y, gen: np.random.Generator):
        # Poisson mixture of gammas: valid for any df > 0, no rejection.
        # gamma(shape=0) == 0 keeps the a=0, y=0 absorbing state exact.
        nc_half = self.decay * y / (2.0 * self.scale)
        n_mix = gen.poisson(nc_half)
        return 2.0 * self.scale * gen.standard_gamma(self.half_df + n_mix)


def sample_cir_transition(
    a: float, b: float, sigma1: float, y_s: float, dt: float, rng: np.random.Generator
) -> float:
    """One exact draw of Y_{s+dt} given Y_s = y_s.

    The transition law is scale * chi-square(4a/sigma1^2 degrees of
    freedom, noncentrality exp(-b*dt)*y_s/scale) with
    scale = sigma1^2*psi(b,dt)/4.
    """
    if not sigma1 > 0.0:
        raise ValueError("sigma1 must be positive; use the ODE step when sigma1 = 0")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not y_s >= 0.0:
        raise ValueError(f"y_s must be nonnegative, got {y_s}")
    return float(_CirKernel(a, b, sigma1, dt).draw(y_s, rng))


def _wants_b(spec: ModelSpec) -> bool:
    # B enters through sigma2*sqrt(1-rho^2); skip draws when the
    # coefficient vanishes so degenerate models consume fewer streams
    return spec.sigma2 > 0.0 and abs(spec.rho) < 1.0


def _wants_l(spec: ModelSpec) -> bool:
    return spec.sigma3 > 0.0


def _resolve_init(spec: ModelSpec, dt: float, rng: RngStream, size: int | None):
    """Initial (y0, x0) scalars or vectors according to spec.init."""
    init = spec.init
    if init.kind == "point":
        if size is None:
            return init.y0, init.x0
        return np.full(size, init.y0), np.full(size, init.x0)
    if classify_regime(spec.drift) is not Regime.SUBCRITICAL or not spec.sigma1 > 0.0:
        raise ValueError(f"init kind {init.kind!r} needs a subcritical spec with sigma1 > 0")
    shape = 2.0 * spec.a / spec.sigma1**2
    scale = spec.sigma1**2 / (2.0 * spec.b)
    if init.kind == "stationary-y":
        gen = rng.generator(3)
        y0 = gen.gamma(shape, scale) if size is None else gen.gamma(shape, scale, size)
        return y0, (init.x0 if size is None else np.full(size, init.x0))
    # burned-in stationary start
    burn = init.burn_in
    if burn is None:
        burn = DEFAULT_BURN_IN_RATE / min(spec.b, spec.gamma)
    sub = rng.spawn(0)
    if size is None:
        return stationary_init(spec, burn, dt, sub)
    gen = sub.generator(3)
    y0 = gen.gamma(shape, scale, size)
    x_eq = (spec.b * spec.alpha - spec.a * spec.beta) / (spec.b * spec.gamma)
    res = _run_ensemble(
        spec, max(burn, dt), dt, "exact_y_euler_x", sub.spawn(0),
        y0, np.full(size, x_eq), record_paths=False,
    )
    return res.y_end, res.x_end


def simulate_path(
    spec: ModelSpec,
    T: float,
    dt: float,
    scheme: str = "exact_y_euler_x",
    rng: RngStream | None = None,
) -> PathGrid:
    """Simulate one trajectory on the grid 0, dt, ..., floor(T/dt)*dt."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if rng is None:
        raise ValueError("an RngStream is required")
    n = _n_grid(T, dt)
    y0, x0 = _resolve_init(spec, dt, rng, None)

    d, q = spec.drift, spec.diffusion
    sqrt_dt = math.sqrt(dt)
    ortho = math.sqrt(max(1.0 - q.rho**2, 0.0))
    gen_y = rng.generator(0)
    gen_b = rng.generator(1) if _wants_b(spec) else None
    gen_l = rng.generator(2) if _wants_l(spec) else None

    y = np.empty(n)
    x = np.empty(n)
    y[0], x[0] = y0, x0

    exact = scheme == "exact_y_euler_x"
    if exact and q.sigma1 > 0.0:
        kernel = _CirKernel(d.a, d.b, q.sigma1, dt)
        decay, level = kernel.decay, d.a * psi(d.b, dt)
    elif exact:
        kernel = None
        decay, level = math.exp(-d.b * dt), d.a * psi(d.b, dt)
    yi = float(y0)  # internal state; may go negative under full_euler
    for i in range(n - 1):
        ypos = y[i]
        if exact:
            if kernel is not None:
                y_next = float(kernel.draw(ypos, gen_y))
                # invert the Y update for the W increment that produced it,
                # with the denominator floored to avoid blow-up near 0
                dw = (y_next - ypos - (d.a - d.b * ypos) * dt) / (
                    q.sigma1 * math.sqrt(max(ypos, Y_FLOOR))
                )
            else:
                y_next = decay * ypos + level
                dw = gen_y.standard_normal() * sqrt_dt
            yi = y_next
        else:
            dw = gen_y.standard_normal() * sqrt_dt
            root = math.sqrt(ypos)
            yi = yi + (d.a - d.b * ypos) * dt + q.sigma1 * root * dw
            y_next = max(yi, 0.0)
        db = gen_b.standard_normal() * sqrt_dt if gen_b is not None else 0.0
        dl = gen_l.standard_normal() * sqrt_dt if gen_l is not None else 0.0
        root = math.sqrt(ypos)
        x[i + 1] = (
            x[i]
            + (d.alpha - d.beta * ypos - d.gamma * x[i]) * dt
            + q.sigma2 * root * (q.rho * dw + ortho * db)
            + q.sigma3 * dl
        )
        y[i + 1] = y_next
    return PathGrid(0.0, dt, y, x, seed_record=repr(rng))


def _run_ensemble(
    spec: ModelSpec,
    T: float,
    dt: float,
    scheme: str,
    rng: RngStream,
    y0: np.ndarray,
    x0: np.ndarray,
    record_paths: bool,
) -> EnsembleResult:
    """Vectorized stepping of many paths from one stream.

    Per step, the draw order (Y driver, then B, then L) matches
    simulate_path exactly, so a size-1 ensemble is bit-identical to the
    scalar engine on the same stream.
    """
    d, q = spec.drift, spec.diffusion
    n = _n_grid(T, dt)
    size = y0.size
    sqrt_dt = math.sqrt(dt)
    ortho = math.sqrt(max(1.0 - q.rho**2, 0.0))
    gen_y = rng.generator(0)
    gen_b = rng.generator(1) if _wants_b(spec) else None
    gen_l = rng.generator(2) if _wants_l(spec) else None

    exact = scheme == "exact_y_euler_x"
    kernel = None
    if exact and q.sigma1 > 0.0:
        kernel = _CirKernel(d.a, d.b, q.sigma1, dt)
    decay, level = math.exp(-d.b * dt), d.a * psi(d.b, dt)

    y_rec = x_rec = None
    if record_paths:
        y_rec = np.empty((size, n))
        x_rec = np.empty((size, n))
        y_rec[:, 0], x_rec[:, 0] = y0, x0

    ypos = y0.astype(float).copy()
    x = x0.astype(float).copy()
    yi = ypos.copy()  # internal full_euler state
    floor = Y_FLOOR
    for i in range(n - 1):
        if exact:
            if kernel is not None:
                y_next = kernel.draw(ypos, gen_y)
                dw = (y_next - ypos - (d.a - d.b * ypos) * dt) / (
                    q.sigma1 * np.sqrt(np.maximum(ypos, floor))
                )
            else:
                y_next = decay * ypos + level
                dw = gen_y.standard_normal(size) * sqrt_dt
        else:
            dw = gen_y.standard_normal(size) * sqrt_dt
            root = np.sqrt(ypos)
            yi = yi + (d.a - d.b * ypos) * dt + q.sigma1 * root * dw
            y_next = np.maximum(yi, 0.0)
        db = gen_b.standard_normal(size) * sqrt_dt if gen_b is not None else 0.0
        dl = gen_l.standard_normal(size) * sqrt_dt if gen_l is not None else 0.0
        root = np.sqrt(ypos)
        x = (
            x
            + (d.alpha - d.beta * ypos - d.gamma * x) * dt
            + q.sigma2 * root * (q.rho * dw + ortho * db)
            + q.sigma3 * dl
        )
        ypos = y_next
        if record_paths:
            y_rec[:, i + 1], x_rec[:, i + 1] = ypos, x
    return EnsembleResult(y_end=ypos, x_end=x, y=y_rec, x=x_rec)


def simulate_ensemble(
    spec: ModelSpec,
    T: float,
    dt: float,
    scheme: str = "exact_y_euler_x",
    rng: RngStream | None = None,
    n_paths: int = 1,
    record: str = "endpoints",
) -> EnsembleResult:
    """Simulate n_paths trajectories at once from a single stream.

    record="endpoints" keeps only (Y_T, X_T); record="paths" stores the
    full (n_paths, n_grid) arrays. All paths share the stream's
    substreams with (n_paths,)-shaped draws per step.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if record not in ("endpoints", "paths"):
        raise ValueError(f"record must be 'endpoints' or 'paths', got {record!r}")
    if rng is None:
        raise ValueError("an RngStream is required")
    if n_paths < 1:
        raise ValueError(f"n_paths must be at least 1, got {n_paths}")
    y0, x0 = _resolve_init(spec, dt, rng, n_paths)
    return _run_ensemble(spec, T, dt, scheme, rng, y0, x0, record == "paths")


def euler_paths_per_stream(
    spec: ModelSpec,
    T: float,
    dt: float,
    streams,
    chunk: int = 64,
    time_block: int = 8192,
):
    """Yield (row_slice, y, x) chunks of full_euler paths, one stream each.

    Unlike simulate_ensemble, every path here owns its RngStream, so row r
    is bit-identical to simulate_path(spec, T, dt, "full_euler",
    streams[r]): noise is pre-drawn in blocks per substream, and block
    draws from a Generator reproduce the scalar call sequence exactly.
    Point initial laws only; a resampled start would need per-path
    scalar draws that defeat the batching.
    """
    if spec.init.kind != "point":
        raise ValueError("per-stream batching requires a point initial law")
    if chunk < 1 or time_block < 1:
        raise ValueError("chunk and time_block must be positive")
    d, q = spec.drift, spec.diffusion
    n = _n_grid(T, dt)
    steps = n - 1
    sqrt_dt = math.sqrt(dt)
    ortho = math.sqrt(max(1.0 - q.rho**2, 0.0))
    want_b, want_l = _wants_b(spec), _wants_l(spec)

    for lo in range(0, len(streams), chunk):
        sub = streams[lo : lo + chunk]
        size = len(sub)
        gen_y = [s.generator(0) for s in sub]
        gen_b = [s.generator(1) for s in sub] if want_b else None
        gen_l = [s.generator(2) for s in sub] if want_l else None
        y = np.empty((size, n))
        x = np.empty((size, n))
        y[:, 0] = spec.init.y0
        x[:, 0] = spec.init.x0
        yi = np.full(size, float(spec.init.y0))
        pos = 0
        while pos < steps:
            m = min(time_block, steps - pos)
            dw = np.empty((size, m))
            for r, g in enumerate(gen_y):
                dw[r] = g.standard_normal(m)
            dw *= sqrt_dt
            if gen_b is not None:
                db = np.empty((size, m))
                for r, g in enumerate(gen_b):
                    db[r] = g.standard_normal(m)
                db *= sqrt_dt
            if gen_l is not None:
                dl = np.empty((size, m))
                for r, g in enumerate(gen_l):
                    dl[r] = g.standard_normal(m)
                dl *= sqrt_dt
            for j in range(m):
                i = pos + j
                ypos = y[:, i]
                root = np.sqrt(ypos)
                yi = yi + (d.a - d.b * ypos) * dt + q.sigma1 * root * dw[:, j]
                y[:, i + 1] = np.maximum(yi, 0.0)
                bj = db[:, j] if gen_b is not None else 0.0
                lj = dl[:, j] if gen_l is not None else 0.0
                x[:, i + 1] = (
                    x[:, i]
                    + (d.alpha - d.beta * ypos - d.gamma * x[:, i]) * dt
                    + q.sigma2 * root * (q.rho * dw[:, j] + ortho * bj)
                    + q.sigma3 * lj
                )
            pos += m
        yield slice(lo, lo + size), y, x


def simulate_critical_limit_process(
    a: float,
    alpha: float,
    sigma1: float,
    sigma2: float,
    rho: float,
    dt: float,
    rng: RngStream,
) -> PathGrid:
    """The critical-regime auxiliary pair on [0, 1] started from (0, 0).

    Solves dY = a dt + sigma1*sqrt(Y) dW and
    dX = alpha dt + sigma2*sqrt(Y)*(rho dW + sqrt(1-rho^2) dB).
    Full-truncation Euler: the exact-Y scheme reconstructs W increments
    by dividing by sqrt(Y), which degenerates at the Y0 = 0 start.
    """
    aux = make_spec(a, 0.0, alpha, 0.0, 0.0, sigma1, sigma2, 0.0, rho)
    return simulate_path(aux, 1.0, dt, scheme="full_euler", rng=rng)


def stationary_init(
    spec: ModelSpec,
    burn_in: float | None,
    dt: float,
    rng: RngStream,
) -> tuple[float, float]:
    """Draw (y0, x0) close to the stationary joint law.

    y0 comes exactly from the stationary gamma law of Y. X has no closed
    stationary form, so x0 is produced operationally: start X at its
    stationary mean (b*alpha - a*beta)/(b*gamma), run the pair for
    burn_in time units, and return the evolved pair. Y's marginal is
    preserved exactly by the evolution; X forgets its starting point at
    rate gamma.
    """
    if classify_regime(spec.drift) is not Regime.SUBCRITICAL:
        raise ValueError("stationary initialization requires a subcritical spec")
    if not spec.sigma1 > 0.0:
        raise ValueError("stationary initialization requires sigma1 > 0")
    if burn_in is None:
        burn_in = DEFAULT_BURN_IN_RATE / min(spec.b, spec.gamma)
    if not burn_in > 0.0:
        raise ValueError(f"burn_in must be positive, got {burn_in}")
    shape = 2.0 * spec.a / spec.sigma1**2
    scale = spec.sigma1**2 / (2.0 * spec.b)
    y0 = float(rng.generator(3).gamma(shape, scale))
    x_eq = (spec.b * spec.alpha - spec.a * spec.beta) / (spec.b * spec.gamma)
    start = ModelSpec(spec.drift, spec.diffusion, InitialLaw("point", y0=y0, x0=x_eq))
    path = simulate_path(start, max(burn_in, dt), dt, "exact_y_euler_x", rng.spawn(0))
    return float(path.y[-1]), float(path.x[-1])
