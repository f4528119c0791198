"""Diffusion coefficients recovered from realized quadratic variation.

On a fine grid the squared-increment sums of (Y, X) converge to

    <Y>_T   = sigma1^2 int_0^T Y du
    <X>_t   = sigma2^2 int_0^t Y du + sigma3^2 t        (t = T and T/2)
    <Y,X>_T = rho sigma1 sigma2 int_0^T Y du

so sigma1^2 is a ratio, (sigma2^2, sigma3^2) solve a 2x2 linear system
over the half and full horizon, and rho is a normalized cross term.
Drift contributes O(dt) to every sum and is deliberately not corrected
for; the tests measure the finite-dt error instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .simulate import PathGrid

DET_TOL = 1e-12


@dataclass(eq=False)
class QuadraticVariations:
    """Realized variation sums and the Y time integrals scaling them."""

    qv_y_T: float
    qv_x_T: float
    qv_x_halfT: float
    qcov_yx_T: float
    int_y_T: float
    int_y_halfT: float
    horizon: float
    t_half: float

    def __post_init__(self):
        if self.qv_y_T < 0.0:
            raise ValueError("qv_y_T must be nonnegative")
        if not self.qv_x_T >= self.qv_x_halfT >= 0.0:
            raise ValueError("need qv_x_T >= qv_x_halfT >= 0")


@dataclass(eq=False)
class DiffusionEstimate:
    """The four statistics plus diagnostics.

    sigma2_sq and sigma3_sq are floored at zero; the raw solutions of the
    half/full-horizon system can dip slightly negative at finite dt and
    are kept alongside.
    """

    sigma1_sq: float
    sigma2_sq: float
    sigma3_sq: float
    rho: float
    sigma2_sq_raw: float
    sigma3_sq_raw: float
    rho_clamped: bool
    det_ratio: float  # |det| of the 2x2 system relative to its entry scale

    def to_text(self) -> str:
        lines = [
            f"sigma1_sq = {self.sigma1_sq:.17g}",
            f"sigma2_sq = {self.sigma2_sq:.17g} (raw {self.sigma2_sq_raw:.17g})",
            f"sigma3_sq = {self.sigma3_sq:.17g} (raw {self.sigma3_sq_raw:.17g})",
            f"rho = {self.rho:.17g}",
            f"rho_clamped = {'yes' if self.rho_clamped else 'no'}",
            f"det_ratio = {self.det_ratio:.17g}",
        ]
        return "\n".join(lines) + "\n"


def realized_qv(path: PathGrid) -> QuadraticVariations:
    """Squared-increment sums over the full and half horizon.

    The half horizon is the first floor(N/2) increments of the N on the
    grid, so both rows of the downstream system are exact sums.
    """
    if len(path) < 3:
        raise ValueError(f"need at least 3 grid points, got {len(path)}")
    dy, dx = np.diff(path.y), np.diff(path.x)
    n = dy.size
    k = n // 2
    dt = path.dt
    return QuadraticVariations(
        qv_y_T=float(dy @ dy),
        qv_x_T=float(dx @ dx),
        qv_x_halfT=float(dx[:k] @ dx[:k]),
        qcov_yx_T=float(dy @ dx),
        int_y_T=float(path.y[:-1].sum() * dt),
        int_y_halfT=float(path.y[:k].sum() * dt),
        horizon=n * dt,
        t_half=k * dt,
    )


def diffusion_from_qv(qv: QuadraticVariations) -> DiffusionEstimate:
    """Invert the variation identities for the four coefficients."""
    if not qv.int_y_T > 0.0:
        raise ValueError("time integral of Y must be positive")
    s1 = qv.qv_y_T / qv.int_y_T

    A = np.array([[qv.int_y_T, qv.horizon], [qv.int_y_halfT, qv.t_half]])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    scale = max(abs(A[0, 0] * A[1, 1]), abs(A[0, 1] * A[1, 0]))
    if scale == 0.0 or abs(det) < DET_TOL * scale:
        raise SingularSystem(
            "half- and full-horizon Y averages coincide; "
            f"|det| = {abs(det):.3e} against scale {scale:.3e}"
        )
    s2_raw, s3_raw = np.linalg.solve(A, np.array([qv.qv_x_T, qv.qv_x_halfT]))
    s2, s3 = max(s2_raw, 0.0), max(s3_raw, 0.0)

    denom = math.sqrt(s1 * s2) * qv.int_y_T
    clamped = False
    if denom > 0.0:
        rho = qv.qcov_yx_T / denom
        if abs(rho) > 1.0:
            rho = math.copysign(1.0, rho)
            clamped = True
    else:
        rho = float("nan")
    return DiffusionEstimate(
        sigma1_sq=float(s1), sigma2_sq=float(s2), sigma3_sq=float(s3),
        rho=float(rho), sigma2_sq_raw=float(s2_raw),
        sigma3_sq_raw=float(s3_raw), rho_clamped=clamped,
        det_ratio=abs(det) / scale,
    )


def estimate_diffusion(path: PathGrid) -> DiffusionEstimate:
    """Four diffusion statistics from one path's realized variations."""
    return diffusion_from_qv(realized_qv(path))
