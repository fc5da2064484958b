"""Analytic gradient of the full loss, and its finite-difference check.

With E = X - 1 p0^T - U S P^T, the fit contributions are

    dF/dU  = -2 E P S          dF/dS = diag(-2 U^T E P)
    dF/dP  = -2 E^T U S        dF/dp0 = -2 E^T 1

(S is parameterized as H scalars, so only the diagonal of its matrix
derivative is meaningful). The penalty contributions are element-wise:

    dF0/du_hi = 4 u_hi (u_h^T u_h - 1)
    dFr/du_hi = 4 u_hi * || u_h / xxt_i ||^2    (xxt_i: i-th row, / element-wise)

and symmetrically for p_hj with the variable-mode matrix. The baseline
gradient is validated purely by finite differences, as it has no
penalty terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .crossprod import CrossProducts
from .errors import InvalidInputError
from .model import (
    DataMatrix,
    FactorModel,
    PenaltyWeights,
    _check_conformance,
    _check_floored,
    _check_xp_sides,
    flatten_params,
    loss,
    param_labels,
    residual,
    unflatten_params,
)


@dataclass(frozen=True)
class Gradient:
    """Partial derivatives of the total loss, matching the model layout."""

    dU: np.ndarray
    dS: np.ndarray
    dP: np.ndarray
    dp0: Optional[np.ndarray] = None

    def flatten(self) -> np.ndarray:
        parts = [self.dU.ravel(), self.dS, self.dP.ravel()]
        if self.dp0 is not None:
            parts.append(self.dp0)
        return np.concatenate(parts)


def _division_rowsq(factor: np.ndarray, divisor: np.ndarray) -> np.ndarray:
    """Per-row squared norms of factor / divisor rows: r_i = ||f / d_i||^2."""
    ratios = factor[None, :] / divisor
    return np.einsum("ij,ij->i", ratios, ratios)


def gradient(
    X: DataMatrix, m: FactorModel, xp: CrossProducts, w: PenaltyWeights
) -> Gradient:
    """Gradient of the weighted total loss at the given factors."""
    _check_conformance(X, m)
    _check_xp_sides(X, xp)
    _check_floored(xp)

    E = residual(X, m)
    EP = E @ m.P
    dU = -2.0 * EP * m.S
    dS = -2.0 * np.einsum("ih,ih->h", m.U, EP)
    dP = -2.0 * (E.T @ m.U) * m.S
    dp0 = -2.0 * E.sum(axis=0) if m.p0 is not None else None

    if w.lambda0 != 0.0:
        u_sq = np.sum(m.U * m.U, axis=0)
        p_sq = np.sum(m.P * m.P, axis=0)
        dU = dU + w.lambda0 * 4.0 * m.U * (u_sq - 1.0)
        dP = dP + w.lambda0 * 4.0 * m.P * (p_sq - 1.0)

    if w.lambda_r != 0.0:
        dU = dU.copy()
        for h in range(m.H):
            rowsq = _division_rowsq(m.U[:, h], xp.xxt.entries)
            dU[:, h] += w.lambda_r * 4.0 * m.U[:, h] * rowsq

    if w.lambda_c != 0.0:
        dP = dP.copy()
        for h in range(m.H):
            rowsq = _division_rowsq(m.P[:, h], xp.xtx.entries)
            dP[:, h] += w.lambda_c * 4.0 * m.P[:, h] * rowsq

    return Gradient(dU=dU, dS=dS, dP=dP, dp0=dp0)


@dataclass(frozen=True)
class FdReport:
    """Worst-coordinate comparison of analytic vs central-difference gradient."""

    max_rel_err: float
    worst_coordinate: str


def fd_check(
    X: DataMatrix,
    m: FactorModel,
    xp: CrossProducts,
    w: PenaltyWeights,
    step: float = 1e-6,
) -> FdReport:
    """Compare the analytic gradient against central finite differences.

    Every coordinate of the flat parameter vector is perturbed by
    +/- step; the relative error uses max(|analytic|, |numeric|, 1e-8) as
    denominator so near-zero coordinates do not dominate.
    """
    if not step > 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {step}")
    n, m_cols = X.shape
    with_baseline = m.p0 is not None

    analytic = gradient(X, m, xp, w).flatten()
    x0 = flatten_params(m)

    def total_at(x):
        model = unflatten_params(x, n, m_cols, m.H, with_baseline)
        return loss(X, model, xp, w).total

    numeric = np.empty_like(x0)
    for k in range(x0.size):
        x_plus = x0.copy()
        x_plus[k] += step
        x_minus = x0.copy()
        x_minus[k] -= step
        numeric[k] = (total_at(x_plus) - total_at(x_minus)) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    labels = param_labels(n, m_cols, m.H, with_baseline)
    return FdReport(max_rel_err=float(rel[worst]), worst_coordinate=labels[worst])
