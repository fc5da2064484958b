"""Factorization state and loss evaluation.

The model decomposes a labeled data matrix X (N x M) as

    X = 1 p0^T + U S P^T + E

with S diagonal (stored as a vector of H scalars) and the baseline row p0
optional. The objective traded off by the fit is

    total = ||E||_F^2
          + lambda0 * sum_h (||p_h||^2 - 1)^2 + (||u_h||^2 - 1)^2
          + lambda_r * sum_h ||(u_h u_h^T) / XXt||_F^2     (element-wise /)
          + lambda_c * sum_h ||(p_h p_h^T) / XtX||_F^2

where the lambda0 term keeps factor columns near unit norm so the
component scale lives in S, and the division penalties make co-activation
of weakly associated observations (rows) or variables (columns) expensive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .crossprod import CrossProducts
from .errors import InvalidInputError

# Entries this small in a cross-product matrix mean it was never floored;
# dividing by them would blow up the penalties.
_DIVISOR_HAZARD = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """Dense real matrix with observation (row) and variable (column) labels."""

    values: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidInputError(f"data must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("data contains non-finite values")
        rows = tuple(str(r) for r in self.row_labels)
        cols = tuple(str(c) for c in self.col_labels)
        if len(rows) != values.shape[0] or len(cols) != values.shape[1]:
            raise InvalidInputError(
                f"label counts ({len(rows)}, {len(cols)}) do not match "
                f"shape {values.shape}"
            )
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @staticmethod
    def from_values(values, row_labels=None, col_labels=None) -> "DataMatrix":
        values = np.asarray(values, dtype=float)
        n, m = values.shape
        if row_labels is None:
            row_labels = [f"o{i + 1}" for i in range(n)]
        if col_labels is None:
            col_labels = [f"v{j + 1}" for j in range(m)]
        return DataMatrix(values, tuple(row_labels), tuple(col_labels))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class FactorModel:
    """Factors of the decomposition: U (N x H), diagonal S, P (M x H), p0."""

    U: np.ndarray
    S: np.ndarray
    P: np.ndarray
    p0: Optional[np.ndarray] = None

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        S = np.asarray(self.S, dtype=float)
        P = np.asarray(self.P, dtype=float)
        if U.ndim != 2 or P.ndim != 2 or S.ndim != 1:
            raise InvalidInputError("U and P must be 2-D, S must be a vector")
        if U.shape[1] != S.size or P.shape[1] != S.size:
            raise InvalidInputError(
                f"component counts disagree: U {U.shape}, S {S.shape}, P {P.shape}"
            )
        object.__setattr__(self, "U", _readonly(U))
        object.__setattr__(self, "S", _readonly(S))
        object.__setattr__(self, "P", _readonly(P))
        if self.p0 is not None:
            p0 = np.asarray(self.p0, dtype=float)
            if p0.ndim != 1 or p0.size != P.shape[0]:
                raise InvalidInputError(
                    f"baseline length {p0.shape} does not match P rows {P.shape[0]}"
                )
            object.__setattr__(self, "p0", _readonly(p0))

    @property
    def H(self) -> int:
        return self.S.size

    @property
    def n_rows(self) -> int:
        return self.U.shape[0]

    @property
    def n_cols(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class PenaltyWeights:
    """Nonnegative trade-off weights of the loss terms."""

    lambda0: float = 1.0
    lambda_r: float = 0.0
    lambda_c: float = 0.0

    def __post_init__(self):
        for name in ("lambda0", "lambda_r", "lambda_c"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms before weighting, plus the weighted total."""

    fit: float
    f0: float
    fr: float
    fc: float
    total: float


def _check_conformance(X: DataMatrix, m: FactorModel):
    n, m_cols = X.shape
    if m.n_rows != n or m.n_cols != m_cols:
        raise InvalidInputError(
            f"model ({m.n_rows} x {m.n_cols}) does not conform to data {X.shape}"
        )


def _check_floored(xp: CrossProducts):
    for name, mat in (("xtx", xp.xtx), ("xxt", xp.xxt)):
        smallest = np.abs(mat.entries).min() if mat.entries.size else np.inf
        if smallest < _DIVISOR_HAZARD:
            raise InvalidInputError(
                f"{name} contains an entry with magnitude {smallest:.3g}; "
                "apply epsilon_floor before using it as a divisor"
            )


def residual(X: DataMatrix, m: FactorModel) -> np.ndarray:
    """E = X - 1 p0^T - U S P^T (baseline term omitted when absent)."""
    _check_conformance(X, m)
    recon = (m.U * m.S) @ m.P.T
    if m.p0 is not None:
        recon = recon + m.p0[None, :]
    return X.values - recon


def loss(
    X: DataMatrix, m: FactorModel, xp: CrossProducts, w: PenaltyWeights
) -> LossBreakdown:
    """Evaluate all loss terms at the given factors.

    Raises if a cross-product matrix contains near-zero entries (it must be
    epsilon-floored first; flooring is an explicit pipeline step with
    provenance, never applied silently here).
    """
    _check_conformance(X, m)
    _check_xp_sides(X, xp)
    _check_floored(xp)

    E = residual(X, m)
    fit = float(np.vdot(E, E))

    u_sq = np.sum(m.U * m.U, axis=0)
    p_sq = np.sum(m.P * m.P, axis=0)
    f0 = float(np.sum((p_sq - 1.0) ** 2) + np.sum((u_sq - 1.0) ** 2))

    fr = _division_penalty(m.U, xp.xxt.entries)
    fc = _division_penalty(m.P, xp.xtx.entries)

    total = fit + w.lambda0 * f0 + w.lambda_r * fr + w.lambda_c * fc
    return LossBreakdown(fit=fit, f0=f0, fr=fr, fc=fc, total=total)


def _division_penalty(factors: np.ndarray, divisor: np.ndarray) -> float:
    """sum_h || (f_h f_h^T) / divisor ||_F^2 with element-wise division."""
    acc = 0.0
    for h in range(factors.shape[1]):
        q = np.outer(factors[:, h], factors[:, h]) / divisor
        acc += float(np.vdot(q, q))
    return acc


def _check_xp_sides(X: DataMatrix, xp: CrossProducts):
    n, m_cols = X.shape
    if xp.xxt.side != n:
        raise InvalidInputError(
            f"xxt side {xp.xxt.side} does not match observation count {n}"
        )
    if xp.xtx.side != m_cols:
        raise InvalidInputError(
            f"xtx side {xp.xtx.side} does not match variable count {m_cols}"
        )


def scores(m: FactorModel) -> np.ndarray:
    """Score matrix T = U S; column h is s_h * u_h."""
    return m.U * m.S


def explained_variance(X: DataMatrix, m: FactorModel) -> float:
    """1 - ||E||_F^2 / ||X||_F^2; at most 1, negative for models worse than zero."""
    denom = float(np.vdot(X.values, X.values))
    if denom == 0.0:
        raise InvalidInputError("explained variance is undefined for an all-zero matrix")
    E = residual(X, m)
    return 1.0 - float(np.vdot(E, E)) / denom


def sign_align(m: FactorModel) -> FactorModel:
    """Normalize component signs without changing the loss.

    Negative diagonal entries are folded into U (s_h <- |s_h|,
    u_h <- sign(s_h) u_h); then any component whose score column sums
    negative has both u_h and p_h negated. Every loss term is even in each
    (u_h, p_h) pair, so this is loss-invariant and idempotent.
    """
    U = m.U.copy()
    S = m.S.copy()
    P = m.P.copy()
    neg = S < 0
    U[:, neg] *= -1.0
    S = np.abs(S)
    flip = (U * S).sum(axis=0) < 0
    U[:, flip] *= -1.0
    P[:, flip] *= -1.0
    return FactorModel(U=U, S=S, P=P, p0=m.p0)


# -- flat parameter vector ----------------------------------------------------
#
# Order: [vec(U) row-major, S, vec(P) row-major, p0 (when present)]. Run
# manifests record this string so persisted fits can be replayed against
# the same layout.

PARAM_ORDER = "U (row-major N x H), S diagonal, P (row-major M x H), p0"


def flatten_params(m: FactorModel) -> np.ndarray:
    parts = [m.U.ravel(), m.S, m.P.ravel()]
    if m.p0 is not None:
        parts.append(m.p0)
    return np.concatenate(parts)


def unflatten_params(
    x: np.ndarray, n_rows: int, n_cols: int, n_components: int, with_baseline: bool
) -> FactorModel:
    x = np.asarray(x, dtype=float)
    expected = n_rows * n_components + n_components + n_cols * n_components
    if with_baseline:
        expected += n_cols
    if x.size != expected:
        raise InvalidInputError(
            f"flat parameter vector has length {x.size}, expected {expected}"
        )
    i = n_rows * n_components
    U = x[:i].reshape(n_rows, n_components)
    S = x[i : i + n_components]
    i += n_components
    P = x[i : i + n_cols * n_components].reshape(n_cols, n_components)
    i += n_cols * n_components
    p0 = x[i:] if with_baseline else None
    return FactorModel(U=U, S=S, P=P, p0=p0)


def param_labels(
    n_rows: int, n_cols: int, n_components: int, with_baseline: bool
) -> list:
    """Human-readable names for flat parameter coordinates, matching the order."""
    names = [f"U[{i},{h}]" for i in range(n_rows) for h in range(n_components)]
    names += [f"S[{h}]" for h in range(n_components)]
    names += [f"P[{j},{h}]" for j in range(n_cols) for h in range(n_components)]
    if with_baseline:
        names += [f"p0[{j}]" for j in range(n_cols)]
    return names
