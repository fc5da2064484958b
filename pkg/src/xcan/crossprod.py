"""Cross-product matrices and their post-processing.

The structural penalties of the factorization divide, element-wise, by a
pair of symmetric association matrices: one over variables (M x M) and one
over observations (N x N). This module builds those matrices from data
(cosine-normalized Gram matrices), and post-processes them: hard
thresholding to discard weak associations, epsilon flooring so they are
safe Hadamard divisors, class-label indicator maps, and min-baseline
subtraction for uncentered data.

The pipelines used elsewhere in the package always threshold before
flooring: entries zeroed by the threshold become +/-eps divisors, which is
exactly what makes co-activation of unrelated rows or columns expensive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InvalidInputError


class MatrixKind(str, Enum):
    """Which mode of the data a symmetric matrix describes."""

    VARIABLES = "variables"      # M x M, built from columns
    OBSERVATIONS = "observations"  # N x N, built from rows


@dataclass(frozen=True)
class SymMatrix:
    """Dense real symmetric matrix tagged with the mode it describes.

    Construction symmetrizes by averaging with the transpose, so
    ``entries[i, j] == entries[j, i]`` holds exactly afterwards. The array
    is locked read-only; all operations return new instances.
    """

    entries: np.ndarray
    kind: MatrixKind

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvalidInputError(
                f"symmetric matrix must be square, got shape {entries.shape}"
            )
        if not np.array_equal(entries, entries.T):
            entries = (entries + entries.T) / 2.0
        entries = np.ascontiguousarray(entries)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "kind", MatrixKind(self.kind))

    @property
    def side(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ThresholdRule:
    """Open interval ``(lo, hi)`` of association values to zero out.

    ``lo`` may be ``-inf`` and ``hi`` ``+inf``; e.g. a positivity rule that
    keeps only values >= 0.7 is ``ThresholdRule(-inf, 0.7)``.
    """

    lo: float
    hi: float
    floor_eps: float = 0.01

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidInputError(
                f"threshold interval requires lo < hi, got ({self.lo}, {self.hi})"
            )
        if not self.floor_eps > 0:
            raise InvalidInputError(f"floor_eps must be positive, got {self.floor_eps}")


@dataclass(frozen=True)
class CrossProducts:
    """The pair of association matrices that parameterize the penalties.

    ``xtx`` relates variables (M x M), ``xxt`` relates observations
    (N x N). ``provenance`` records how each side was built and
    post-processed, and travels into run manifests.
    """

    xtx: SymMatrix
    xxt: SymMatrix
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.xtx.kind is not MatrixKind.VARIABLES:
            raise InvalidInputError("xtx must have kind 'variables'")
        if self.xxt.kind is not MatrixKind.OBSERVATIONS:
            raise InvalidInputError("xxt must have kind 'observations'")

    @staticmethod
    def neutral(n_rows: int, n_cols: int) -> "CrossProducts":
        """All-ones pair: penalties reduce to plain fourth-power norms."""
        return CrossProducts(
            xtx=SymMatrix(np.ones((n_cols, n_cols)), MatrixKind.VARIABLES),
            xxt=SymMatrix(np.ones((n_rows, n_rows)), MatrixKind.OBSERVATIONS),
            provenance={"xtx": ["neutral"], "xxt": ["neutral"]},
        )


def _cosine_gram(vectors: np.ndarray, kind: MatrixKind) -> SymMatrix:
    """Gram matrix of the rows of ``vectors``, normalized per pair.

    Entry (i, j) is <v_i, v_j> / (||v_i|| ||v_j||). Zero-norm vectors get a
    1 on the diagonal and 0 off-diagonal so downstream division stays
    defined.
    """
    gram = vectors @ vectors.T
    norms = np.sqrt(np.diag(gram).clip(min=0.0))
    denom = np.outer(norms, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0.0, gram / np.where(denom > 0.0, denom, 1.0), 0.0)
    out = np.clip(out, -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return SymMatrix(out, kind)


def build_xtx(X) -> SymMatrix:
    """Variable-mode association matrix: cosine similarity of columns."""
    values = _matrix_values(X)
    if values.size == 0:
        raise InvalidInputError("cannot build cross-products of an empty matrix")
    return _cosine_gram(values.T, MatrixKind.VARIABLES)


def build_xxt(X) -> SymMatrix:
    """Observation-mode association matrix: cosine similarity of rows."""
    values = _matrix_values(X)
    if values.size == 0:
        raise InvalidInputError("cannot build cross-products of an empty matrix")
    return _cosine_gram(values, MatrixKind.OBSERVATIONS)


def _matrix_values(X) -> np.ndarray:
    # accepts a DataMatrix or a bare 2-D array
    values = getattr(X, "values", X)
    return np.asarray(values, dtype=float)


def hard_threshold(M: SymMatrix, rule: ThresholdRule) -> SymMatrix:
    """Zero every entry strictly inside the open interval ``(lo, hi)``."""
    entries = M.entries.copy()
    entries[(entries > rule.lo) & (entries < rule.hi)] = 0.0
    return SymMatrix(entries, M.kind)


def epsilon_floor(M: SymMatrix, eps: float) -> SymMatrix:
    """Replace entries with magnitude below ``eps`` by sign-preserving +/-eps.

    An exact 0 becomes +eps. The result has no entry with magnitude below
    ``eps`` and is therefore safe as a Hadamard divisor.
    """
    if not eps > 0:
        raise InvalidInputError(f"floor epsilon must be positive, got {eps}")
    entries = M.entries.copy()
    small = np.abs(entries) < eps
    entries[small] = np.where(entries[small] >= 0.0, eps, -eps)
    return SymMatrix(entries, M.kind)


def class_map(labels: Sequence) -> SymMatrix:
    """Indicator matrix: 1 where two observations share a class label.

    Used in place of a data-derived observation matrix to fold external
    class information into the penalties.
    """
    labels = list(labels)
    if not labels:
        raise InvalidInputError("class_map requires at least one label")
    arr = np.asarray(labels, dtype=object)
    entries = (arr[:, None] == arr[None, :]).astype(float)
    return SymMatrix(entries, MatrixKind.OBSERVATIONS)


def subtract_min_baseline(M: SymMatrix) -> SymMatrix:
    """Subtract each column's minimum, then re-symmetrize by averaging.

    Spreads out association matrices that sit far from zero (typical for
    uncentered nonnegative data, where the cosine matrix is nearly all
    ones). Column-wise subtraction can break symmetry on finite data, hence
    the averaging step.
    """
    entries = M.entries - M.entries.min(axis=0, keepdims=True)
    return SymMatrix((entries + entries.T) / 2.0, M.kind)
