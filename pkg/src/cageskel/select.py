"""Dominant-row selection of the cage coordinate matrix.

Picks the cage-many skin vertices whose coordinate submatrix has (locally)
maximal absolute determinant, so current cage positions can be recovered
from those vertices alone by one well-conditioned solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import ValidationError, WeightMatrix

DEFAULT_TAU = 0.01
MAX_SWAPS = 500
# Relative smallest singular value below which the coordinate matrix (or the
# selected submatrix) is treated as rank deficient.
RANK_EPS = 1e-10


@dataclass
class MaxVolSelection:
    """Selected rows with the cached factorization of the submatrix."""

    indices: np.ndarray  # (c,) vertex indices, row order matches submatrix
    submatrix: np.ndarray  # (c, c)
    lu: tuple
    n_swaps: int

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self.lu, rhs)


def maxvol_select(phi: WeightMatrix | np.ndarray, tau: float = DEFAULT_TAU,
                  max_swaps: int = MAX_SWAPS) -> MaxVolSelection:
    """Greedy dominant-row selection with relative threshold ``tau``.

    Seeds the selection with column-pivoted QR of the transpose, then swaps
    in any row whose coefficient over the current basis exceeds ``1 + tau``
    in magnitude. Each swap multiplies the submatrix determinant by that
    coefficient, so the absolute determinant never decreases. Ties between
    swap candidates resolve to the lowest vertex index.
    """
    a = phi.toarray() if isinstance(phi, WeightMatrix) else np.asarray(phi, dtype=np.float64)
    n, c = a.shape
    if n < c:
        raise ValidationError(f"need at least {c} rows to select from, got {n}")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] <= RANK_EPS * sv[0]:
        raise ValidationError("coordinate matrix is rank deficient, cage cannot be tracked")

    _, _, perm = scipy.linalg.qr(a.T, pivoting=True, mode="economic")
    selected = np.array(perm[:c], dtype=np.int64)

    # Coefficients of every row over the selected basis.
    b = scipy.linalg.solve(a[selected].T, a.T).T  # (n, c)
    swaps = 0
    while swaps < max_swaps:
        flat = np.argmax(np.abs(b))
        i, j = divmod(int(flat), c)
        pivot = b[i, j]
        if abs(pivot) <= 1.0 + tau:
            break
        # Rank-one update replacing selected row j by row i.
        col = b[:, j].copy()
        col[i] -= 1.0
        row = b[i, :].copy()
        row[j] -= 1.0
        b -= np.outer(col, row) / pivot
        selected[j] = i
        swaps += 1

    sub = a[selected].copy()
    sv_sub = np.linalg.svd(sub, compute_uv=False)
    if sv_sub[-1] <= RANK_EPS * sv_sub[0]:
        raise ValidationError("selected submatrix is numerically singular")
    lu = scipy.linalg.lu_factor(sub)
    return MaxVolSelection(indices=selected, submatrix=sub, lu=lu, n_swaps=swaps)


def solve_reduced(selection: MaxVolSelection, positions: np.ndarray) -> np.ndarray:
    """Cage vertex positions reproducing the selected skin positions.

    ``positions`` holds the current positions of the selected vertices in
    selection order; the result is exact at those vertices by construction.
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (selection.indices.shape[0], 3):
        raise ValidationError(
            f"expected positions of shape ({selection.indices.shape[0]}, 3), got {positions.shape}"
        )
    return selection.solve(positions)
