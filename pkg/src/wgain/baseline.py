"""Biharmonic hole filling, the non-learned reference inpainter.

Missing pixels are solved from Delta^2 u = 0 with the 13-point bilaplacian
stencil, using known pixels as boundary data. Out-of-image stencil taps fold
back inside via half-sample symmetric reflection, which keeps the system
matrix symmetric. Independent missing regions are solved separately; small
systems go through a direct sparse solve, large ones through conjugate
gradients. A singular system degrades to the harmonic (5-point) equation for
that region with a warning.
"""
from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import linalg as sparse_linalg

from .errors import ValidationError
from .masks import Mask
from .model import _check_pair

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 10_000

BIHARMONIC_STENCIL = {
    (0, 0): 20.0,
    (0, 1): -8.0, (0, -1): -8.0, (1, 0): -8.0, (-1, 0): -8.0,
    (1, 1): 2.0, (1, -1): 2.0, (-1, 1): 2.0, (-1, -1): 2.0,
    (0, 2): 1.0, (0, -2): 1.0, (2, 0): 1.0, (-2, 0): 1.0,
}

HARMONIC_STENCIL = {
    (0, 0): 4.0,
    (0, 1): -1.0, (0, -1): -1.0, (1, 0): -1.0, (-1, 0): -1.0,
}


def _fold(i: int, n: int) -> int:
    if i < 0:
        return -1 - i
    if i >= n:
        return 2 * n - 1 - i
    return i


def _build_system(
    coords: np.ndarray,
    index_of: np.ndarray,
    missing: np.ndarray,
    image: np.ndarray,
    stencil: dict[tuple[int, int], float],
) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Assemble A u = b over the unknown pixels; b has one column per channel."""
    h, w = missing.shape
    n_unknown = len(coords)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    b = np.zeros((n_unknown, image.shape[2]))
    for k, (r, c) in enumerate(coords):
        for (dr, dc), wt in stencil.items():
            rr = _fold(int(r) + dr, h)
            cc = _fold(int(c) + dc, w)
            if missing[rr, cc]:
                rows.append(k)
                cols.append(index_of[rr, cc])
                vals.append(wt)
            else:
                b[k] -= wt * image[rr, cc]
    mat = sparse.coo_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown))
    return mat.tocsr(), b


def _cg(mat: sparse.csr_matrix, rhs: np.ndarray) -> tuple[np.ndarray, int]:
    try:
        return sparse_linalg.cg(mat, rhs, rtol=1e-10, atol=0.0, maxiter=20_000)
    except TypeError:
        return sparse_linalg.cg(mat, rhs, tol=1e-10, atol=0.0, maxiter=20_000)


def _solve(mat: sparse.csr_matrix, b: np.ndarray) -> np.ndarray | None:
    """Solve for all channels; None signals a singular or non-converged system."""
    n = mat.shape[0]
    if n <= DIRECT_SOLVE_LIMIT:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sparse_linalg.MatrixRankWarning)
            try:
                sol = sparse_linalg.spsolve(mat, b)
            except (sparse_linalg.MatrixRankWarning, RuntimeError):
                return None
        sol = np.atleast_2d(sol)
        if sol.shape[0] != n:
            sol = sol.T
        return sol if np.all(np.isfinite(sol)) else None
    sol = np.empty_like(b)
    for ch in range(b.shape[1]):
        x, info = _cg(mat, b[:, ch])
        if info != 0 or not np.all(np.isfinite(x)):
            return None
        sol[:, ch] = x
    return sol


def biharmonic_inpaint(image: np.ndarray, mask: Mask) -> np.ndarray:
    """Fill the missing pixels of image; valid pixels pass through untouched."""
    _check_pair(image, mask)
    h, w = mask.height, mask.width
    if h < 2 or w < 2:
        raise ValidationError(f"image too small to inpaint: {h}x{w}")
    missing = mask.bits == 0
    if not missing.any():
        return image.copy()
    if missing.all():
        raise ValidationError("mask has no valid pixels, nothing to extrapolate from")

    out = image.astype(np.float64, copy=True)

    # group missing pixels so that regions coupled through the 13-point
    # stencil (reach 2, including diagonals) land in one system
    reach = ndimage.binary_dilation(missing, structure=np.ones((3, 3), bool))
    labels, n_comp = ndimage.label(reach, structure=np.ones((3, 3), int))

    index_of = np.full((h, w), -1, dtype=np.int64)
    for comp in range(1, n_comp + 1):
        comp_missing = missing & (labels == comp)
        coords = np.argwhere(comp_missing)
        if len(coords) == 0:
            continue
        index_of[comp_missing] = np.arange(len(coords))

        mat, b = _build_system(coords, index_of, comp_missing, out, BIHARMONIC_STENCIL)
        sol = _solve(mat, b)
        if sol is None:
            log.warning(
                "biharmonic system singular for region of %d pixels, "
                "falling back to harmonic fill", len(coords),
            )
            mat, b = _build_system(coords, index_of, comp_missing, out, HARMONIC_STENCIL)
            sol = _solve(mat, b)
            if sol is None:
                raise ValidationError("inpainting system unsolvable for a missing region")
        out[coords[:, 0], coords[:, 1]] = sol

    np.clip(out, 0.0, 1.0, out=out)
    result = out.astype(image.dtype, copy=False)
    # never let solver output disturb known pixels
    result[~missing] = image[~missing]
    return result
