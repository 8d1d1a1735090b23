"""Dense third-order complex tensor kernels.

The mode-2 unfolding convention is fixed throughout the package: a tensor of
shape (I, J, K) unfolds to an (I*K, J) matrix whose row i*K + k (0-based)
holds the fiber T[i, :, k]. Under this convention the unfolding of a rank-R
model [A, B, C] equals khatri_rao(A, C) @ B.T.
"""

from __future__ import annotations

import numpy as np


def mode2_unfold(t: np.ndarray) -> np.ndarray:
    """Mode-2 matricization: (I, J, K) -> (I*K, J), row index i*K + k."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim={t.ndim}")
    i, j, k = t.shape
    return np.transpose(t, (0, 2, 1)).reshape(i * k, j)


def mode2_fold_column(col: np.ndarray, n_rows: int, n_pulses: int) -> np.ndarray:
    """Inverse of the mode-2 row indexing for one column: (I*K,) -> (I, K)."""
    col = np.asarray(col)
    if col.size != n_rows * n_pulses:
        raise ValueError("column length inconsistent with target shape")
    return col.reshape(n_rows, n_pulses)


def khatri_rao(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product with rows ordered to match mode2_unfold.

    Column r of the result is a[:, r] kron c[:, r], i.e. row i*K + k holds
    a[i, r] * c[k, r].
    """
    a = np.asarray(a)
    c = np.asarray(c)
    if a.ndim != 2 or c.ndim != 2 or a.shape[1] != c.shape[1]:
        raise ValueError(
            f"column counts must match, got {a.shape} and {c.shape}"
        )
    return (a[:, None, :] * c[None, :, :]).reshape(a.shape[0] * c.shape[0], a.shape[1])


def cpd_eval(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Evaluate the rank-R polyadic model: T[i,j,k] = sum_r a_ir b_jr c_kr."""
    a, b, c = np.asarray(a), np.asarray(b), np.asarray(c)
    if not (a.ndim == b.ndim == c.ndim == 2) or not (
        a.shape[1] == b.shape[1] == c.shape[1]
    ):
        raise ValueError("factors must be matrices with a common column count")
    return np.einsum("ir,jr,kr->ijk", a, b, c)


def subtensor_rows(t: np.ndarray, idx) -> np.ndarray:
    """First-mode slice selection t[idx, :, :], preserving index order."""
    t = np.asarray(t)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("index list must be one-dimensional")
    if idx.size and (idx.min() < 0 or idx.max() >= t.shape[0]):
        raise IndexError(
            f"row indices out of bounds for first-mode size {t.shape[0]}"
        )
    return t[idx, :, :]


def joint_compress_mode2(tensors, rank: int):
    """Reduce the shared second mode of coupled tensors to `rank` dimensions.

    Stacks the mode-2 unfoldings of all tensors row-wise and takes the
    dominant rank-`rank` subspace of the shared mode-2 fiber space (the
    conjugate of the top right singular vectors). Each tensor is contracted
    along mode 2 with the conjugated basis, i.e. every fiber is projected
    onto that subspace. Because mode 2 is the coupled mode, one shared
    subspace serves every tensor; on exact rank-`rank` data the compressed
    set admits the same coupled decomposition with second factor
    basis^H @ B, whose singular values (hence conditioning) match B's.

    Returns
    -------
    compressed : list of ndarray, shapes (I_m, rank, K)
    basis : ndarray, shape (T, rank), orthonormal columns spanning the
        dominant fiber subspace
    """
    tensors = [np.asarray(t) for t in tensors]
    if not tensors:
        raise ValueError("need at least one tensor")
    t_dim = tensors[0].shape[1]
    if any(t.ndim != 3 or t.shape[1] != t_dim for t in tensors):
        raise ValueError("all tensors must be third-order with a common second mode")
    total_rows = sum(t.shape[0] * t.shape[2] for t in tensors)
    if total_rows < rank or t_dim < rank:
        raise ValueError(
            f"cannot extract a rank-{rank} subspace from a "
            f"{total_rows}x{t_dim} stacked unfolding"
        )

    stacked = np.vstack([mode2_unfold(t) for t in tensors])
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    if s[rank - 1] <= s[0] * 1e-12:
        raise ValueError(
            f"stacked unfolding has numerical rank below {rank}; "
            "the requested rank looks overestimated"
        )
    basis = vh[:rank].T
    compressed = [np.einsum("ijk,js->isk", t, basis.conj()) for t in tensors]
    return compressed, basis


def rank1_approx(mtx: np.ndarray):
    """Dominant rank-1 factors of a matrix: mtx ~= u @ v.T.

    v is the (conjugated) dominant right singular vector with unit norm and
    its largest-magnitude entry rotated to the positive real axis; u absorbs
    the dominant singular value and the compensating phase.
    """
    mtx = np.asarray(mtx)
    if mtx.ndim != 2:
        raise ValueError("expected a matrix")
    if not np.any(mtx):
        raise ValueError("rank-1 approximation of the zero matrix is undefined")
    uu, ss, vh = np.linalg.svd(mtx, full_matrices=False)
    u = ss[0] * uu[:, 0]
    v = vh[0, :].copy()
    pivot = int(np.argmax(np.abs(v)))
    phase = v[pivot] / abs(v[pivot])
    return u * phase, v / phase
