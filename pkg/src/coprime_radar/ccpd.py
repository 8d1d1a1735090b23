"""Coupled canonical polyadic decomposition via joint eigenvalue decomposition.

The solver exploits the shift invariance of the uniform subarrays: after
compressing the coupled mode to R dimensions, each subarray yields an R x R
target matrix similar to a diagonal matrix of Vandermonde generators, with a
common similarity basis across every subarray and every receive array. A
generalized eigendecomposition of two random mixtures initializes that basis
and a Newton-type sweep refines it by minimizing the off-diagonal energy of
the jointly transformed set; factors are then read off through rank-1
approximations.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .tensor_ops import joint_compress_mode2, mode2_unfold, subtensor_rows

#: Relative condition number above which a target-matrix block is considered
#: rank deficient and skipped.
COND_THRESHOLD = 1e10


class IdentifiabilityError(RuntimeError):
    """Fewer than two usable target matrices: the joint EVD is not posed."""


@dataclass
class CcpdFactors:
    """Factor estimates of the coupled decomposition.

    A[m] holds the receive signatures (I_m x R), B the shared second factor
    (T x R, or R x R in compressed space), C[m] the per-pulse amplitudes
    (K x R). Column r refers to the same target in every member.
    """

    A: list
    B: np.ndarray
    C: list

    @property
    def rank(self) -> int:
        return self.B.shape[1]


@dataclass
class TargetMatrixSet:
    """Shift-invariance target matrices with provenance and conditioning.

    tags[w] = (array_index, axis, subarray) identifies which uniform subarray
    produced mats[w]; conditioning[w] is the condition estimate of the block
    that was pseudo-inverted. skipped lists (tag, reason) for subarrays that
    failed the rank precondition.
    """

    mats: list
    tags: list
    conditioning: list
    skipped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.mats)


@dataclass
class JevdSolution:
    """Joint diagonalizer and per-matrix generator rows.

    basis is the common similarity transform B; generators[w] is the diagonal
    of B^-1 @ mats[w] @ B; offdiag_residual is the summed off-diagonal energy
    of the transformed set over the summed energy of the input set.
    """

    basis: np.ndarray
    generators: np.ndarray
    offdiag_residual: float


def check_working_conditions(
    samples: int, n_transmit: int, pulses: int, rank: int, subarray_lengths
):
    """Feasibility gate for the shift-invariance construction.

    Passes iff min(samples, n_transmit) >= rank and (L' - 1) * pulses >= rank,
    where L' is the largest uniform subarray length. Report-only: callers
    decide whether to proceed.
    """
    lengths = [int(l) for l in subarray_lengths]
    if not lengths:
        raise ValueError("need at least one subarray length")
    l_max = max(lengths)
    cond_b = min(samples, n_transmit) >= rank
    cond_shift = (l_max - 1) * pulses >= rank
    ok = cond_b and cond_shift
    report = (
        f"min(T={samples}, J={n_transmit}) = {min(samples, n_transmit)} "
        f"{'>=' if cond_b else '<'} R={rank}; "
        f"(L'-1)*K = ({l_max}-1)*{pulses} = {(l_max - 1) * pulses} "
        f"{'>=' if cond_shift else '<'} R={rank}"
    )
    return ok, report


def build_target_matrix(t_sub: np.ndarray):
    """Target matrix of one uniform subarray tensor (L x R x K).

    Splits the mode-2 unfolding into the drop-last-sensor and
    drop-first-sensor blocks M1, M2 and returns (pinv(M1) @ M2).T together
    with the condition estimate of M1. When the first factor is Vandermonde
    with generators z_r and the second factor is an invertible B, the result
    is exactly B @ diag(z) @ B^-1.
    """
    t_sub = np.asarray(t_sub)
    if t_sub.ndim != 3:
        raise ValueError("expected a third-order subarray tensor")
    n_sens, rank, n_pulse = t_sub.shape
    if n_sens < 2:
        raise ValueError("shift invariance needs at least two sensors")
    unf = mode2_unfold(t_sub)
    m1 = unf[: (n_sens - 1) * n_pulse, :]
    m2 = unf[n_pulse:, :]
    x, _, _, sv = scipy.linalg.lstsq(m1, m2, lapack_driver="gelsd")
    if sv is None or sv[-1] == 0.0:
        cond = np.inf
    else:
        cond = float(sv[0] / sv[-1])
    return x.T, cond


_AXIS_SLOTS = (("x", 1), ("x", 2), ("y", 1), ("y", 2))


def _subarray_tensor(tensor, layout, axis: str, sub: int):
    """Extract the compressed tensor of one uniform subarray."""
    if axis == "x":
        t_axis = subtensor_rows(tensor, layout.q_x)
        idx = layout.q_x1 if sub == 1 else layout.q_x2
    else:
        t_axis = subtensor_rows(tensor, layout.q_y)
        idx = layout.q_y1 if sub == 1 else layout.q_y2
    return subtensor_rows(t_axis, idx)


def build_all_targets(
    compressed, layouts, rank: int, cond_threshold: float = COND_THRESHOLD
) -> TargetMatrixSet:
    """Target matrices for every (array, axis, subarray) combination.

    Subarrays whose drop-one block cannot have full column rank
    ((L-1)*K < rank) or whose condition estimate exceeds `cond_threshold`
    are skipped with a tagged diagnostic. Raises IdentifiabilityError when
    fewer than two matrices survive.
    """
    compressed = [np.asarray(t) for t in compressed]
    if len(compressed) != len(layouts):
        raise ValueError("one layout per tensor required")
    mats, tags, conds, skipped = [], [], [], []
    for m, (tensor, layout) in enumerate(zip(compressed, layouts)):
        if tensor.shape[1] != rank:
            raise ValueError(
                f"tensor {m} second mode is {tensor.shape[1]}, expected {rank}"
            )
        n_pulse = tensor.shape[2]
        for axis, sub in _AXIS_SLOTS:
            tag = (m, axis, sub)
            t_sub = _subarray_tensor(tensor, layout, axis, sub)
            n_sens = t_sub.shape[0]
            if (n_sens - 1) * n_pulse < rank:
                skipped.append((tag, f"(L-1)*K = {(n_sens - 1) * n_pulse} < {rank}"))
                continue
            g, cond = build_target_matrix(t_sub)
            if cond > cond_threshold:
                skipped.append((tag, f"condition estimate {cond:.3e}"))
                continue
            mats.append(g)
            tags.append(tag)
            conds.append(cond)
    if len(mats) < 2:
        raise IdentifiabilityError(
            f"only {len(mats)} usable target matrices (skipped: {skipped})"
        )
    return TargetMatrixSet(mats=mats, tags=tags, conditioning=conds, skipped=skipped)


def _offdiag_energy(transformed) -> float:
    total = 0.0
    for d in transformed:
        off = d - np.diag(np.diag(d))
        total += float(np.sum(np.abs(off) ** 2))
    return total


def _transform(mats, basis):
    inv_gb = [np.linalg.solve(basis, g @ basis) for g in mats]
    return inv_gb


def gevd_init(tm: TargetMatrixSet, rng) -> np.ndarray:
    """Algebraic initializer: eigenvectors of a random matrix-pencil mixture.

    Two orthonormal random mixtures of all target matrices share the common
    eigenbasis but have generically distinct eigenvalue ratios even when a
    single matrix carries collisions, so the pencil eigenvectors recover the
    basis in one shot on exact data. Retries with fresh mixtures if the
    pencil is singular or defective.
    """
    rng = np.random.default_rng(rng)
    n_mats = len(tm.mats)
    if n_mats < 2:
        raise ValueError("need at least two target matrices")
    rank = tm.mats[0].shape[0]
    if rank == 1:
        return np.ones((1, 1), dtype=complex)
    stack = np.stack(tm.mats)
    last_err = None
    for _ in range(8):
        z = rng.standard_normal((n_mats, 2)) + 1j * rng.standard_normal((n_mats, 2))
        q, _ = np.linalg.qr(z)
        h1 = np.tensordot(q[:, 0], stack, axes=(0, 0))
        h2 = np.tensordot(q[:, 1], stack, axes=(0, 0))
        try:
            vals, vecs = scipy.linalg.eig(h1, h2)
        except scipy.linalg.LinAlgError as err:  # pragma: no cover
            last_err = err
            continue
        if not np.all(np.isfinite(vals)):
            last_err = ValueError("singular pencil mixture")
            continue
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        if np.linalg.cond(vecs) > 1e12:
            last_err = ValueError("defective pencil mixture")
            continue
        return vecs
    raise ValueError(f"could not form a usable pencil: {last_err}")


def _jevd_solution(mats, basis, denom) -> JevdSolution:
    transformed = _transform(mats, basis)
    gens = np.stack([np.diag(d) for d in transformed])
    resid = _offdiag_energy(transformed) / denom
    return JevdSolution(basis=basis, generators=gens, offdiag_residual=resid)


def refine_joint_diag(
    tm: TargetMatrixSet,
    basis0: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> JevdSolution:
    """Minimize the joint off-diagonal energy starting from `basis0`.

    Newton-type multiplicative sweeps B <- B (I + E) with a backtracking
    step: each off-diagonal correction E_ij solves the scalar least-squares
    problem over all matrices linearized around the current diagonals. The
    returned residual never exceeds the initializer's.
    """
    mats = [np.asarray(g) for g in tm.mats]
    basis0 = np.asarray(basis0, dtype=complex)
    rank = basis0.shape[0]
    denom = sum(float(np.sum(np.abs(g) ** 2)) for g in mats)
    if denom == 0.0:
        raise ValueError("all target matrices are zero")

    if len(mats) == 1:
        _, vecs = np.linalg.eig(mats[0])
        vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
        return _jevd_solution(mats, vecs, denom)

    basis = basis0 / np.linalg.norm(basis0, axis=0, keepdims=True)
    best = _jevd_solution(mats, basis, denom)
    energy = best.offdiag_residual * denom

    eye = np.eye(rank)
    for _ in range(max_iter):
        transformed = _transform(mats, basis)
        d_stack = np.stack(transformed)
        diags = np.stack([np.diag(d) for d in transformed])
        gaps = diags[:, :, None] - diags[:, None, :]
        num = -np.sum(np.conj(gaps) * d_stack, axis=0)
        den = np.sum(np.abs(gaps) ** 2, axis=0)
        corr = np.zeros_like(num)
        usable = den > np.finfo(float).tiny
        corr[usable] = num[usable] / den[usable]
        np.fill_diagonal(corr, 0.0)

        step = 1.0
        improved = False
        while step > 1e-6:
            cand = basis @ (eye + step * corr)
            norms = np.linalg.norm(cand, axis=0)
            if not np.all(norms > 0):
                step *= 0.5
                continue
            cand /= norms
            try:
                cand_energy = _offdiag_energy(_transform(mats, cand))
            except np.linalg.LinAlgError:
                step *= 0.5
                continue
            if np.isfinite(cand_energy) and cand_energy < energy:
                basis = cand
                prev = energy
                energy = cand_energy
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if energy < denom * 1e-300 or (prev - energy) < tol * prev:
            break

    if energy / denom <= best.offdiag_residual:
        best = _jevd_solution(mats, basis, denom)
    return best


def recover_factors(compressed, basis: np.ndarray) -> CcpdFactors:
    """Read the per-array factors off the compressed tensors.

    For each array, T_2 @ B^-T restores the Khatri-Rao structure; every
    column reshapes to a rank-1 sensor-by-pulse matrix whose SVD factors
    give one receive-signature and one amplitude column. Signature columns
    are rescaled so the origin-element entry is 1, with amplitudes absorbing
    the scale.
    """
    basis = np.asarray(basis)
    rank = basis.shape[1]
    a_mats, c_mats = [], []
    for m, tensor in enumerate(compressed):
        tensor = np.asarray(tensor)
        n_sens, _, n_pulse = tensor.shape
        kr = mode2_unfold(tensor) @ np.linalg.inv(basis).T
        a = np.empty((n_sens, rank), dtype=complex)
        c = np.empty((n_pulse, rank), dtype=complex)
        for r in range(rank):
            omega = kr[:, r].reshape(n_sens, n_pulse)
            if not np.any(omega):
                raise ValueError(f"target {r} not observed by array {m}")
            uu, ss, vh = np.linalg.svd(omega, full_matrices=False)
            a_col = uu[:, 0]
            c_col = ss[0] * vh[0, :]
            ref = a_col[0]
            if abs(ref) < 1e-12 * np.linalg.norm(a_col):
                raise ValueError(
                    f"origin element of array {m}, target {r} carries no energy"
                )
            a[:, r] = a_col / ref
            c[:, r] = c_col * ref
        a_mats.append(a)
        c_mats.append(c)
    return CcpdFactors(A=a_mats, B=basis, C=c_mats)


def solve(obs, layouts, rank: int, rng=None, n_transmit: int | None = None):
    """Full coupled decomposition of one observation set.

    Pipeline: joint mode-2 compression, target-matrix construction, pencil
    initialization, joint-diagonalization refinement, rank-1 factor
    recovery. Returns (factors, jevd, diagnostics); diagnostics carry stage
    wall-clock seconds, per-matrix conditioning and the feasibility report.

    `obs` may be an ObservationSet or a plain list of tensors; `n_transmit`
    feeds the feasibility gate when known (the data itself does not reveal
    it). Infeasible configurations warn and proceed.
    """
    tensors = getattr(obs, "tensors", obs)
    tensors = [np.asarray(t) for t in tensors]
    if len(tensors) != len(layouts):
        raise ValueError("one layout per tensor required")
    samples = tensors[0].shape[1]
    n_pulse = tensors[0].shape[2]
    if any(t.shape[1] != samples or t.shape[2] != n_pulse for t in tensors):
        raise ValueError("tensors must share sample and pulse dimensions")

    sub_lengths = []
    for lay in layouts:
        sub_lengths += [
            lay.axis_x.len_a, lay.axis_x.len_b, lay.axis_y.len_a, lay.axis_y.len_b,
        ]
    ok, report = check_working_conditions(
        samples, n_transmit if n_transmit is not None else samples,
        n_pulse, rank, sub_lengths,
    )
    if not ok:
        warnings.warn(f"working conditions not met ({report}); attempting anyway")

    rng = np.random.default_rng(rng)
    stages: dict[str, float] = {}

    t0 = time.perf_counter()
    compressed, basis_v = joint_compress_mode2(tensors, rank)
    stages["compress"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tm = build_all_targets(compressed, layouts, rank)
    stages["targets"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    basis0 = gevd_init(tm, rng)
    stages["gevd"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    jevd = refine_joint_diag(tm, basis0)
    stages["refine"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    factors = recover_factors(compressed, jevd.basis)
    stages["recover"] = time.perf_counter() - t0

    diagnostics = {
        "offdiag_residual": jevd.offdiag_residual,
        "conditioning": list(tm.conditioning),
        "tags": list(tm.tags),
        "skipped": list(tm.skipped),
        "matrices_used": len(tm),
        "stage_seconds": stages,
        "working_conditions": (ok, report),
        "compression_basis": basis_v,
    }
    return factors, jevd, diagnostics
