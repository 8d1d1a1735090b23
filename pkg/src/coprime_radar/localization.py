"""Bearing-line fusion: intersect per-array direction estimates in 3-D.

The point minimizing the sum of squared distances to all bearing lines
solves a 3x3 linear system assembled from the line projectors; target
association across arrays comes for free from the shared column index of
the coupled decomposition, so only an estimate-to-truth matching remains
for scoring.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Direction


@dataclass(frozen=True, eq=False)
class BearingLine:
    """A ray anchored at an array center along an estimated direction."""

    anchor: np.ndarray
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))


@dataclass
class LocalizationResult:
    position: np.ndarray
    residual: float
    lines_used: int


def line_distance_sq(point, line: BearingLine) -> float:
    """Squared point-to-line distance.

    Uses the projected difference rather than the difference of squared
    norms, which would cancel catastrophically near the line.
    """
    d = np.asarray(point, dtype=float) - line.anchor
    perp = d - np.dot(d, line.direction.v) * line.direction.v
    return float(np.dot(perp, perp))


def fuse_lines(lines) -> LocalizationResult:
    """Closest point to a set of bearing lines (closed form).

    Solves sum_m (I - v_m v_m^T) xi = sum_m (I - v_m v_m^T) p_m, the normal
    equations of the summed squared line distances. All-parallel line sets
    leave the normal matrix singular and raise.
    """
    lines = list(lines)
    if len(lines) < 2:
        raise ValueError("need at least two bearing lines")
    lhs = np.zeros((3, 3))
    rhs = np.zeros(3)
    for line in lines:
        proj = np.eye(3) - np.outer(line.direction.v, line.direction.v)
        lhs += proj
        rhs += proj @ line.anchor
    # Smallest eigenvalue of each projector is 0 along its line; the sum is
    # singular only when every line shares one direction.
    if np.linalg.cond(lhs) > 1e10:
        raise ValueError("bearing lines are (near-)parallel; geometry unlocalizable")
    xi = np.linalg.solve(lhs, rhs)
    residual = float(sum(line_distance_sq(xi, line) for line in lines))
    return LocalizationResult(position=xi, residual=residual, lines_used=len(lines))


def localize_all(doas, centers) -> list[LocalizationResult]:
    """Fuse the per-array direction estimates target by target.

    `doas` is a list over arrays of per-target DoaEstimate lists; the same
    target index refers to the same physical target in every array (shared
    coupled factor), so no association step is needed.
    """
    centers = [np.asarray(c, dtype=float) for c in centers]
    if len(doas) != len(centers):
        raise ValueError("one center per array required")
    if not doas:
        return []
    num_targets = len(doas[0])
    if any(len(d) != num_targets for d in doas):
        raise ValueError("all arrays must report the same number of targets")
    results = []
    for r in range(num_targets):
        lines = [
            BearingLine(anchor=c, direction=d[r].direction)
            for d, c in zip(doas, centers)
        ]
        results.append(fuse_lines(lines))
    return results


def match_targets(estimates: np.ndarray, truth: np.ndarray):
    """Assignment of estimated to true positions minimizing total squared
    error.

    Returns (perm, errors): estimate i corresponds to truth perm[i], and
    errors[i] is that pair's Euclidean distance.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if estimates.shape != truth.shape:
        raise ValueError(
            f"count mismatch: {estimates.shape[0]} estimates vs "
            f"{truth.shape[0]} truths"
        )
    diff = estimates[:, None, :] - truth[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(estimates.shape[0], dtype=np.int64)
    perm[rows] = cols
    errors = np.sqrt(cost[rows, perm[rows]])
    return perm, errors
