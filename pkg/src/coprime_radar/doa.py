"""Direction-of-arrival extraction from recovered receive signatures.

Each signature column restricted to one uniform subarray is a geometric
progression whose ratio encodes a direction cosine modulo the grid pitch;
the two coprime pitches per axis leave exactly one consistent cosine, found
by enumerating both ambiguity sets and picking the closest pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import Direction, ReceiveArrayLayout


@dataclass(frozen=True)
class GeneratorEstimate:
    """Unit-modulus progression ratio of one uniform subarray.

    pitch is the subarray grid pitch in half-wavelength units; weight is the
    number of consecutive-element ratios that contributed (length - 1).
    """

    z: complex
    pitch: int
    weight: float


@dataclass(frozen=True)
class DoaEstimate:
    """One (array, target) direction with its direction cosines.

    `valid` is False when the cosines were inconsistent (u^2 + w^2 beyond
    the unit disk, or no ambiguity branch agreed within tolerance); the
    direction is still the best effort, clamped to the disk.
    """

    direction: Direction
    u: float
    w: float
    array_index: int
    target_index: int
    valid: bool = True


class CosineResolution(NamedTuple):
    u: float
    mismatch: float


def estimate_generator(a_sub: np.ndarray, pitch: int) -> GeneratorEstimate:
    """Least-squares ratio of consecutive entries, normalized to unit modulus.

    Invariant to global complex scaling of the input; exact on an exact
    geometric progression with a unit-modulus ratio.
    """
    a_sub = np.asarray(a_sub).ravel()
    if a_sub.size < 2:
        raise ValueError("need at least two elements to estimate a shift ratio")
    head = a_sub[:-1]
    tail = a_sub[1:]
    denom = np.vdot(head, head)
    if denom == 0.0:
        raise ValueError("leading subarray block is zero")
    z = complex(np.vdot(head, tail) / denom)
    mag = abs(z)
    if mag == 0.0:
        raise ValueError("degenerate shift ratio")
    return GeneratorEstimate(z=z / mag, pitch=int(pitch), weight=float(a_sub.size - 1))


def _cosine_candidates(psi: float, pitch: int) -> np.ndarray:
    """All direction cosines in [-1, 1] consistent with phase `psi` on a
    subarray of grid pitch `pitch`."""
    k_lo = math.ceil((-pitch - psi / math.pi) / 2.0) - 1
    k_hi = math.floor((pitch - psi / math.pi) / 2.0) + 1
    k = np.arange(k_lo, k_hi + 1)
    cand = (psi / math.pi + 2.0 * k) / pitch
    cand = cand[np.abs(cand) <= 1.0 + 1e-12]
    return np.clip(cand, -1.0, 1.0)


def resolve_coprime(ga: GeneratorEstimate, gb: GeneratorEstimate) -> CosineResolution:
    """Disambiguate one direction cosine from two coprime-pitch generators.

    Enumerates both candidate sets and returns the weight-averaged closest
    pair. For exact inputs coprimality makes the closest pair unique; a
    mismatch above 2/(pitch_a*pitch_b) signals estimation failure (the best
    pair is still returned, callers flag on the mismatch).
    """
    if math.gcd(ga.pitch, gb.pitch) != 1:
        raise ValueError(f"pitches must be coprime, got ({ga.pitch}, {gb.pitch})")
    cand_a = _cosine_candidates(float(np.angle(ga.z)), ga.pitch)
    cand_b = _cosine_candidates(float(np.angle(gb.z)), gb.pitch)
    diff = np.abs(cand_a[:, None] - cand_b[None, :])
    ia, ib = np.unravel_index(int(np.argmin(diff)), diff.shape)
    ua, ub = float(cand_a[ia]), float(cand_b[ib])
    u = (ga.weight * ua + gb.weight * ub) / (ga.weight + gb.weight)
    return CosineResolution(u=u, mismatch=abs(ua - ub))


def _axis_cosine(a_axis, idx1, idx2, pitch1, pitch2):
    g1 = estimate_generator(a_axis[idx1], pitch1)
    g2 = estimate_generator(a_axis[idx2], pitch2)
    res = resolve_coprime(g1, g2)
    tol = 2.0 / (pitch1 * pitch2)
    return res.u, res.mismatch <= tol


def doas_from_factors(
    a_hat: np.ndarray, layout: ReceiveArrayLayout, array_index: int = 0
) -> list[DoaEstimate]:
    """Directions for every signature column of one receive array.

    Per column: the four uniform-subarray slices give two generators per
    axis; the x pair resolves the cosine u, the y pair the cosine w, and the
    third component is fixed to the positive-z half space. Cosines slightly
    outside the unit disk are clamped; the estimate is flagged invalid when
    u^2 + w^2 exceeds 1 + 1e-6 or an ambiguity match failed.
    """
    a_hat = np.asarray(a_hat)
    if a_hat.shape[0] != layout.n_elements:
        raise ValueError(
            f"signature rows {a_hat.shape[0]} != layout elements {layout.n_elements}"
        )
    out = []
    for r in range(a_hat.shape[1]):
        col = a_hat[:, r]
        a_x = col[layout.q_x]
        a_y = col[layout.q_y]
        u, ok_u = _axis_cosine(
            a_x, layout.q_x1, layout.q_x2, layout.axis_x.pitch_a, layout.axis_x.pitch_b
        )
        w, ok_w = _axis_cosine(
            a_y, layout.q_y1, layout.q_y2, layout.axis_y.pitch_a, layout.axis_y.pitch_b
        )
        rho2 = u * u + w * w
        valid = ok_u and ok_w and rho2 <= 1.0 + 1e-6
        if rho2 > 1.0:
            scale = 1.0 / math.sqrt(rho2)
            u, w = u * scale, w * scale
            rho2 = 1.0
        vz = math.sqrt(max(0.0, 1.0 - rho2))
        out.append(
            DoaEstimate(
                direction=Direction(np.array([u, w, vz])),
                u=u,
                w=w,
                array_index=array_index,
                target_index=r,
                valid=valid,
            )
        )
    return out
