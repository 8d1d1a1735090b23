"""Scene generation and the multistatic observation model.

Targets fluctuate pulse to pulse (Swerling-II style): every pulse, target and
receive array gets an independent circular complex Gaussian amplitude. The
received data cube of array m stacks, over pulses, the rank-R mixtures of
receive signatures and waveform-filtered transmit signatures, so the coupled
set of cubes admits a coupled polyadic decomposition with the shared factor
B = S @ T_tx.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .ccpd import CcpdFactors
from .geometry import (
    Direction,
    ReceiveArrayLayout,
    TransmitArrayLayout,
    direction_between,
    steering_vector,
)
from .tensor_ops import cpd_eval

#: Minimum angular separation (radians) between any two targets as seen from
#: any array; draws violating it are rejected.
DOA_SEPARATION_RAD = 1e-6

_REJECTION_RETRIES = 100


@dataclass(frozen=True)
class SceneConfig:
    """Monte Carlo scene parameters; box coordinates are in wavelengths."""

    target_box: tuple
    num_targets: int
    pulses: int
    samples_per_pulse: int
    seed: int = 0

    def __post_init__(self):
        lo = np.asarray(self.target_box[0], dtype=float)
        hi = np.asarray(self.target_box[1], dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise ValueError("target_box must be (lo, hi) corner 3-vectors, lo <= hi")
        if min(self.num_targets, self.pulses, self.samples_per_pulse) < 1:
            raise ValueError("num_targets, pulses and samples_per_pulse must be >= 1")


@dataclass
class RadarScene:
    transmit: TransmitArrayLayout
    receives: list[ReceiveArrayLayout]
    targets: np.ndarray


@dataclass
class ObservationSet:
    """Coupled data cubes, one per receive array, each I_m x T x K.

    `noiseless` keeps clean copies once noise is added; `truth` carries the
    generating factors for oracle comparisons.
    """

    tensors: list
    noiseless: list | None = None
    truth: CcpdFactors | None = None


def _complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def sample_targets(
    box,
    num_targets: int,
    rng,
    anchors=(),
    min_separation: float = DOA_SEPARATION_RAD,
) -> np.ndarray:
    """Uniform target positions in `box`, rejecting draws whose direction
    from any anchor point comes within `min_separation` radians of an
    already-accepted target.

    Raises RuntimeError when a target cannot be placed within the retry
    budget, which signals an overcrowded box.
    """
    rng = np.random.default_rng(rng)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    anchors = [np.asarray(a, dtype=float) for a in anchors]
    accepted: list[np.ndarray] = []
    for r in range(num_targets):
        for _ in range(_REJECTION_RETRIES):
            p = rng.uniform(lo, hi)
            if _separated(p, accepted, anchors, min_separation):
                accepted.append(p)
                break
        else:
            raise RuntimeError(
                f"could not place target {r} with {min_separation} rad separation; "
                "box too crowded"
            )
    return np.array(accepted)


def _separated(p, accepted, anchors, min_sep) -> bool:
    for q in accepted:
        for a in anchors:
            dp, dq = p - a, q - a
            np_, nq = np.linalg.norm(dp), np.linalg.norm(dq)
            if np_ == 0.0 or nq == 0.0:
                return False
            cosang = np.clip(np.dot(dp, dq) / (np_ * nq), -1.0, 1.0)
            if math.acos(cosang) < min_sep:
                return False
    return True


def sample_rcs(num_targets: int, pulses: int, num_arrays: int, rng) -> list:
    """Per-array pulse-by-target amplitude matrices, i.i.d. unit-variance
    circular complex Gaussian across pulses, targets and arrays."""
    rng = np.random.default_rng(rng)
    return [_complex_gaussian(rng, (pulses, num_targets)) for _ in range(num_arrays)]


def sample_waveforms(samples: int, n_transmit: int, rng) -> np.ndarray:
    """Random probing waveform matrix (samples x n_transmit), i.i.d. circular
    complex Gaussian, full column rank with probability one."""
    if samples < n_transmit:
        warnings.warn(
            f"samples={samples} < transmit elements={n_transmit}: "
            "the shared factor cannot have full column rank"
        )
    rng = np.random.default_rng(rng)
    return _complex_gaussian(rng, (samples, n_transmit))


def simulate(scene: RadarScene, waveforms: np.ndarray, rcs) -> ObservationSet:
    """Noise-free observation cubes with ground-truth factors attached.

    Array m, pulse k: X[:, :, k] = sum_r rcs[m][k, r] * a_r outer (S t_r),
    with a_r the receive steering vector and t_r the transmit steering
    vector of target r.
    """
    waveforms = np.asarray(waveforms)
    targets = np.asarray(scene.targets, dtype=float)
    num_targets = targets.shape[0]
    if len(rcs) != len(scene.receives):
        raise ValueError("one amplitude matrix per receive array required")
    if waveforms.shape[1] != scene.transmit.n_elements:
        raise ValueError("waveform column count must match transmit elements")

    t_steer = np.column_stack(
        [
            steering_vector(scene.transmit, direction_between(scene.transmit.center, t))
            for t in targets
        ]
    )
    shared_b = waveforms @ t_steer

    tensors, a_mats = [], []
    for layout, c in zip(scene.receives, rcs):
        c = np.asarray(c)
        if c.shape[1] != num_targets:
            raise ValueError("amplitude matrix column count must match targets")
        a = np.column_stack(
            [
                steering_vector(layout, direction_between(layout.center, t))
                for t in targets
            ]
        )
        tensors.append(cpd_eval(a, shared_b, c))
        a_mats.append(a)

    truth = CcpdFactors(A=a_mats, B=shared_b, C=[np.asarray(c) for c in rcs])
    return ObservationSet(tensors=tensors, noiseless=[t.copy() for t in tensors], truth=truth)


def add_noise(obs: ObservationSet, snr_db: float, rng) -> ObservationSet:
    """Add white circular complex Gaussian noise at the requested SNR.

    The noise variance is shared across arrays: mean squared magnitude of
    all noiseless entries (pooled) divided by 10^(snr_db/10). An infinite
    snr_db returns the observations unchanged.
    """
    clean = obs.noiseless if obs.noiseless is not None else obs.tensors
    if clean is None:
        raise ValueError("observation set carries no noiseless data")
    clean = [np.asarray(t) for t in clean]
    if math.isinf(snr_db) and snr_db > 0:
        return ObservationSet(
            tensors=[t.copy() for t in clean],
            noiseless=[t.copy() for t in clean],
            truth=obs.truth,
        )
    rng = np.random.default_rng(rng)
    signal_power = float(
        sum(np.sum(np.abs(t) ** 2) for t in clean)
        / sum(t.size for t in clean)
    )
    sigma2 = signal_power * 10.0 ** (-snr_db / 10.0)
    noisy = [t + math.sqrt(sigma2) * _complex_gaussian(rng, t.shape) for t in clean]
    return ObservationSet(
        tensors=noisy, noiseless=[t.copy() for t in clean], truth=obs.truth
    )
