"""Shared builders for planted models and the desk-scale benchmark scenes."""

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from coprime_radar import bench, scene as scene_mod
from coprime_radar.bench import _build_arrays


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def unit_generators(rng, n_mats, rank, min_gap=0.15):
    """Unit-modulus generator rows with per-row phase gaps above min_gap."""
    rows = []
    for _ in range(n_mats):
        while True:
            phases = rng.uniform(-np.pi, np.pi, rank)
            if rank == 1 or np.min(np.abs(np.subtract.outer(phases, phases))[
                ~np.eye(rank, dtype=bool)
            ]) > min_gap:
                rows.append(np.exp(1j * phases))
                break
    return np.stack(rows)


def planted_target_matrices(rng, rank, n_mats, min_gap=0.15):
    """Jointly diagonalizable matrix set with known basis and generators."""
    while True:
        basis = complex_gaussian(rng, (rank, rank))
        if np.linalg.cond(basis) < 50:
            break
    gens = unit_generators(rng, n_mats, rank, min_gap)
    binv = np.linalg.inv(basis)
    mats = [basis @ np.diag(gens[w]) @ binv for w in range(n_mats)]
    return mats, basis, gens


def match_columns(est, truth):
    """Permutation p with est[:, i] ~ truth[:, p[i]], by modulus correlation."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    corr = np.abs(est.conj().T @ truth)
    corr /= np.linalg.norm(est, axis=0)[:, None] * np.linalg.norm(truth, axis=0)[None, :]
    rows, cols = linear_sum_assignment(-corr)
    perm = np.empty(est.shape[1], dtype=int)
    perm[rows] = cols
    return perm


def match_values(est, truth):
    """Permutation p minimizing sum |est[i] - truth[p[i]]|."""
    est = np.asarray(est).ravel()
    truth = np.asarray(truth).ravel()
    cost = np.abs(est[:, None] - truth[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(est.size, dtype=int)
    perm[rows] = cols
    return perm


def subspace_angle(a, b):
    """Angle (radians) between complex vectors, scale/phase invariant."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    c = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def build_case_scene(preset, scene_seed):
    """Deterministic noiseless observation set for a benchmark preset."""
    cfg = bench.preset_config(preset)
    transmit, receives = _build_arrays(cfg)
    rng = np.random.default_rng(scene_seed)
    anchors = [transmit.center] + [lay.center for lay in receives]
    targets = scene_mod.sample_targets(
        cfg.target_box, cfg.num_targets, rng, anchors=anchors
    )
    radar_scene = scene_mod.RadarScene(
        transmit=transmit, receives=receives, targets=targets
    )
    waveforms = scene_mod.sample_waveforms(cfg.samples_per_pulse, cfg.n_transmit, rng)
    rcs = scene_mod.sample_rcs(cfg.num_targets, cfg.pulses, len(receives), rng)
    obs = scene_mod.simulate(radar_scene, waveforms, rcs)
    return {
        "config": cfg,
        "transmit": transmit,
        "receives": receives,
        "targets": targets,
        "waveforms": waveforms,
        "obs": obs,
    }


@pytest.fixture(scope="session")
def case1_noiseless():
    return build_case_scene("case1", scene_seed=20240601)
