"""Seeded Monte Carlo benchmark: sweep SNR, score DOA/position accuracy,
emit a CSV of per-trial records and per-SNR aggregates.

Metric definitions used throughout:

- mae_deg: mean over all (array, target) pairs of the great-circle angle
  between the estimated and true directions, in degrees, after matching
  estimated to true targets by position.
- rmse_lambda: root-mean-square 3-D position error over targets, in
  wavelengths, under the same matching.
- cpu_ms: wall-clock of the estimation chain only (decomposition through
  localization); scene synthesis and noise generation are excluded.

The CSV schema is fixed: header
``kind,snr_db,trial,mae_deg,rmse_lambda,cpu_ms,offdiag_residual,failed``
with kind=trial rows (failed is 0/1) and kind=agg rows (trial is -1, failed
holds the failure rate, metric columns are means over non-failed trials).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import ccpd, scene as scene_mod
from .doa import doas_from_factors
from .geometry import (
    CoprimeAxisSpec,
    build_receive_layout,
    build_transmit_layout,
    direction_between,
)
from .localization import localize_all, match_targets

CSV_HEADER = [
    "kind", "snr_db", "trial", "mae_deg", "rmse_lambda",
    "cpu_ms", "offdiag_residual", "failed",
]


class ConfigError(ValueError):
    """Malformed or inconsistent benchmark configuration."""


@dataclass(frozen=True)
class ReceiveSpec:
    center: tuple
    axis_x: CoprimeAxisSpec
    axis_y: CoprimeAxisSpec


@dataclass(frozen=True)
class BenchConfig:
    preset: str
    transmit_rows: int
    transmit_cols: int
    transmit_center: tuple
    receives: tuple
    num_targets: int
    pulses: int
    samples_per_pulse: int
    target_box: tuple
    snr_grid: tuple
    trials: int
    seed: int
    output: str

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.snr_grid:
            raise ConfigError("snr_grid must not be empty")
        if self.num_targets < 1:
            raise ConfigError("num_targets must be >= 1")

    @property
    def n_transmit(self) -> int:
        return self.transmit_rows * self.transmit_cols


@dataclass
class TrialRecord:
    snr_db: float
    trial: int
    mae_deg: float
    rmse_lambda: float
    cpu_ms: float
    offdiag_residual: float
    failed: bool
    stage_ms: dict = field(default_factory=dict)
    matrices_used: int = 0


@dataclass
class AggregateRecord:
    snr_db: float
    mae_deg: float
    rmse_lambda: float
    cpu_ms: float
    offdiag_residual: float
    failure_rate: float


# ---------------------------------------------------------------------------
# Presets and config loading
# ---------------------------------------------------------------------------

_COPRIME_4_7 = {"pitch_a": 4, "pitch_b": 7, "len_a": 4, "len_b": 4}

_BASE_PRESET = {
    "transmit": {"rows": 4, "cols": 4, "center": [0.0, -8000.0, 0.0]},
    "receives": [
        {"center": [-8000.0, 8000.0, 0.0], "axis_x": _COPRIME_4_7, "axis_y": _COPRIME_4_7},
        {"center": [0.0, 8000.0, 0.0], "axis_x": _COPRIME_4_7, "axis_y": _COPRIME_4_7},
        {"center": [8000.0, 8000.0, 0.0], "axis_x": _COPRIME_4_7, "axis_y": _COPRIME_4_7},
    ],
    "scene": {
        "num_targets": 10,
        "pulses": 15,
        "samples_per_pulse": 64,
        "target_box": {"min": [-7000.0, -7000.0, 4000.0], "max": [7000.0, 7000.0, 8000.0]},
    },
    "snr_grid": [-6.0, 0.0, 6.0, 12.0, 20.0],
    "trials": 20,
    "seed": 1234,
    "output": "results.csv",
}

PRESETS = {
    "case1": _BASE_PRESET,
    "case2": {
        **_BASE_PRESET,
        "transmit": {"rows": 7, "cols": 7, "center": [0.0, -8000.0, 0.0]},
        "scene": {
            **_BASE_PRESET["scene"],
            "num_targets": 25,
            "pulses": 20,
        },
    },
}

_TOP_KEYS = {"preset", "transmit", "receives", "scene", "snr_grid", "trials", "seed", "output"}
_TRANSMIT_KEYS = {"rows", "cols", "center"}
_RECEIVE_KEYS = {"center", "axis_x", "axis_y"}
_AXIS_KEYS = {"pitch_a", "pitch_b", "len_a", "len_b"}
_SCENE_KEYS = {"num_targets", "pulses", "samples_per_pulse", "target_box"}
_BOX_KEYS = {"min", "max"}


def _reject_unknown(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_snr(value) -> float:
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return float(v)
        except ValueError as err:
            raise ConfigError(f"bad snr value {value!r}") from err
    return float(value)


def _vec3(value, where) -> tuple:
    try:
        x, y, z = (float(v) for v in value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{where} must be a 3-vector") from err
    return (x, y, z)


def config_from_dict(raw: dict) -> BenchConfig:
    """Resolve a raw key/value tree (preset expansion, then overrides)."""
    _reject_unknown(raw, _TOP_KEYS, "config")
    preset = raw.get("preset", "custom")
    if preset not in ("custom", *PRESETS):
        raise ConfigError(f"unknown preset {preset!r}")
    merged = dict(PRESETS.get(preset, {}))
    for key, value in raw.items():
        if key == "preset":
            continue
        if key == "scene" and "scene" in merged:
            _reject_unknown(value, _SCENE_KEYS, "scene")
            merged["scene"] = {**merged["scene"], **value}
        else:
            merged[key] = value

    missing = {"transmit", "receives", "scene", "snr_grid", "trials", "seed", "output"} - set(merged)
    if missing:
        raise ConfigError(f"missing config keys (no preset supplies them): {sorted(missing)}")

    tx = merged["transmit"]
    _reject_unknown(tx, _TRANSMIT_KEYS, "transmit")
    sc = merged["scene"]
    _reject_unknown(sc, _SCENE_KEYS, "scene")
    box = sc["target_box"]
    _reject_unknown(box, _BOX_KEYS, "scene.target_box")

    receives = []
    for i, rx in enumerate(merged["receives"]):
        _reject_unknown(rx, _RECEIVE_KEYS, f"receives[{i}]")
        axes = {}
        for ax in ("axis_x", "axis_y"):
            _reject_unknown(rx[ax], _AXIS_KEYS, f"receives[{i}].{ax}")
            try:
                axes[ax] = CoprimeAxisSpec(**{k: int(v) for k, v in rx[ax].items()})
            except ValueError as err:
                raise ConfigError(f"receives[{i}].{ax}: {err}") from err
        receives.append(
            ReceiveSpec(center=_vec3(rx["center"], f"receives[{i}].center"), **axes)
        )
    if not receives:
        raise ConfigError("at least one receive array is required")

    snr_grid = tuple(_parse_snr(v) for v in merged["snr_grid"])
    return BenchConfig(
        preset=preset,
        transmit_rows=int(tx["rows"]),
        transmit_cols=int(tx["cols"]),
        transmit_center=_vec3(tx["center"], "transmit.center"),
        receives=tuple(receives),
        num_targets=int(sc["num_targets"]),
        pulses=int(sc["pulses"]),
        samples_per_pulse=int(sc["samples_per_pulse"]),
        target_box=(_vec3(box["min"], "target_box.min"), _vec3(box["max"], "target_box.max")),
        snr_grid=snr_grid,
        trials=int(merged["trials"]),
        seed=int(merged["seed"]),
        output=str(merged["output"]),
    )


def preset_config(name: str, **overrides) -> BenchConfig:
    """Fully resolved preset configuration, optionally overridden."""
    cfg = config_from_dict({"preset": name})
    return replace(cfg, **overrides) if overrides else cfg


def load_config(path) -> BenchConfig:
    """Parse a JSON config file; parse errors carry line information."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(
                f"{path}: line {err.lineno}, column {err.colno}: {err.msg}"
            ) from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def compute_mae(doa_estimates, truth_directions, matching) -> float:
    """Mean angular error in degrees over all (array, target) pairs.

    truth_directions[m][j] is the unit vector from array m to true target j;
    matching maps estimate column r to truth index matching[r].
    """
    angles = []
    for m, per_array in enumerate(doa_estimates):
        for r, est in enumerate(per_array):
            v_true = truth_directions[m][matching[r]]
            cosang = float(np.clip(np.dot(est.direction.v, v_true), -1.0, 1.0))
            angles.append(math.degrees(math.acos(cosang)))
    return float(np.mean(angles))


def compute_rmse(positions, truth, matching) -> float:
    """Root-mean-square position error in wavelengths under `matching`."""
    positions = np.asarray(positions, dtype=float)
    truth = np.asarray(truth, dtype=float)
    diff = positions - truth[np.asarray(matching, dtype=int)]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def _build_arrays(config: BenchConfig):
    transmit = build_transmit_layout(
        config.transmit_rows, config.transmit_cols, config.transmit_center
    )
    receives = [
        build_receive_layout(rx.axis_x, rx.axis_y, rx.center) for rx in config.receives
    ]
    return transmit, receives


def run_trial(
    config: BenchConfig, snr_db: float, trial_seed, scene_seed=None
) -> TrialRecord:
    """One seeded trial: synthesize, corrupt, estimate, score.

    `trial_seed` drives noise and solver randomness; `scene_seed` (defaults
    to trial_seed) drives target/waveform/amplitude draws, so sweeps can
    reuse scenes across SNR points. Estimation failures are recorded via the
    `failed` flag, never raised.
    """
    if scene_seed is None:
        scene_seed = trial_seed
    scene_rng = np.random.default_rng(scene_seed)
    trial_rng = np.random.default_rng(trial_seed)

    transmit, receives = _build_arrays(config)
    anchors = [transmit.center] + [lay.center for lay in receives]
    targets = scene_mod.sample_targets(
        config.target_box, config.num_targets, scene_rng, anchors=anchors
    )
    radar_scene = scene_mod.RadarScene(
        transmit=transmit, receives=receives, targets=targets
    )
    waveforms = scene_mod.sample_waveforms(
        config.samples_per_pulse, config.n_transmit, scene_rng
    )
    rcs = scene_mod.sample_rcs(
        config.num_targets, config.pulses, len(receives), scene_rng
    )
    obs = scene_mod.simulate(radar_scene, waveforms, rcs)
    obs = scene_mod.add_noise(obs, snr_db, trial_rng)

    truth_dirs = [
        np.stack([direction_between(lay.center, t).v for t in targets])
        for lay in receives
    ]

    mae = rmse = offdiag = float("nan")
    stage_ms: dict[str, float] = {}
    matrices_used = 0
    failed = False
    t0 = time.perf_counter()
    try:
        factors, jevd, diag = ccpd.solve(
            obs, receives, config.num_targets, rng=trial_rng,
            n_transmit=config.n_transmit,
        )
        offdiag = jevd.offdiag_residual
        stage_ms = {k: v * 1000.0 for k, v in diag["stage_seconds"].items()}
        matrices_used = diag["matrices_used"]
        doas = [
            doas_from_factors(a, lay, array_index=m)
            for m, (a, lay) in enumerate(zip(factors.A, receives))
        ]
        results = localize_all(doas, [lay.center for lay in receives])
        positions = np.stack([res.position for res in results])
        perm, _ = match_targets(positions, targets)
        mae = compute_mae(doas, truth_dirs, perm)
        rmse = compute_rmse(positions, targets, perm)
    except Exception:
        failed = True
    cpu_ms = (time.perf_counter() - t0) * 1000.0

    return TrialRecord(
        snr_db=float(snr_db),
        trial=-1,
        mae_deg=mae,
        rmse_lambda=rmse,
        cpu_ms=cpu_ms,
        offdiag_residual=offdiag,
        failed=failed,
        stage_ms=stage_ms,
        matrices_used=matrices_used,
    )


def _trial_entropy(seed: int, snr_index: int, trial: int):
    return np.random.SeedSequence(seed, spawn_key=(snr_index + 1, trial))


def _scene_entropy(seed: int, trial: int):
    return np.random.SeedSequence(seed, spawn_key=(0, trial))


def run_sweep(config: BenchConfig):
    """All (snr, trial) records plus per-SNR aggregates.

    Scene draws depend only on the trial index, so every SNR point sees the
    same scenes and differs in noise and solver randomness alone. Records
    are sorted by (snr_db, trial) before aggregation.
    """
    records = []
    for si, snr in enumerate(config.snr_grid):
        for ti in range(config.trials):
            rec = run_trial(
                config,
                snr,
                trial_seed=_trial_entropy(config.seed, si, ti),
                scene_seed=_scene_entropy(config.seed, ti),
            )
            rec.trial = ti
            records.append(rec)
    records.sort(key=lambda r: (r.snr_db, r.trial))

    aggregates = []
    for snr in sorted(set(r.snr_db for r in records)):
        group = [r for r in records if r.snr_db == snr]
        good = [r for r in group if not r.failed]
        def _mean(vals):
            return float(np.mean(vals)) if vals else float("nan")
        aggregates.append(
            AggregateRecord(
                snr_db=snr,
                mae_deg=_mean([r.mae_deg for r in good]),
                rmse_lambda=_mean([r.rmse_lambda for r in good]),
                cpu_ms=_mean([r.cpu_ms for r in good]),
                offdiag_residual=_mean([r.offdiag_residual for r in good]),
                failure_rate=len([r for r in group if r.failed]) / len(group),
            )
        )
    return records, aggregates


# ---------------------------------------------------------------------------
# CSV IO
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def write_csv(records, aggregates, path) -> None:
    """Write trial and aggregate rows in the fixed 8-column schema."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                "trial", _fmt(r.snr_db), r.trial, _fmt(r.mae_deg),
                _fmt(r.rmse_lambda), _fmt(r.cpu_ms), _fmt(r.offdiag_residual),
                int(r.failed),
            ])
        for a in aggregates:
            writer.writerow([
                "agg", _fmt(a.snr_db), -1, _fmt(a.mae_deg),
                _fmt(a.rmse_lambda), _fmt(a.cpu_ms), _fmt(a.offdiag_residual),
                _fmt(a.failure_rate),
            ])


def read_csv(path):
    """Parse a benchmark CSV back into (records, aggregates)."""
    records, aggregates = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header}")
        for row in reader:
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"expected {len(CSV_HEADER)} columns, got {row}")
            kind = row[0]
            if kind == "trial":
                records.append(
                    TrialRecord(
                        snr_db=float(row[1]), trial=int(row[2]),
                        mae_deg=float(row[3]), rmse_lambda=float(row[4]),
                        cpu_ms=float(row[5]), offdiag_residual=float(row[6]),
                        failed=bool(int(row[7])),
                    )
                )
            elif kind == "agg":
                aggregates.append(
                    AggregateRecord(
                        snr_db=float(row[1]), mae_deg=float(row[3]),
                        rmse_lambda=float(row[4]), cpu_ms=float(row[5]),
                        offdiag_residual=float(row[6]), failure_rate=float(row[7]),
                    )
                )
            else:
                raise ValueError(f"unknown row kind {kind!r}")
    return records, aggregates


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Monte Carlo benchmark for coprime multistatic radar localization",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="built-in configuration")
    parser.add_argument("--snr", help="comma-separated SNR grid in dB ('inf' allowed)")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per SNR point")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output CSV path")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                try:
                    raw = json.load(fh)
                except json.JSONDecodeError as err:
                    raise ConfigError(
                        f"{args.config}: line {err.lineno}, column {err.colno}: {err.msg}"
                    ) from err
            if not isinstance(raw, dict):
                raise ConfigError(f"{args.config}: top level must be a mapping")
            if args.preset:
                raw["preset"] = args.preset
            config = config_from_dict(raw)
        elif args.preset:
            config = preset_config(args.preset)
        else:
            print("error: provide --config and/or --preset", file=sys.stderr)
            return 2
        overrides = {}
        if args.snr:
            overrides["snr_grid"] = tuple(_parse_snr(v) for v in args.snr.split(","))
        if args.trials is not None:
            overrides["trials"] = args.trials
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out:
            overrides["output"] = args.out
        if overrides:
            config = replace(config, **overrides)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    records, aggregates = run_sweep(config)
    try:
        write_csv(records, aggregates, config.output)
    except OSError as err:
        print(f"error: cannot write {config.output}: {err}", file=sys.stderr)
        return 1
    for agg in aggregates:
        print(
            f"snr={agg.snr_db:g} dB  mae={agg.mae_deg:.6g} deg  "
            f"rmse={agg.rmse_lambda:.6g} lambda  cpu={agg.cpu_ms:.1f} ms  "
            f"failures={agg.failure_rate:.0%}"
        )
    print(f"wrote {config.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
