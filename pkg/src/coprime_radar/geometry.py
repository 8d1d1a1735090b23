"""Array geometry: coprime L-shaped receive arrays, transmit planar array,
steering vectors and the index sets used for subarray extraction.

All positions are handled on the half-wavelength integer grid; the internal
length unit is the wavelength (lambda = 1 by default), so a grid triple
(l, 0, 0) sits at center + (lambda/2) * (l, 0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CoprimeAxisSpec:
    """One axis of a coprime L-shaped array: two colinear uniform subarrays
    with coprime pitches sharing the origin element.

    pitch_a/pitch_b are the inter-element spacings (in half-wavelength units)
    of the two subarrays, len_a/len_b their element counts.
    """

    pitch_a: int
    pitch_b: int
    len_a: int
    len_b: int

    def __post_init__(self):
        for name in ("pitch_a", "pitch_b", "len_a", "len_b"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if math.gcd(self.pitch_a, self.pitch_b) != 1:
            raise ValueError(
                f"pitches must be coprime, got ({self.pitch_a}, {self.pitch_b})"
            )
        # Bounds keep the two subarrays overlapping only at the origin.
        if self.len_a > self.pitch_b:
            raise ValueError(f"len_a={self.len_a} exceeds pitch_b={self.pitch_b}")
        if self.len_b > self.pitch_a:
            raise ValueError(f"len_b={self.len_b} exceeds pitch_a={self.pitch_a}")

    @property
    def n_elements(self) -> int:
        """Total axis elements; the subarrays share exactly the origin."""
        return self.len_a + self.len_b - 1


def build_axis_set(spec: CoprimeAxisSpec) -> np.ndarray:
    """Sorted grid offsets of one coprime axis.

    Union of {pitch_a*m, m < len_a} and {pitch_b*n, n < len_b}; coprimality
    plus the length bounds guarantee the only shared offset is 0, so the
    result has exactly len_a + len_b - 1 entries.
    """
    sub_a = {spec.pitch_a * m for m in range(spec.len_a)}
    sub_b = {spec.pitch_b * n for n in range(spec.len_b)}
    offsets = np.array(sorted(sub_a | sub_b), dtype=np.int64)
    assert offsets.size == spec.n_elements
    return offsets


@dataclass(frozen=True, eq=False)
class Direction:
    """Unit vector in 3-D. Normalized on construction; zero vectors rejected."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (3,):
            raise ValueError(f"direction must be a 3-vector, got shape {v.shape}")
        n = float(np.linalg.norm(v))
        if n == 0.0 or not np.isfinite(n):
            raise ValueError("cannot normalize a zero or non-finite vector")
        object.__setattr__(self, "v", v / n)

    @property
    def u(self) -> float:
        """Direction cosine along x."""
        return float(self.v[0])

    @property
    def w(self) -> float:
        """Direction cosine along y."""
        return float(self.v[1])


def direction_between(src, dst) -> Direction:
    """Unit direction from `src` to `dst`; errors on coincident points."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = dst - src
    if np.linalg.norm(d) == 0.0:
        raise ValueError("coincident points define no direction")
    return Direction(d)


@dataclass(frozen=True, eq=False)
class ReceiveArrayLayout:
    """Coprime L-shaped receive array.

    `elements` holds integer grid triples ordered lexicographically by
    (y, x): the x-axis run (origin first) followed by the y-axis tail.
    The q_* index arrays drive all subarray extraction and are 0-based:

    - q_x / q_y index the x-/y-axis elements within `elements`,
    - q_x1 / q_x2 index the two uniform subarrays within the x-axis run,
    - q_y1 / q_y2 likewise within the y-axis run.
    """

    axis_x: CoprimeAxisSpec
    axis_y: CoprimeAxisSpec
    center: np.ndarray
    wavelength: float
    elements: np.ndarray
    q_x: np.ndarray
    q_y: np.ndarray
    q_x1: np.ndarray
    q_x2: np.ndarray
    q_y1: np.ndarray
    q_y2: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def origin_index(self) -> int:
        """Index of the shared origin element (always first in the ordering)."""
        return 0

    def positions(self) -> np.ndarray:
        """Physical element positions: center + (wavelength/2) * grid."""
        return self.center + 0.5 * self.wavelength * self.elements


def _subarray_indices(offsets: np.ndarray, spec: CoprimeAxisSpec):
    """Indices of the two uniform subarrays within a sorted axis offset list."""
    pos = {off: i for i, off in enumerate(offsets.tolist())}
    idx_a = np.array([pos[spec.pitch_a * m] for m in range(spec.len_a)], dtype=np.int64)
    idx_b = np.array([pos[spec.pitch_b * n] for n in range(spec.len_b)], dtype=np.int64)
    return idx_a, idx_b


def build_receive_layout(
    axis_x: CoprimeAxisSpec,
    axis_y: CoprimeAxisSpec,
    center=(0.0, 0.0, 0.0),
    wavelength: float = 1.0,
) -> ReceiveArrayLayout:
    """Assemble an L-shaped layout from two coprime axis specs.

    The x- and y-axis element sets share only the origin, so the total
    element count is |S_x| + |S_y| - 1.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    off_x = build_axis_set(axis_x)
    off_y = build_axis_set(axis_y)

    elems = [(int(l), 0, 0) for l in off_x]
    elems += [(0, int(l), 0) for l in off_y if l != 0]
    elements = np.array(elems, dtype=np.int64)

    n_x = off_x.size
    n_y = off_y.size
    q_x = np.arange(n_x, dtype=np.int64)
    q_y = np.concatenate(([0], np.arange(n_x, n_x + n_y - 1, dtype=np.int64)))
    q_x1, q_x2 = _subarray_indices(off_x, axis_x)
    q_y1, q_y2 = _subarray_indices(off_y, axis_y)

    return ReceiveArrayLayout(
        axis_x=axis_x,
        axis_y=axis_y,
        center=np.asarray(center, dtype=float),
        wavelength=float(wavelength),
        elements=elements,
        q_x=q_x,
        q_y=q_y,
        q_x1=q_x1,
        q_x2=q_x2,
        q_y1=q_y1,
        q_y2=q_y2,
    )


@dataclass(frozen=True, eq=False)
class TransmitArrayLayout:
    """Uniform planar transmit array on a half-wavelength square grid."""

    rows: int
    cols: int
    center: np.ndarray
    wavelength: float
    elements: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        gx, gy = np.meshgrid(np.arange(self.cols), np.arange(self.rows))
        elements = np.stack(
            [gx.ravel(), gy.ravel(), np.zeros(gx.size, dtype=np.int64)], axis=1
        ).astype(np.int64)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "elements", elements)

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def positions(self) -> np.ndarray:
        return self.center + 0.5 * self.wavelength * self.elements


def build_transmit_layout(rows, cols, center=(0.0, 0.0, 0.0), wavelength=1.0):
    return TransmitArrayLayout(
        rows=int(rows), cols=int(cols), center=center, wavelength=float(wavelength)
    )


def square_transmit_shape(n_elements: int) -> tuple[int, int]:
    """Factor a transmit element count into a square grid (16 -> 4x4)."""
    s = math.isqrt(n_elements)
    if s * s != n_elements:
        raise ValueError(f"{n_elements} transmit elements do not form a square grid")
    return s, s


def steering_vector(layout, direction: Direction) -> np.ndarray:
    """Far-field steering vector of `layout` toward `direction`.

    Entry i is exp(1j * 2*pi/wavelength * <position_i - center, v>); on the
    half-wavelength grid this reduces to exp(1j * pi * <grid_i, v>), so the
    origin element always maps to 1 and every entry has unit modulus.
    """
    phase = np.pi * (layout.elements @ direction.v)
    return np.exp(1j * phase)
