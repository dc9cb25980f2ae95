"""Far-field image-source localization from pairwise time differences.

A plane wave crossing the array produces pairwise delays tau_{m,n} equal to
v_{m,n} . s, where v_{m,n} = r_n - r_m and s is the slowness vector
(direction of propagation, magnitude 1/c). Stacking all pairs m < n gives
tau = V s, solved in the least-squares sense; the source is then placed
opposite the propagation direction at the range implied by the center TOA.

The pair ordering (m < n, lexicographic) is generated in exactly one place,
:func:`pair_indices`, and shared by the difference matrix and every TDOA
vector, so the two can never fall out of step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import RankDeficient, ZeroSlowness

#: Speed of sound used when none is given (meters per second, dry air 20 C).
SPEED_OF_SOUND = 343.0

# relative singular value cutoff for rank decisions and the pseudo-inverse
_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Sensor positions in a common cartesian frame.

    Attributes
    ----------
    positions : numpy.ndarray
        Shape (N, dim) with dim 2 or 3, in meters. Two sensors are enough
        to build pairwise differences; full localization additionally needs
        the difference matrix to reach the space dimension in rank.
    """

    positions: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.positions, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] not in (2, 3):
            raise ValueError("positions must be an (N >= 2, 2-or-3) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("positions must be finite")
        object.__setattr__(self, "positions", arr)

    @property
    def num_sensors(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def center(self) -> np.ndarray:
        """Centroid r_c of the sensor positions."""
        return self.positions.mean(axis=0)

    @classmethod
    def circular(cls, num_sensors: int = 6, radius_m: float = 0.05,
                 center=(0.0, 0.0)) -> "ArrayGeometry":
        """Evenly spaced sensors on a circle (the default bench array)."""
        angles = 2.0 * np.pi * np.arange(num_sensors) / num_sensors
        pts = np.stack([np.cos(angles), np.sin(angles)], axis=1) * radius_m
        return cls(pts + np.asarray(center, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class SlownessVector:
    """Propagation slowness s in seconds per meter.

    For a physical wave the magnitude is 1/c up to estimation error.
    """

    components: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.components, dtype=np.float64)
        if arr.ndim != 1 or len(arr) not in (2, 3):
            raise ValueError("slowness must be a 2- or 3-vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("slowness must be finite")
        object.__setattr__(self, "components", arr)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.components))


@dataclass(frozen=True, eq=False)
class TdoaVector:
    """Pairwise delays tau_{m,n} in seconds, ordered like :func:`pair_indices`."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("tdoa vector must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tdoa values must be finite")
        object.__setattr__(self, "values", arr)


@lru_cache(maxsize=64)
def pair_indices(num_sensors: int) -> tuple:
    """All sensor pairs (m, n) with m < n in lexicographic order."""
    return tuple(
        (m, n) for m in range(num_sensors) for n in range(m + 1, num_sensors)
    )


def _as_array(vec, attr: str) -> np.ndarray:
    inner = getattr(vec, attr, vec)
    return np.asarray(inner, dtype=np.float64)


def _check_rank(v: np.ndarray) -> None:
    # a tall-enough matrix must span the space; with fewer rows than
    # dimensions the attainable rank is the row count (min-norm regime)
    required = min(v.shape[0], v.shape[1])
    rank = int(np.linalg.matrix_rank(v, rtol=_RCOND))
    if rank < required:
        raise RankDeficient(
            f"difference matrix rank {rank} below required {required}"
        )


def pair_difference_matrix(g: ArrayGeometry) -> np.ndarray:
    """Stack the sensor position differences r_n - r_m for all pairs m < n.

    Raises
    ------
    RankDeficient
        If the rows fail to span the space they could (collinear or
        duplicated sensors).
    """
    pairs = pair_indices(g.num_sensors)
    v = np.stack([g.positions[n] - g.positions[m] for m, n in pairs])
    _check_rank(v)
    return v


def estimate_slowness(v: np.ndarray, tdoa) -> SlownessVector:
    """Least-squares slowness from the linear system V s = tau.

    Accepts a :class:`TdoaVector` or a plain sequence ordered like
    :func:`pair_indices`. With fewer pairs than dimensions the minimum-norm
    solution is returned.

    Raises
    ------
    RankDeficient
        If V cannot support the solve.
    """
    v = np.asarray(v, dtype=np.float64)
    tau = _as_array(tdoa, "values")
    if v.shape[0] != len(tau):
        raise ValueError("one delay per sensor pair required")
    _check_rank(v)
    s = np.linalg.pinv(v, rcond=_RCOND) @ tau
    return SlownessVector(s)


def center_toa(toas) -> float:
    """Arrival time at the array center: the mean of the per-sensor TOAs."""
    arr = np.asarray(toas, dtype=np.float64)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("need at least one arrival time")
    return float(np.mean(arr))


def estimate_position(s, t_c: float, g: ArrayGeometry,
                      c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Place the image source from slowness direction and center TOA.

    The source lies opposite the propagation direction at range c * t_c
    from the array center: x = r_c - s * (c * t_c) / |s|.

    Raises
    ------
    ZeroSlowness
        If the slowness vector has no direction to point along.
    """
    vec = _as_array(s, "components")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroSlowness("slowness vector is zero; no propagation direction")
    return g.center - vec * (c * t_c) / norm


def localization_error(x_hat, x, r_c) -> float:
    """Euclidean position error normalized by the true source range."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    r_c = np.asarray(r_c, dtype=np.float64)
    rng = float(np.linalg.norm(r_c - x))
    if rng == 0.0:
        raise ValueError("source coincides with the array center")
    return float(np.linalg.norm(x - x_hat) / rng)


def min_window_length(g: ArrayGeometry, rate_hz: float,
                      c: float = SPEED_OF_SOUND) -> int:
    """Smallest window length exceeding the array's wavefront crossing time.

    L must satisfy L > d_max * f_s / c with d_max the largest pairwise
    sensor distance, so every sensor sees the same reflection inside one
    window.
    """
    pos = g.positions
    d_max = 0.0
    for m, n in pair_indices(g.num_sensors):
        d_max = max(d_max, float(np.linalg.norm(pos[n] - pos[m])))
    return int(math.floor(d_max * rate_hz / c)) + 1
