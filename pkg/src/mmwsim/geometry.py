"""World geometry: positions, obstacles, trajectories, and array-frame angles.

Coordinate conventions used across the package:

* World frame: x east, y north, z up, in meters.
* Compass azimuth: degrees clockwise from north (+y), viewed from above.
* Downtilt: degrees from zenith; 90 puts the boresight on the horizon,
  values above 90 tilt it toward the ground.
* Array-local angles: azimuth positive toward the right of boresight
  (clockwise viewed from above), elevation positive upward.
  Azimuth in (-180, 180], elevation in [-90, 90].
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Chords shorter than this are treated as grazing contact, not blockage.
_CHORD_EPS_M = 1e-9


@dataclass(frozen=True)
class Vec3:
    """A point or displacement in the world frame, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ValueError(f"Vec3 components must be finite, got ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


def distance(a: Vec3, b: Vec3) -> float:
    return math.dist((a.x, a.y, a.z), (b.x, b.y, b.z))


@dataclass(frozen=True)
class Orientation:
    """Mounting orientation of an antenna array (or UE body)."""

    azimuth_deg: float
    downtilt_deg: float = 90.0

    def __post_init__(self):
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise ValueError(f"azimuth_deg must be in [0, 360), got {self.azimuth_deg}")
        if not 0.0 <= self.downtilt_deg <= 180.0:
            raise ValueError(f"downtilt_deg must be in [0, 180], got {self.downtilt_deg}")

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boresight, right, and up unit vectors in the world frame.

        The right vector stays horizontal regardless of downtilt (the array
        pivots about its horizontal edge, as on a mast or wall mount).
        """
        return _orientation_axes(self.azimuth_deg, self.downtilt_deg)


@functools.lru_cache(maxsize=4096)
def _orientation_axes(azimuth_deg: float, downtilt_deg: float):
    az = math.radians(azimuth_deg)
    tilt = math.radians(downtilt_deg)
    f = np.array([math.sin(az) * math.sin(tilt),
                  math.cos(az) * math.sin(tilt),
                  math.cos(tilt)])
    r = np.array([math.cos(az), -math.sin(az), 0.0])
    u = np.cross(r, f)
    f.setflags(write=False)
    r.setflags(write=False)
    u.setflags(write=False)
    return f, r, u


def local_angles(from_: Vec3, to: Vec3, orient: Orientation) -> tuple[float, float]:
    """Direction of ``to`` seen from ``from_`` in the array's local frame.

    Returns (azimuth, elevation) in degrees; azimuth positive to the right
    of boresight, elevation positive upward.
    """
    d = to.as_array() - from_.as_array()
    n = np.linalg.norm(d)
    if n == 0.0:
        raise ValueError("local_angles requires distinct points")
    d /= n
    f, r, u = orient.axes()
    el = math.degrees(math.asin(min(1.0, max(-1.0, float(d @ u)))))
    az = math.degrees(math.atan2(float(d @ r), float(d @ f)))
    if az <= -180.0:
        az = 180.0
    return az, el


def world_direction(orient: Orientation, az_deg: float, el_deg: float) -> np.ndarray:
    """Unit world-frame vector for local (azimuth, elevation) angles."""
    f, r, u = orient.axes()
    az = math.radians(az_deg)
    el = math.radians(el_deg)
    return math.cos(el) * (math.cos(az) * f + math.sin(az) * r) + math.sin(el) * u


class Obstacle:
    """An axis-aligned box or a vertical wall slab made of one material.

    Both shapes reduce to a slab in a local frame (rotation about z only),
    so segment intersection is a single slab test. ``thickness_m`` is the
    nominal material depth used to normalize penetration loss; for a wall
    it equals the slab's across-wall extent.
    """

    __slots__ = ("material_id", "thickness_m", "origin_xy", "cos_az", "sin_az", "lo", "hi")

    def __init__(self, material_id: str, origin_xy, rot_cos: float, rot_sin: float,
                 lo, hi, thickness_m: float):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        extents = hi - lo
        if np.any(extents < 0):
            raise ValueError("obstacle extents must be non-negative")
        if np.count_nonzero(extents > 0) < 2:
            raise ValueError("obstacle must have positive extent in at least two dimensions")
        if not thickness_m > 0:
            raise ValueError(f"thickness_m must be positive, got {thickness_m}")
        self.material_id = material_id
        self.origin_xy = np.asarray(origin_xy, dtype=float)
        self.cos_az = float(rot_cos)
        self.sin_az = float(rot_sin)
        self.lo = lo
        self.hi = hi
        self.thickness_m = float(thickness_m)

    @classmethod
    def box(cls, material_id: str, min_corner, max_corner, thickness_m: float | None = None) -> "Obstacle":
        """Axis-aligned box between two corners."""
        lo = np.asarray([min(a, b) for a, b in zip(min_corner, max_corner)], dtype=float)
        hi = np.asarray([max(a, b) for a, b in zip(min_corner, max_corner)], dtype=float)
        if thickness_m is None:
            positive = (hi - lo)[(hi - lo) > 0]
            thickness_m = float(positive.min()) if positive.size else 0.0
        return cls(material_id, (0.0, 0.0), 1.0, 0.0, lo, hi, thickness_m)

    @classmethod
    def wall(cls, material_id: str, p0_xy, p1_xy, z_min: float, z_max: float,
             thickness_m: float) -> "Obstacle":
        """Vertical wall between two ground-plan endpoints, extruded by thickness."""
        p0 = np.asarray(p0_xy, dtype=float)
        p1 = np.asarray(p1_xy, dtype=float)
        length = float(np.linalg.norm(p1 - p0))
        if length == 0.0:
            raise ValueError("wall endpoints must be distinct")
        c, s = (p1 - p0) / length
        lo = np.array([0.0, -thickness_m / 2.0, z_min])
        hi = np.array([length, thickness_m / 2.0, z_max])
        return cls(material_id, p0, c, s, lo, hi, thickness_m)


@dataclass(frozen=True)
class LosResult:
    """Outcome of a line-of-sight test."""

    is_los: bool
    intersections: list[tuple[str, float]] = field(default_factory=list)


class ObstacleSet:
    """Batch of obstacles with vectorized segment-intersection queries."""

    def __init__(self, obstacles: Iterable[Obstacle]):
        obs = list(obstacles)
        self.obstacles = obs
        self.material_ids = [o.material_id for o in obs]
        self.thickness = np.array([o.thickness_m for o in obs]) if obs else np.zeros(0)
        if obs:
            self._origin = np.stack([o.origin_xy for o in obs])          # (M, 2)
            self._cos = np.array([o.cos_az for o in obs])
            self._sin = np.array([o.sin_az for o in obs])
            self._lo = np.stack([o.lo for o in obs])                     # (M, 3)
            self._hi = np.stack([o.hi for o in obs])

    def __len__(self) -> int:
        return len(self.obstacles)

    def chord_lengths(self, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
        """In-material lengths for S segments against all M obstacles, (S, M)."""
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        ends = np.atleast_2d(np.asarray(ends, dtype=float))
        n_seg = starts.shape[0]
        if not self.obstacles:
            return np.zeros((n_seg, 0))
        d = ends - starts                                                # (S, 3)
        seg_len = np.linalg.norm(d, axis=1)                              # (S,)

        # Rotate into each obstacle frame: local x' = R(-az) (x - origin).
        sx = starts[:, None, 0] - self._origin[None, :, 0]               # (S, M)
        sy = starts[:, None, 1] - self._origin[None, :, 1]
        p = np.empty((n_seg, len(self.obstacles), 3))
        p[..., 0] = sx * self._cos + sy * self._sin
        p[..., 1] = -sx * self._sin + sy * self._cos
        p[..., 2] = starts[:, None, 2]
        v = np.empty_like(p)
        v[..., 0] = d[:, None, 0] * self._cos + d[:, None, 1] * self._sin
        v[..., 1] = -d[:, None, 0] * self._sin + d[:, None, 1] * self._cos
        v[..., 2] = d[:, None, 2]

        lo = self._lo[None, :, :]
        hi = self._hi[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - p) / v
            t2 = (hi - p) / v
        t_near = np.minimum(t1, t2)
        t_far = np.maximum(t1, t2)
        parallel = v == 0.0
        inside = (p >= lo) & (p <= hi)
        # A parallel axis constrains nothing if the start lies inside its
        # slab, and forbids intersection entirely if it lies outside.
        t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), t_near)
        t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), t_far)
        t_enter = np.maximum(t_near.max(axis=2), 0.0)
        t_exit = np.minimum(t_far.min(axis=2), 1.0)
        return np.maximum(t_exit - t_enter, 0.0) * seg_len[:, None]


def los_test(obstacles: Sequence[Obstacle] | ObstacleSet, a: Vec3, b: Vec3) -> LosResult:
    """Test the open segment a-b against a set of obstacles.

    Returns whether the segment is unobstructed and, per pierced obstacle,
    the in-material path length.
    """
    if a == b:
        raise ValueError("los_test requires distinct endpoints")
    obs = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)
    if len(obs) == 0:
        return LosResult(True, [])
    chords = obs.chord_lengths(a.as_array()[None, :], b.as_array()[None, :])[0]
    hits = [(obs.material_ids[i], float(chords[i]))
            for i in np.nonzero(chords > _CHORD_EPS_M)[0]]
    return LosResult(not hits, hits)


class Trajectory:
    """Piecewise-linear path traversed at constant speed."""

    def __init__(self, waypoints: Sequence[Vec3] | np.ndarray, speed_mps: float):
        pts = np.asarray([w.as_array() if isinstance(w, Vec3) else np.asarray(w, dtype=float)
                          for w in waypoints])
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 3:
            raise ValueError("trajectory needs at least two 3-D waypoints")
        if not speed_mps > 0:
            raise ValueError(f"speed_mps must be positive, got {speed_mps}")
        seg = np.diff(pts, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len == 0.0):
            raise ValueError("consecutive waypoints must be distinct")
        self.waypoints = pts
        self.speed_mps = float(speed_mps)
        self._seg_len = seg_len
        self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])

    @property
    def length_m(self) -> float:
        return float(self._cum[-1])

    @property
    def duration_s(self) -> float:
        return self.length_m / self.speed_mps

    def _segment_at(self, t: float) -> tuple[int, float]:
        if t < 0.0 or t > self.duration_s + 1e-12:
            raise ValueError(f"t={t} outside trajectory duration [0, {self.duration_s}]")
        s = min(t * self.speed_mps, self.length_m)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        return i, s

    def position_at(self, t: float) -> Vec3:
        """Position after traveling for ``t`` seconds from the first waypoint."""
        i, s = self._segment_at(t)
        frac = (s - self._cum[i]) / self._seg_len[i]
        p = self.waypoints[i] + frac * (self.waypoints[i + 1] - self.waypoints[i])
        return Vec3.from_array(p)

    def heading_azimuth_at(self, t: float) -> float:
        """Compass azimuth of travel at time ``t`` (degrees)."""
        i, _ = self._segment_at(t)
        d = self.waypoints[i + 1] - self.waypoints[i]
        return math.degrees(math.atan2(d[0], d[1])) % 360.0

    def distance_at(self, t: float) -> float:
        """Path distance traveled by time ``t`` (meters)."""
        _, s = self._segment_at(t)
        return s
