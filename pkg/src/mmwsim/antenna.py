"""Phased-array models: steering vectors, phase-quantized analog beams,
hierarchical broadened-beam codebooks, and the multi-subarray terminal
with grip-dependent blockage masks.

Angles are array-local: azimuth positive toward the right of boresight,
elevation positive upward, degrees. Element indexing is (row m, column n);
rows stack in elevation, columns in azimuth.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Front-to-back floor of the cosine element power pattern.
ELEMENT_BACK_FLOOR_DB = -20.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar (or linear) array of identical elements."""

    rows: int
    cols: int
    spacing_wl: float = 0.5
    element_gain_dbi: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array needs at least one row and one column")
        if not self.spacing_wl > 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols


def element_pattern_db(az_deg, el_deg) -> np.ndarray | float:
    """Cosine-shaped single-element power pattern with a back-lobe floor.

    0 dB at boresight, rolling off with the boresight direction cosine,
    floored at ELEMENT_BACK_FLOOR_DB behind the array.
    """
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    boresight_cos = np.cos(az) * np.cos(el)
    floor = 10.0 ** (ELEMENT_BACK_FLOOR_DB / 10.0)
    return 10.0 * np.log10(np.maximum(boresight_cos, floor))


def _response(g: ArrayGeometry, az_deg, el_deg) -> np.ndarray:
    """Array response (unit-modulus per element) toward one direction.

    Vectorized over angle arrays; output shape (..., rows*cols).
    """
    az = np.radians(np.asarray(az_deg, dtype=float))
    el = np.radians(np.asarray(el_deg, dtype=float))
    m = np.arange(g.rows)
    n = np.arange(g.cols)
    v = np.sin(el)                       # elevation direction cosine
    u = np.cos(el) * np.sin(az)          # azimuth direction cosine
    phase = 2.0 * math.pi * g.spacing_wl * (
        m[:, None] * v[..., None, None] + n[None, :] * u[..., None, None])
    return np.exp(1j * phase).reshape(*np.shape(az), g.size)


def steering_vector(g: ArrayGeometry, az_deg: float, el_deg: float) -> np.ndarray:
    """Unit-modulus steering vector toward (az, el), both within (-90, 90)."""
    if not (-90.0 < az_deg < 90.0 and -90.0 < el_deg < 90.0):
        raise ValueError(f"steering angles must lie in (-90, 90), got ({az_deg}, {el_deg})")
    return _response(g, az_deg, el_deg)


@dataclass(frozen=True)
class BeamWeights:
    """Analog beam: n-bit phase indices plus per-element on/off switches."""

    phase_idx: np.ndarray
    on: np.ndarray
    n_bits: int

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be at least 1")
        levels = 1 << self.n_bits
        if np.any(self.phase_idx < 0) or np.any(self.phase_idx >= levels):
            raise ValueError(f"phase indices must lie in [0, {levels})")
        if not np.any(self.on):
            raise ValueError("at least one element must be on")

    @property
    def n_on(self) -> int:
        return int(np.count_nonzero(self.on))

    def weights(self) -> np.ndarray:
        """Complex weight vector; off elements contribute zero."""
        step = 2.0 * math.pi / (1 << self.n_bits)
        return np.exp(1j * step * self.phase_idx) * self.on


def quantize_weights(w: np.ndarray, n_bits: int) -> BeamWeights:
    """Round phases to the nearest of 2^n uniform levels, constant modulus."""
    if n_bits < 1:
        raise ValueError("n_bits must be at least 1")
    levels = 1 << n_bits
    step = 2.0 * math.pi / levels
    on = np.abs(w) > 1e-12
    idx = np.round(np.angle(w) / step).astype(int) % levels
    idx = np.where(on, idx, 0)
    return BeamWeights(idx, on, n_bits)


def beam_gain_db(g: ArrayGeometry, w: BeamWeights | np.ndarray, az_deg, el_deg):
    """Realized beam gain in dBi toward (az, el).

    Normalized so an ideal (unquantized, fully-on) beam peaks at
    10*log10(N) plus the element gain; includes the element pattern.
    Accepts angles anywhere on the sphere.
    """
    if isinstance(w, BeamWeights):
        wv = w.weights()
        n_on = w.n_on
    else:
        wv = np.asarray(w)
        n_on = max(int(np.count_nonzero(np.abs(wv) > 1e-12)), 1)
    a = _response(g, az_deg, el_deg)
    af = np.abs(a @ np.conj(wv))
    with np.errstate(divide="ignore"):
        af_db = 20.0 * np.log10(af)
    gain = af_db - 10.0 * math.log10(n_on) + element_pattern_db(az_deg, el_deg) \
        + g.element_gain_dbi
    if np.ndim(gain) == 0:
        return float(gain)
    return gain


def half_power_widths_deg(g: ArrayGeometry) -> tuple[float, float]:
    """Approximate 3 dB beamwidths (azimuth, elevation) of the full aperture."""
    az = math.degrees(0.886 / (g.cols * g.spacing_wl))
    el = math.degrees(0.886 / (g.rows * g.spacing_wl))
    return az, el


@dataclass(frozen=True)
class CodebookBeam:
    level: int
    index: int
    weights: BeamWeights
    az_deg: float
    el_deg: float
    width_az_deg: float
    width_el_deg: float


@dataclass
class Codebook:
    """Static analog beam codebook: level 0 is coarsest, the last finest."""

    geometry: ArrayGeometry
    sector_az_deg: tuple[float, float]
    sector_el_deg: tuple[float, float]
    levels: list[list[CodebookBeam]]
    n_bits: int

    @property
    def finest(self) -> list[CodebookBeam]:
        return self.levels[-1]

    def level_weight_matrix(self, level: int = -1) -> np.ndarray:
        """Stacked complex weights of one level, shape (n_beams, N)."""
        cache = getattr(self, "_wm_cache", None)
        if cache is None:
            cache = {}
            self._wm_cache = cache
        key = level % len(self.levels)
        if key not in cache:
            wm = np.stack([b.weights.weights() for b in self.levels[key]])
            n_on = np.array([b.weights.n_on for b in self.levels[key]])
            cache[key] = (wm, np.conj(wm), n_on)
        return cache[key][0]

    def _conj_matrix(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        self.level_weight_matrix(level)
        key = level % len(self.levels)
        _, wmc, n_on = self._wm_cache[key]
        return wmc, n_on

    def gains_toward(self, az_deg, el_deg, level: int = -1) -> np.ndarray:
        """Gain of every beam of a level toward given directions, dBi.

        Shape (n_beams,) for scalar angles, (n_beams, n_dirs) for arrays.
        """
        a = _response(self.geometry, az_deg, el_deg)
        wmc, n_on = self._conj_matrix(level)
        af = np.abs(wmc @ a.reshape(-1, self.geometry.size).T)
        with np.errstate(divide="ignore"):
            gains = (20.0 * np.log10(af)
                     - 10.0 * np.log10(n_on)[:, None]
                     + np.atleast_1d(element_pattern_db(az_deg, el_deg))[None, :]
                     + self.geometry.element_gain_dbi)
        if np.ndim(az_deg) == 0:
            return gains[:, 0]
        return gains


def _grid_1d(span: tuple[float, float], step: float) -> np.ndarray:
    lo, hi = span
    if hi < lo:
        raise ValueError("sector bounds must be ordered")
    if hi == lo:
        return np.array([lo])
    n = max(int(math.ceil((hi - lo) / step)) + 1, 2)
    return np.linspace(lo, hi, n)


# Sub-aperture steering offsets sit at this fraction of the sub-aperture
# beamwidth; with the alternating half-turn phase between groups this keeps
# the composite beam's in-band ripple near 2 dB. Tuned numerically on the
# 16-column aperture.
_SPLIT_OFFSET_FRACTION = 0.906
# Coarser levels pack beams relatively denser than the finest level to hold
# the same coverage floor despite the broadened beams' ripple.
_SPLIT_AZ_SHRINK = 2.0 / 3.0
_SPLIT_EL_SHRINK = 0.75


def _broadened_weights(g: ArrayGeometry, az_deg: float, el_deg: float,
                       split: int) -> np.ndarray:
    """Split the aperture into column groups steered to adjacent offsets.

    Adjacent groups alternate a half-turn phase so their patterns blend
    into a widened composite beam instead of a single coherent lobe. The
    tradeoff is a roughly split-fold wider beam at reduced peak gain.
    """
    az_w, _ = half_power_widths_deg(g)
    sub_width = az_w * split
    cols_per = g.cols / split
    m = np.arange(g.rows)
    w = np.zeros((g.rows, g.cols), dtype=complex)
    el = math.radians(el_deg)
    for b in range(split):
        n_lo = int(round(b * cols_per))
        n_hi = int(round((b + 1) * cols_per))
        offset = (b - (split - 1) / 2.0) * _SPLIT_OFFSET_FRACTION * sub_width
        az = math.radians(az_deg + offset)
        n = np.arange(n_lo, n_hi)
        phase = 2.0 * math.pi * g.spacing_wl * (
            m[:, None] * math.sin(el) + n[None, :] * math.cos(el) * math.sin(az))
        w[:, n_lo:n_hi] = np.exp(1j * (phase + b * math.pi))
    return w.reshape(g.size)


def build_codebook(g: ArrayGeometry,
                   sector_az_deg: tuple[float, float] = (-45.0, 45.0),
                   sector_el_deg: tuple[float, float] = (-15.0, 15.0),
                   levels: int = 2,
                   n_bits: int = 4,
                   spacing_factor: float = 0.6) -> Codebook:
    """Hierarchical codebook over a sector.

    The finest level is a grid of quantized steering beams spaced at
    ``spacing_factor`` of the 3 dB widths (edges included). Each coarser
    level doubles the azimuth beamwidth by splitting the aperture into
    sub-apertures steered apart, with proportionally wider spacing.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    for lo, hi in (sector_az_deg, sector_el_deg):
        if not (-90.0 <= lo <= hi <= 90.0):
            raise ValueError("sector must lie within [-90, 90] on both axes")
    az_w, el_w = half_power_widths_deg(g)
    built: list[list[CodebookBeam]] = []
    for level in range(levels):
        split = 1 << (levels - 1 - level)
        if split > 1 and (split > 4 or split > g.cols):
            raise ValueError(
                f"cannot broaden {g.cols} columns by a factor of {split} (max split 4)")
        width_az = az_w * split
        az_shrink = _SPLIT_AZ_SHRINK if split > 1 else 1.0
        el_shrink = _SPLIT_EL_SHRINK if split > 1 else 1.0
        az_grid = _grid_1d(sector_az_deg, width_az * spacing_factor * az_shrink)
        el_grid = _grid_1d(sector_el_deg, el_w * spacing_factor * el_shrink)
        beams = []
        for el_c in el_grid:
            for az_c in az_grid:
                if split == 1:
                    ideal = _response(g, az_c, el_c)
                else:
                    ideal = _broadened_weights(g, az_c, el_c, split)
                beams.append(CodebookBeam(
                    level=level, index=len(beams),
                    weights=quantize_weights(ideal, n_bits),
                    az_deg=float(az_c), el_deg=float(el_c),
                    width_az_deg=width_az, width_el_deg=el_w))
        built.append(beams)
    return Codebook(g, tuple(sector_az_deg), tuple(sector_el_deg), built, n_bits)


def format_codebook_table(cb: Codebook) -> str:
    """Tabular text export: one beam per line with phases and pointing."""
    lines = ["# beam_id level az_deg el_deg width_az_deg width_el_deg phase_indices"]
    for level_beams in cb.levels:
        for b in level_beams:
            phases = ",".join(str(int(i)) for i in b.weights.phase_idx)
            lines.append(f"{b.index} {b.level} {b.az_deg:.3f} {b.el_deg:.3f} "
                         f"{b.width_az_deg:.3f} {b.width_el_deg:.3f} {phases}")
    return "\n".join(lines) + "\n"


class GripMode(str, enum.Enum):
    FREESPACE = "freespace"
    LANDSCAPE = "landscape"
    PORTRAIT = "portrait"


@dataclass(frozen=True)
class MaskRect:
    """Angular blockage rectangle in the terminal body frame."""

    center_az_deg: float
    center_el_deg: float
    az_extent_deg: float
    el_extent_deg: float

    def contains(self, az_deg: float, el_deg: float) -> bool:
        d_az = (az_deg - self.center_az_deg + 180.0) % 360.0 - 180.0
        d_el = el_deg - self.center_el_deg
        return abs(d_az) <= self.az_extent_deg / 2.0 and abs(d_el) <= self.el_extent_deg / 2.0


# Hand-grip blockage geometry per mode: the measured angular extents, the
# subarrays whose fields they cover, and subarrays disabled outright.
# Landscape: the hand wraps the top edge, blanking a 160x75 degree region
# reaching from behind the palm toward the thumb side; the long-edge
# subarray keeps good reception. Portrait: the fingers cover the long edge
# entirely, leaving a 120x80 degree hole around its field.
_GRIP_RULES: dict[GripMode, dict] = {
    GripMode.FREESPACE: {"masked": {}, "disabled": set()},
    GripMode.LANDSCAPE: {"masked": {0: MaskRect(45.0, 0.0, 160.0, 75.0)},
                         "disabled": set()},
    GripMode.PORTRAIT: {"masked": {1: MaskRect(90.0, 0.0, 120.0, 80.0)},
                        "disabled": {1}},
}

SUBARRAY_NAMES = ("top_edge", "long_edge", "top_edge_mirror", "long_edge_mirror")


@dataclass
class UeAntennaState:
    """Four selectable terminal subarrays plus the active grip mode.

    Subarray boresights sit at body azimuths 0, 90, 180, 270 (top edge,
    long edge, and their mirror-side counterparts); the mirror placement is
    an assumption to complete spherical coverage.
    """

    subarray_geometry: ArrayGeometry = field(
        default_factory=lambda: ArrayGeometry(rows=1, cols=4, element_gain_dbi=5.0))
    grip_mode: GripMode = GripMode.FREESPACE
    mask_loss_db: float = 25.0
    mount_az_deg: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0)

    def __post_init__(self):
        if len(self.mount_az_deg) != 4:
            raise ValueError("terminal design uses exactly four subarrays")

    @property
    def n_subarrays(self) -> int:
        return 4

    def disabled_subarrays(self) -> set[int]:
        return set(_GRIP_RULES[self.grip_mode]["disabled"])

    def mask_rect(self, subarray_id: int) -> MaskRect | None:
        return _GRIP_RULES[self.grip_mode]["masked"].get(subarray_id)


def apply_grip_mask(ue: UeAntennaState, subarray_id: int,
                    az_deg: float, el_deg: float) -> float:
    """Extra loss in dB for a body-frame direction seen by one subarray.

    Returns inf for subarrays disabled by the grip (Portrait long edge),
    the configured mask loss inside the blocked rectangle, else 0.
    """
    if not 0 <= subarray_id < ue.n_subarrays:
        raise ValueError(f"subarray_id must be in [0, 4), got {subarray_id}")
    if subarray_id in ue.disabled_subarrays():
        return math.inf
    rect = ue.mask_rect(subarray_id)
    if rect is not None and rect.contains(az_deg, el_deg):
        return ue.mask_loss_db
    return 0.0


def subarray_local_angles(ue: UeAntennaState, subarray_id: int,
                          az_body_deg: float, el_body_deg: float) -> tuple[float, float]:
    """Body-frame direction expressed in one subarray's local frame."""
    az = (az_body_deg - ue.mount_az_deg[subarray_id] + 180.0) % 360.0 - 180.0
    return az, el_body_deg


def build_ue_codebooks(ue: UeAntennaState, beams_per_subarray: int = 4,
                       sector_az_deg: tuple[float, float] = (-45.0, 45.0),
                       n_bits: int = 4) -> list[Codebook]:
    """One single-level codebook per subarray with a fixed beam count."""
    az_grid = np.linspace(sector_az_deg[0], sector_az_deg[1], beams_per_subarray)
    g = ue.subarray_geometry
    az_w, el_w = half_power_widths_deg(g)
    books = []
    for _ in range(ue.n_subarrays):
        beams = [CodebookBeam(level=0, index=i,
                              weights=quantize_weights(_response(g, az, 0.0), n_bits),
                              az_deg=float(az), el_deg=0.0,
                              width_az_deg=az_w, width_el_deg=el_w)
                 for i, az in enumerate(az_grid)]
        books.append(Codebook(g, tuple(sector_az_deg), (0.0, 0.0), [beams], n_bits))
    return books


def best_subarray(ue: UeAntennaState, codebooks: list[Codebook],
                  az_body_deg: float, el_body_deg: float) -> tuple[int, int, float]:
    """Best (subarray, beam) toward a body-frame direction, grip-aware.

    Maximizes beam gain minus grip-mask loss; ties go to the lowest
    (subarray, beam) pair. Raises if every subarray is disabled.
    """
    best: tuple[int, int, float] | None = None
    for sid in range(ue.n_subarrays):
        mask = apply_grip_mask(ue, sid, az_body_deg, el_body_deg)
        if math.isinf(mask):
            continue
        az_l, el_l = subarray_local_angles(ue, sid, az_body_deg, el_body_deg)
        gains = codebooks[sid].gains_toward(az_l, el_l) - mask
        bid = int(np.argmax(gains))
        g = float(gains[bid])
        if best is None or g > best[2] + 1e-12:
            best = (sid, bid, g)
    if best is None:
        raise ValueError("all subarrays are disabled; no coverage available")
    return best
