"""Scenario files: schema, validation, defaults, and bundled layouts.

Scenarios are strict JSON: unknown keys are rejected, every violation
names the offending field and rule, and every applied default is logged
and recorded on the parsed scenario. Bundled scenarios are schematic
reconstructions of the prototype experiments' layouts.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .antenna import ArrayGeometry, GripMode, UeAntennaState
from .beammgmt import BmConfig
from .channel import (Blocker, ClusterConfig, DEFAULT_CLUSTER_CONFIGS, Material,
                      UseCase)
from .geometry import Obstacle, ObstacleSet, Orientation, Trajectory, Vec3
from .link import (DEFAULT_MCS_TABLE, DuplexConfig, LinkBudget, McsEntry,
                   McsTable)

log = logging.getLogger(__name__)

BUNDLED_SCENARIOS = ("fig4", "fig5", "fig6a", "fig6b", "indoor-floor")


class ScenarioError(ValueError):
    """A scenario file violated the schema; the message names field and rule."""


class _Section:
    """One dict node being validated; tracks which keys were consumed."""

    def __init__(self, data: dict, path: str, defaults_log: list[str]):
        if not isinstance(data, dict):
            raise ScenarioError(f"{path}: must be an object")
        self.data = data
        self.path = path
        self.defaults_log = defaults_log
        self.seen: set[str] = set()

    def require(self, key: str, kind, rule: str = ""):
        if key not in self.data:
            raise ScenarioError(f"{self.path}.{key}: required field is missing")
        self.seen.add(key)
        return self._convert(key, self.data[key], kind, rule)

    def optional(self, key: str, kind, default, rule: str = ""):
        if key not in self.data:
            if default is not None:
                self.defaults_log.append(f"{self.path}.{key} = {default!r}")
            return default
        self.seen.add(key)
        return self._convert(key, self.data[key], kind, rule)

    def subsection(self, key: str, required: bool = False) -> "_Section | None":
        if key not in self.data:
            if required:
                raise ScenarioError(f"{self.path}.{key}: required section is missing")
            return None
        self.seen.add(key)
        return _Section(self.data[key], f"{self.path}.{key}", self.defaults_log)

    def list_of(self, key: str, required: bool = False) -> list[_Section]:
        if key not in self.data:
            if required:
                raise ScenarioError(f"{self.path}.{key}: required list is missing")
            return []
        self.seen.add(key)
        items = self.data[key]
        if not isinstance(items, list):
            raise ScenarioError(f"{self.path}.{key}: must be a list")
        return [_Section(it, f"{self.path}.{key}[{i}]", self.defaults_log)
                for i, it in enumerate(items)]

    def _convert(self, key, value, kind, rule):
        path = f"{self.path}.{key}"
        try:
            if kind is float:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise TypeError
                value = float(value)
            elif kind is int:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise TypeError
            elif kind is str:
                if not isinstance(value, str):
                    raise TypeError
            elif kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
            elif kind == "vec3":
                value = _as_floats(value, 3, path)
            elif kind == "vec2":
                value = _as_floats(value, 2, path)
            elif kind == "range":
                value = _as_floats(value, 2, path)
                if value[0] > value[1]:
                    raise ScenarioError(f"{path}: bounds must be ordered low, high")
        except (TypeError, ValueError):
            raise ScenarioError(f"{path}: expected {getattr(kind, '__name__', kind)}") from None
        if rule:
            _check_rule(path, value, rule)
        return value

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            raise ScenarioError(
                f"{self.path}: unknown key(s) {sorted(unknown)} (strict mode)")


def _as_floats(value, n, path):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ScenarioError(f"{path}: expected a list of {n} numbers")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{path}: expected a list of {n} numbers")
        out.append(float(v))
    return tuple(out)


def _check_rule(path, value, rule):
    ok = {
        "positive": lambda v: v > 0,
        "non-negative": lambda v: v >= 0,
        "fraction": lambda v: 0.0 <= v <= 1.0,
    }[rule](value)
    if not ok:
        raise ScenarioError(f"{path}: must be {rule}, got {value}")


@dataclass
class GnbConfig:
    gnb_id: int
    position: Vec3
    orientation: Orientation
    array: ArrayGeometry
    max_eirp_dbm: float
    codebook_levels: int
    sector_az_deg: tuple[float, float]
    sector_el_deg: tuple[float, float]
    phase_bits: int


@dataclass
class UeConfig:
    trajectory: Trajectory
    grip_mode: GripMode
    eirp_dbm: float
    mask_loss_db: float
    subarray: ArrayGeometry
    beams_per_subarray: int
    sector_az_deg: tuple[float, float]
    phase_bits: int


@dataclass
class Scenario:
    """A fully validated world plus radio configuration, ready to run."""

    name: str
    use_case: UseCase
    carrier_ghz: float
    seed: int
    duration_s: float
    timestep_ms: float
    bounds_x: tuple[float, float]
    bounds_y: tuple[float, float]
    gnbs: list[GnbConfig]
    ue: UeConfig
    materials: dict[str, Material]
    obstacles: ObstacleSet
    blockers: list[Blocker]
    budget: LinkBudget
    duplex: DuplexConfig
    mcs_table: McsTable
    mcs_hysteresis_db: float
    bm: BmConfig
    cluster_config: ClusterConfig
    d_corr_m: float | None
    cluster_coherence_m: float
    regions: dict[str, list[tuple[float, float, float, float]]]
    applied_defaults: list[str] = field(default_factory=list)


def _parse_material(sec: _Section) -> Material:
    m = Material(
        material_id=sec.require("id", str),
        base_loss_db=sec.require("base_loss_db", float, "non-negative"),
        loss_slope_db_per_ghz=sec.optional("loss_slope_db_per_ghz", float, 0.0),
        notch_depth_db=sec.optional("notch_depth_db", float, 0.0, "non-negative"),
        notch_period_ghz=sec.optional("notch_period_ghz", float, 0.0),
        notch_width_ghz=sec.optional("notch_width_ghz", float, 0.0),
        ref_freq_ghz=sec.optional("ref_freq_ghz", float, 28.0),
    )
    sec.finish()
    return m


def _parse_obstacle(sec: _Section, materials: dict[str, Material]) -> Obstacle:
    kind = sec.require("type", str)
    material = sec.require("material", str)
    if material not in materials:
        raise ScenarioError(f"{sec.path}.material: undefined material id '{material}'")
    if kind == "box":
        lo = sec.require("min", "vec3")
        hi = sec.require("max", "vec3")
        thickness = sec.optional("thickness_m", float, None)
        sec.finish()
        try:
            return Obstacle.box(material, lo, hi, thickness)
        except ValueError as e:
            raise ScenarioError(f"{sec.path}: {e}") from None
    if kind == "wall":
        p0 = sec.require("p0", "vec2")
        p1 = sec.require("p1", "vec2")
        z_min = sec.require("z_min", float)
        z_max = sec.require("z_max", float)
        thickness = sec.require("thickness_m", float, "positive")
        sec.finish()
        if z_max <= z_min:
            raise ScenarioError(f"{sec.path}.z_max: must exceed z_min")
        try:
            return Obstacle.wall(material, p0, p1, z_min, z_max, thickness)
        except ValueError as e:
            raise ScenarioError(f"{sec.path}: {e}") from None
    raise ScenarioError(f"{sec.path}.type: must be 'box' or 'wall', got '{kind}'")


def _parse_trajectory(sec: _Section) -> Trajectory:
    raw = sec.data.get("waypoints")
    if raw is None:
        raise ScenarioError(f"{sec.path}.waypoints: required field is missing")
    sec.seen.add("waypoints")
    if not isinstance(raw, list) or len(raw) < 2:
        raise ScenarioError(f"{sec.path}.waypoints: need at least two waypoints")
    pts = [_as_floats(w, 3, f"{sec.path}.waypoints[{i}]") for i, w in enumerate(raw)]
    speed = sec.require("speed_mps", float, "positive")
    sec.finish()
    try:
        return Trajectory([Vec3(*p) for p in pts], speed)
    except ValueError as e:
        raise ScenarioError(f"{sec.path}: {e}") from None


def _parse_gnb(sec: _Section) -> GnbConfig:
    arr = sec.subsection("array")
    if arr is not None:
        geometry = ArrayGeometry(
            rows=arr.optional("rows", int, 8),
            cols=arr.optional("cols", int, 16),
            spacing_wl=arr.optional("spacing_wl", float, 0.5, "positive"),
            element_gain_dbi=arr.optional("element_gain_dbi", float, 0.0),
        )
        arr.finish()
    else:
        geometry = ArrayGeometry(rows=8, cols=16)
        sec.defaults_log.append(f"{sec.path}.array = 8x16 half-wavelength")
    cb = sec.subsection("codebook")
    if cb is not None:
        levels = cb.optional("levels", int, 2, "positive")
        sector_az = cb.optional("sector_az_deg", "range", (-45.0, 45.0))
        sector_el = cb.optional("sector_el_deg", "range", (-15.0, 15.0))
        bits = cb.optional("phase_bits", int, 4, "positive")
        cb.finish()
    else:
        levels, sector_az, sector_el, bits = 2, (-45.0, 45.0), (-15.0, 15.0), 4
        sec.defaults_log.append(f"{sec.path}.codebook = 2 levels, az +-45, el +-15, 4-bit")
    pos = sec.require("position", "vec3")
    g = GnbConfig(
        gnb_id=sec.require("id", int, "non-negative"),
        position=Vec3(*pos),
        orientation=Orientation(sec.require("azimuth_deg", float) % 360.0,
                                sec.optional("downtilt_deg", float, 90.0)),
        array=geometry,
        max_eirp_dbm=sec.optional("max_eirp_dbm", float, 55.0),
        codebook_levels=levels,
        sector_az_deg=tuple(sector_az),
        sector_el_deg=tuple(sector_el),
        phase_bits=bits,
    )
    sec.finish()
    return g


def _parse_ue(sec: _Section) -> UeConfig:
    traj = _parse_trajectory(sec.subsection("trajectory", required=True))
    grip_raw = sec.optional("grip_mode", str, "freespace")
    try:
        grip = GripMode(grip_raw)
    except ValueError:
        raise ScenarioError(
            f"{sec.path}.grip_mode: must be one of "
            f"{[m.value for m in GripMode]}, got '{grip_raw}'") from None
    sub = sec.subsection("subarray")
    if sub is not None:
        geometry = ArrayGeometry(
            rows=1,
            cols=sub.optional("elements", int, 4, "positive"),
            spacing_wl=sub.optional("spacing_wl", float, 0.5, "positive"),
            element_gain_dbi=sub.optional("element_gain_dbi", float, 5.0),
        )
        beams = sub.optional("beams", int, 4, "positive")
        sector = sub.optional("sector_az_deg", "range", (-45.0, 45.0))
        bits = sub.optional("phase_bits", int, 4, "positive")
        sub.finish()
    else:
        geometry = ArrayGeometry(rows=1, cols=4, element_gain_dbi=5.0)
        beams, sector, bits = 4, (-45.0, 45.0), 4
        sec.defaults_log.append(f"{sec.path}.subarray = 4 elements, 4 beams, az +-45")
    ue = UeConfig(
        trajectory=traj,
        grip_mode=grip,
        eirp_dbm=sec.optional("eirp_dbm", float, 30.0),
        mask_loss_db=sec.optional("mask_loss_db", float, 25.0, "non-negative"),
        subarray=geometry,
        beams_per_subarray=beams,
        sector_az_deg=tuple(sector),
        phase_bits=bits,
    )
    sec.finish()
    return ue


def _parse_mcs_table(sections: list[_Section]) -> McsTable:
    entries = []
    for sec in sections:
        entries.append(McsEntry(
            modulation=sec.require("modulation", str),
            code_rate=sec.require("code_rate", str),
            spectral_efficiency=sec.require("spectral_efficiency", float, "positive"),
            min_snr_db=sec.require("min_snr_db", float),
        ))
        sec.finish()
    try:
        return McsTable(tuple(entries))
    except ValueError as e:
        raise ScenarioError(f"scenario.mcs_table: {e}") from None


def parse_scenario(data: dict, name_hint: str = "scenario") -> Scenario:
    """Validate a raw scenario dict and build the runnable configuration."""
    defaults: list[str] = []
    root = _Section(data, "scenario", defaults)

    name = root.optional("name", str, name_hint)
    use_case_raw = root.require("use_case", str)
    try:
        use_case = UseCase(use_case_raw)
    except ValueError:
        raise ScenarioError(
            f"scenario.use_case: must be one of {[u.value for u in UseCase]}, "
            f"got '{use_case_raw}'") from None
    carrier = root.optional("carrier_ghz", float, 28.0, "positive")
    seed = root.require("seed", int, "non-negative")

    bounds = root.subsection("bounds", required=True)
    bounds_x = bounds.require("x", "range")
    bounds_y = bounds.require("y", "range")
    bounds.finish()

    materials = {}
    for sec in root.list_of("materials"):
        try:
            m = _parse_material(sec)
        except ValueError as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"{sec.path}: {e}") from None
        if m.material_id in materials:
            raise ScenarioError(f"{sec.path}.id: duplicate material id '{m.material_id}'")
        materials[m.material_id] = m

    obstacles = [
        _parse_obstacle(sec, materials) for sec in root.list_of("obstacles")]

    gnb_sections = root.list_of("gnbs", required=True)
    if not gnb_sections:
        raise ScenarioError("scenario.gnbs: at least one gNB is required")
    gnbs = [_parse_gnb(sec) for sec in gnb_sections]
    ids = [g.gnb_id for g in gnbs]
    if len(set(ids)) != len(ids):
        raise ScenarioError("scenario.gnbs: gNB ids must be unique")

    ue = _parse_ue(root.subsection("ue", required=True))

    blockers = []
    for sec in root.list_of("blockers"):
        traj = sec.subsection("trajectory")
        pos = sec.optional("position", "vec3", None)
        b = Blocker(
            trajectory=_parse_trajectory(traj) if traj is not None else None,
            position=Vec3(*pos) if pos is not None else None,
            radius_m=sec.optional("radius_m", float, 0.3, "positive"),
            height_m=sec.optional("height_m", float, 1.8, "positive"),
            loss_db=sec.optional("loss_db", float, 20.0, "non-negative"),
        )
        sec.finish()
        if b.trajectory is None and b.position is None:
            raise ScenarioError(f"{sec.path}: needs a position or a trajectory")
        blockers.append(b)

    link = root.subsection("link")
    if link is not None:
        budget = LinkBudget(
            gnb_max_eirp_dbm=max(g.max_eirp_dbm for g in gnbs),
            tx_dynamic_range_db=link.optional("tx_dynamic_range_db", float, 19.0),
            bandwidth_mhz=link.optional("bandwidth_mhz", float, 240.0, "positive"),
            noise_figure_db=link.optional("noise_figure_db", float, 7.0),
            ue_eirp_dbm=ue.eirp_dbm,
            carrier_ghz=carrier,
        )
        try:
            duplex = DuplexConfig(link.optional("dl_fraction", float, 0.75),
                                  link.optional("ul_fraction", float, 0.25))
        except ValueError as e:
            raise ScenarioError(f"{link.path}: {e}") from None
        mcs_hyst = link.optional("mcs_hysteresis_db", float, 0.0, "non-negative")
        link.finish()
    else:
        budget = LinkBudget(gnb_max_eirp_dbm=max(g.max_eirp_dbm for g in gnbs),
                            ue_eirp_dbm=ue.eirp_dbm, carrier_ghz=carrier)
        duplex = DuplexConfig()
        mcs_hyst = 0.0
        defaults.append("scenario.link = 240 MHz, NF 7, TDD 3:1")

    mcs_sections = root.list_of("mcs_table")
    mcs_table = _parse_mcs_table(mcs_sections) if mcs_sections else DEFAULT_MCS_TABLE
    if not mcs_sections:
        defaults.append("scenario.mcs_table = built-in 7-entry ladder (600 Mbps peak)")

    bm_sec = root.subsection("beam_management")
    rlf_default = mcs_table.entries[0].min_snr_db - 2.0
    if bm_sec is not None:
        try:
            bm = BmConfig(
                handover_hysteresis_db=bm_sec.optional("handover_hysteresis_db", float, 3.0),
                dwell_ms=bm_sec.optional("dwell_ms", float, 100.0),
                rlf_threshold_db=bm_sec.optional("rlf_threshold_db", float, rlf_default),
                rlf_timer_ms=bm_sec.optional("rlf_timer_ms", float, 200.0, "positive"),
                sweep_period_ms=bm_sec.optional("sweep_period_ms", float, 50.0, "positive"),
                snr_filter_coeff=bm_sec.optional("snr_filter_coeff", float, 0.5),
                intra_switch_margin_db=bm_sec.optional("intra_switch_margin_db", float, 1.0),
                measurement_time_ms=bm_sec.optional("measurement_time_ms", float, 0.01),
            )
        except ValueError as e:
            raise ScenarioError(f"{bm_sec.path}: {e}") from None
        bm_sec.finish()
    else:
        bm = BmConfig(rlf_threshold_db=rlf_default)
        defaults.append("scenario.beam_management = defaults (3 dB / 100 ms / 50 ms sweep)")

    chan = root.subsection("channel")
    base_cluster = DEFAULT_CLUSTER_CONFIGS[use_case]
    d_corr = None
    coherence = 10.0
    if chan is not None:
        from dataclasses import replace as _replace
        overrides = {}
        for key, rule in (("delay_scale_ns", "positive"),
                          ("power_decay_db_per_ns", "non-negative"),
                          ("nlos_extra_loss_db", "non-negative"),
                          ("tail_multiplier", "positive"),
                          ("min_separation_deg", "non-negative")):
            v = chan.optional(key, float, None, rule)
            if v is not None:
                overrides[key] = v
        for key in ("aod_az_range_deg", "aod_el_range_deg",
                    "aoa_az_range_deg", "aoa_el_range_deg"):
            v = chan.optional(key, "range", None)
            if v is not None:
                overrides[key] = tuple(v)
        cluster_cfg = _replace(base_cluster, **overrides) if overrides else base_cluster
        d_corr = chan.optional("d_corr_m", float, None, "positive")
        coherence = chan.optional("cluster_coherence_m", float, 10.0, "positive")
        chan.finish()
    else:
        cluster_cfg = base_cluster
        defaults.append("scenario.channel = calibrated cluster defaults")

    regions = {}
    reg_sec = root.subsection("regions")
    if reg_sec is not None:
        for rname in list(reg_sec.data):
            reg_sec.seen.add(rname)
            rects = reg_sec.data[rname]
            if not isinstance(rects, list):
                raise ScenarioError(f"{reg_sec.path}.{rname}: must be a list of rectangles")
            regions[rname] = [
                tuple(_as_floats(r, 4, f"{reg_sec.path}.{rname}[{i}]"))
                for i, r in enumerate(rects)]
        reg_sec.finish()

    duration = root.optional("duration_s", float, None, "positive")
    if duration is None:
        duration = ue.trajectory.duration_s
        defaults.append(f"scenario.duration_s = trajectory duration ({duration:.3f})")
    timestep = root.optional("timestep_ms", float, 10.0, "positive")
    root.finish()

    if duration > ue.trajectory.duration_s + 1e-9:
        raise ScenarioError(
            f"scenario.duration_s: {duration} s exceeds the trajectory's "
            f"{ue.trajectory.duration_s:.3f} s")
    for i, w in enumerate(ue.trajectory.waypoints):
        if not (bounds_x[0] <= w[0] <= bounds_x[1] and bounds_y[0] <= w[1] <= bounds_y[1]):
            raise ScenarioError(
                f"scenario.ue.trajectory.waypoints[{i}]: outside declared bounds")

    scenario = Scenario(
        name=name, use_case=use_case, carrier_ghz=carrier, seed=seed,
        duration_s=float(duration), timestep_ms=float(timestep),
        bounds_x=tuple(bounds_x), bounds_y=tuple(bounds_y),
        gnbs=gnbs, ue=ue, materials=materials,
        obstacles=ObstacleSet(obstacles), blockers=blockers,
        budget=budget, duplex=duplex, mcs_table=mcs_table,
        mcs_hysteresis_db=mcs_hyst, bm=bm, cluster_config=cluster_cfg,
        d_corr_m=d_corr, cluster_coherence_m=coherence, regions=regions,
        applied_defaults=defaults,
    )
    for line in defaults:
        log.info("scenario default applied: %s", line)
    return scenario


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario JSON file (or a bundled name)."""
    if path in BUNDLED_SCENARIOS:
        return load_bundled(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from None
    import os
    return parse_scenario(data, name_hint=os.path.splitext(os.path.basename(path))[0])


def load_bundled(name: str) -> Scenario:
    """Load one of the bundled schematic scenarios by name."""
    if name not in BUNDLED_SCENARIOS:
        raise ScenarioError(
            f"unknown bundled scenario '{name}'; available: {', '.join(BUNDLED_SCENARIOS)}")
    text = resources.files("mmwsim.data").joinpath(f"{name}.json").read_text()
    return parse_scenario(json.loads(text), name_hint=name)


def make_ue_state(ue: UeConfig) -> UeAntennaState:
    return UeAntennaState(subarray_geometry=ue.subarray, grip_mode=ue.grip_mode,
                          mask_loss_db=ue.mask_loss_db)
