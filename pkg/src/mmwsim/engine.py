"""Deterministic simulation loop, trace/event emission, and coverage maps.

One fixed-timestep pass per run: move the terminal, evolve the channel
toward every transmitter, sweep candidate beams on schedule, tick beam
management, adapt the MCS, and log one trace row per step. Identical
scenario and seed give bit-identical traces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import link as linkmod
from .antenna import (Codebook, build_codebook, build_ue_codebooks,
                      apply_grip_mask, subarray_local_angles)
from .beammgmt import BeamManager, Event, LinkMode, MeasurementReport, ServingTuple
from .channel import LinkChannel, LinkType, lookup_path_loss_params, path_loss_db
from .geometry import Orientation, Vec3
from .link import Direction, select_mcs, spectral_efficiency, throughput_mbps
from .scenario import Scenario, make_ue_state

TRACE_COLUMNS = ("t,x,y,z,gnb,txbeam,subarr,rxbeam,snr_db,fsnr_db,mcs,"
                 "dl_mbps,ul_mbps,event")
COVERAGE_COLUMNS = "x,y,se_bpshz,best_gnb"


@dataclass
class TraceRow:
    t_s: float
    x: float
    y: float
    z: float
    gnb: int
    tx_beam: int
    subarray: int
    rx_beam: int
    snr_db: float
    fsnr_db: float
    mcs: int
    dl_mbps: float
    ul_mbps: float
    event: str


@dataclass
class SimResult:
    scenario: Scenario
    rows: list[TraceRow]
    events: list[Event]

    def delivered_megabits(self, direction: Direction = Direction.DL) -> float:
        dt_s = self.scenario.timestep_ms / 1000.0
        key = "dl_mbps" if direction == Direction.DL else "ul_mbps"
        return sum(getattr(r, key) for r in self.rows) * dt_s


class _GnbRuntime:
    def __init__(self, cfg, codebook: Codebook, channel: LinkChannel):
        self.cfg = cfg
        self.codebook = codebook
        self.channel = channel


def _build_runtimes(s: Scenario) -> list[_GnbRuntime]:
    master = np.random.SeedSequence(s.seed)
    children = master.spawn(len(s.gnbs))
    runtimes = []
    for cfg, child in zip(s.gnbs, children):
        cb = build_codebook(cfg.array, cfg.sector_az_deg, cfg.sector_el_deg,
                            levels=cfg.codebook_levels, n_bits=cfg.phase_bits)
        ch = LinkChannel(cfg.position, cfg.orientation, s.use_case, s.carrier_ghz,
                         s.obstacles, s.materials, child,
                         cluster_config=s.cluster_config, d_corr_m=s.d_corr_m,
                         cluster_coherence_m=s.cluster_coherence_m,
                         blockers=s.blockers)
        runtimes.append(_GnbRuntime(cfg, cb, ch))
    return runtimes


def _rx_gain_lin(gains, ue_state, ue_books) -> np.ndarray:
    """Linear receive gain per (subarray, rx beam, cluster), grip-aware."""
    cl = gains.clusters.clusters
    aoa_az = np.array([c.aoa_az_deg for c in cl])
    aoa_el = np.array([c.aoa_el_deg for c in cl])
    n_sub = ue_state.n_subarrays
    n_rx = len(ue_books[0].finest)
    grx = np.zeros((n_sub, n_rx, len(cl)))
    disabled = ue_state.disabled_subarrays()
    for sid in range(n_sub):
        if sid in disabled:
            continue
        az_l = (aoa_az - ue_state.mount_az_deg[sid] + 180.0) % 360.0 - 180.0
        g = ue_books[sid].gains_toward(az_l, aoa_el)                  # (R, C)
        rect = ue_state.mask_rect(sid)
        if rect is not None:
            d_az = (aoa_az - rect.center_az_deg + 180.0) % 360.0 - 180.0
            inside = ((np.abs(d_az) <= rect.az_extent_deg / 2.0)
                      & (np.abs(aoa_el - rect.center_el_deg) <= rect.el_extent_deg / 2.0))
            g = g - inside[None, :] * ue_state.mask_loss_db
        grx[sid] = 10.0 ** (g / 10.0)
    return grx


def _snr_grid(rt: _GnbRuntime, gains, ue_state, ue_books, budget) -> np.ndarray:
    """Downlink SNR for every (tx beam, subarray, rx beam) candidate, dB."""
    cl = gains.clusters.clusters
    g_lin = 10.0 ** (gains.cluster_gains_db / 10.0)
    aod_az = np.array([c.aod_az_deg for c in cl])
    aod_el = np.array([c.aod_el_deg for c in cl])
    gtx = 10.0 ** (rt.codebook.gains_toward(aod_az, aod_el) / 10.0)        # (B, C)
    grx = _rx_gain_lin(gains, ue_state, ue_books)                          # (S, R, C)
    coupled = np.einsum("bc,src->bsr", gtx * g_lin, grx)
    with np.errstate(divide="ignore"):
        path_gain = 10.0 * np.log10(coupled)
    return rt.cfg.max_eirp_dbm + path_gain - budget.noise_floor_dbm()


def _serving_snr(rt, gains, ue_state, ue_books, budget, tup: ServingTuple) -> float:
    """Downlink SNR of one candidate tuple only."""
    cl = gains.clusters.clusters
    g_lin = 10.0 ** (gains.cluster_gains_db / 10.0)
    aod_az = np.array([c.aod_az_deg for c in cl])
    aod_el = np.array([c.aod_el_deg for c in cl])
    gtx = 10.0 ** (rt.codebook.gains_toward(aod_az, aod_el)[tup.tx_beam] / 10.0)
    grx = _rx_gain_lin(gains, ue_state, ue_books)[tup.subarray, tup.rx_beam]
    total = float(np.sum(g_lin * gtx * grx))
    if total <= 0.0:
        return -math.inf
    return rt.cfg.max_eirp_dbm + 10.0 * math.log10(total) - budget.noise_floor_dbm()


def run(s: Scenario) -> SimResult:
    """Run the scenario's fixed-timestep mobility simulation."""
    runtimes = _build_runtimes(s)
    ue_state = make_ue_state(s.ue)
    ue_books = build_ue_codebooks(ue_state, s.ue.beams_per_subarray,
                                  s.ue.sector_az_deg, s.ue.phase_bits)
    manager = BeamManager(s.bm)
    dt_ms = s.timestep_ms
    n_steps = int(round(s.duration_s * 1000.0 / dt_ms)) + 1
    sweep_every = max(1, int(round(s.bm.sweep_period_ms / dt_ms)))
    gnb_index = {rt.cfg.gnb_id: i for i, rt in enumerate(runtimes)}

    rows: list[TraceRow] = []
    all_events: list[Event] = []
    traj = s.ue.trajectory
    current_dl = None
    current_ul = None

    for k in range(n_steps):
        t = k * dt_ms / 1000.0
        pos = traj.position_at(min(t, traj.duration_s))
        heading = traj.heading_azimuth_at(min(t, traj.duration_s))
        body = Orientation(heading, 90.0)
        displacement = traj.distance_at(min(t, traj.duration_s))

        gains = [rt.channel.state_at(pos, body, displacement, t) for rt in runtimes]

        full = (k % sweep_every == 0)
        serving = manager.state.serving
        if full or serving is None:
            snr = {rt.cfg.gnb_id: _snr_grid(rt, gains[i], ue_state, ue_books, s.budget)
                   for i, rt in enumerate(runtimes)}
            report = MeasurementReport(k * dt_ms, snr, full=True)
        else:
            rt = runtimes[gnb_index[serving.gnb]]
            val = _serving_snr(rt, gains[gnb_index[serving.gnb]], ue_state,
                               ue_books, s.budget, serving)
            arr = np.full((len(rt.codebook.finest), ue_state.n_subarrays,
                           len(ue_books[0].finest)), np.nan)
            arr[serving.tx_beam, serving.subarray, serving.rx_beam] = val
            report = MeasurementReport(k * dt_ms, snr_db={serving.gnb: arr}, full=False)

        if k == 0:
            state = manager.acquire(report)
            events: list[Event] = []
        else:
            state, events = manager.tick(report, dt_ms)
        all_events.extend(events)

        if state.mode == LinkMode.CONNECTED:
            tup = state.serving
            inst = report.get(tup)
            if math.isnan(inst):
                inst = _serving_snr(runtimes[gnb_index[tup.gnb]],
                                    gains[gnb_index[tup.gnb]], ue_state, ue_books,
                                    s.budget, tup)
            fsnr = state.filtered_snr_db
            rtb = runtimes[gnb_index[tup.gnb]]
            ul_offset = rtb.cfg.max_eirp_dbm - s.budget.ue_eirp_dbm
            current_dl = select_mcs(s.mcs_table, fsnr, s.mcs_hysteresis_db, current_dl)
            current_ul = select_mcs(s.mcs_table, fsnr - ul_offset,
                                    s.mcs_hysteresis_db, current_ul)
            dl = throughput_mbps(s.mcs_table, current_dl, s.duplex, Direction.DL,
                                 s.budget.bandwidth_mhz)
            ul = throughput_mbps(s.mcs_table, current_ul, s.duplex, Direction.UL,
                                 s.budget.bandwidth_mhz)
            rows.append(TraceRow(t, pos.x, pos.y, pos.z, tup.gnb, tup.tx_beam,
                                 tup.subarray, tup.rx_beam, inst, fsnr,
                                 current_dl, dl, ul,
                                 "+".join(e.kind for e in events)))
        else:
            current_dl = None
            current_ul = None
            rows.append(TraceRow(t, pos.x, pos.y, pos.z, -1, -1, -1, -1,
                                 -math.inf, -math.inf, linkmod.OUTAGE, 0.0, 0.0,
                                 "+".join(e.kind for e in events)))

    return SimResult(s, rows, all_events)


@dataclass
class CoverageMap:
    xs: np.ndarray
    ys: np.ndarray
    se_bps_hz: np.ndarray        # (ny, nx)
    best_gnb: np.ndarray         # (ny, nx) int; -1 where no gNB serves

    def point_rows(self):
        for iy, y in enumerate(self.ys):
            for ix, x in enumerate(self.xs):
                yield float(x), float(y), float(self.se_bps_hz[iy, ix]), int(self.best_gnb[iy, ix])


def coverage_map(s: Scenario, grid_step_m: float = 1.0) -> CoverageMap:
    """Best achievable spectral efficiency per grid point.

    Shadowing pinned to its median (0 dB), blockers removed, terminal body
    frame facing north: per point, the best over gNBs, transmit beams, and
    terminal subarrays/beams of the direct-path link. Statistical clusters
    are excluded so the map is deterministic geometry.
    """
    if not grid_step_m > 0:
        raise ValueError("grid_step_m must be positive")
    xs = np.arange(s.bounds_x[0] + grid_step_m / 2.0, s.bounds_x[1], grid_step_m)
    ys = np.arange(s.bounds_y[0] + grid_step_m / 2.0, s.bounds_y[1], grid_step_m)
    z = float(s.ue.trajectory.waypoints[0][2])
    px, py = np.meshgrid(xs, ys)
    points = np.stack([px.ravel(), py.ravel(), np.full(px.size, z)], axis=1)
    n_pts = points.shape[0]

    ue_state = make_ue_state(s.ue)
    ue_books = build_ue_codebooks(ue_state, s.ue.beams_per_subarray,
                                  s.ue.sector_az_deg, s.ue.phase_bits)
    params_los = lookup_path_loss_params(s.use_case, LinkType.LOS, s.carrier_ghz)
    params_nlos = lookup_path_loss_params(s.use_case, LinkType.NLOS, s.carrier_ghz)
    thresholds = np.array([e.min_snr_db for e in s.mcs_table.entries])
    effs = np.array([e.spectral_efficiency for e in s.mcs_table.entries])

    per_meter = None
    if len(s.obstacles) > 0:
        from .channel import penetration_loss_db
        per_meter = np.array([
            penetration_loss_db(s.materials[mid], s.carrier_ghz, 1.0, 1.0)
            for mid in s.obstacles.material_ids]) / np.maximum(s.obstacles.thickness, 1e-12)

    best_snr = np.full(n_pts, -math.inf)
    best_gnb = np.full(n_pts, -1, dtype=int)
    for cfg in s.gnbs:
        cb = build_codebook(cfg.array, cfg.sector_az_deg, cfg.sector_el_deg,
                            levels=cfg.codebook_levels, n_bits=cfg.phase_bits)
        tx = cfg.position.as_array()
        d_vec = points - tx
        dist = np.linalg.norm(d_vec, axis=1)
        dist = np.maximum(dist, 1.0)
        unit = d_vec / dist[:, None]

        pen = np.zeros(n_pts)
        is_los = np.ones(n_pts, dtype=bool)
        if per_meter is not None:
            chords = s.obstacles.chord_lengths(np.broadcast_to(tx, points.shape), points)
            pen = chords @ per_meter
            is_los = ~np.any(chords > 1e-9, axis=1)

        alpha = np.where(is_los, params_los.alpha, params_nlos.alpha)
        pl0 = path_loss_db(params_los, 1.0)
        pl = pl0 + 10.0 * alpha * np.log10(dist)

        f, r, u = cfg.orientation.axes()
        el_tx = np.degrees(np.arcsin(np.clip(unit @ u, -1.0, 1.0)))
        az_tx = np.degrees(np.arctan2(unit @ r, unit @ f))
        gtx = cb.gains_toward(az_tx, el_tx).max(axis=0)

        # Terminal side: body frame faces north; best subarray and beam.
        back = -unit
        el_rx = np.degrees(np.arcsin(np.clip(back[:, 2], -1.0, 1.0)))
        az_rx = np.degrees(np.arctan2(back[:, 0], back[:, 1]))
        grx = np.full(n_pts, -math.inf)
        for sid in range(ue_state.n_subarrays):
            if sid in ue_state.disabled_subarrays():
                continue
            az_l = (az_rx - ue_state.mount_az_deg[sid] + 180.0) % 360.0 - 180.0
            g = ue_books[sid].gains_toward(az_l, el_rx).max(axis=0)
            rect = ue_state.mask_rect(sid)
            if rect is not None:
                d_az = (az_rx - rect.center_az_deg + 180.0) % 360.0 - 180.0
                inside = ((np.abs(d_az) <= rect.az_extent_deg / 2.0)
                          & (np.abs(el_rx - rect.center_el_deg) <= rect.el_extent_deg / 2.0))
                g = g - inside * ue_state.mask_loss_db
            grx = np.maximum(grx, g)

        snr = cfg.max_eirp_dbm - pl - pen + gtx + grx - s.budget.noise_floor_dbm()
        better = snr > best_snr
        best_snr = np.where(better, snr, best_snr)
        best_gnb = np.where(better, cfg.gnb_id, best_gnb)

    idx = np.searchsorted(thresholds, best_snr, side="right") - 1
    se = np.where(idx >= 0, effs[np.maximum(idx, 0)], 0.0)
    served = np.isfinite(best_snr) & (idx >= 0)
    return CoverageMap(xs, ys, se.reshape(py.shape),
                       np.where(served, best_gnb, -1).reshape(py.shape).astype(int))


def _fmt_db(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.2f}"


def format_trace(rows: list[TraceRow]) -> str:
    """Delimited-text trace; byte-deterministic for equal inputs."""
    lines = [TRACE_COLUMNS]
    for r in rows:
        lines.append(
            f"{r.t_s:.3f},{r.x:.3f},{r.y:.3f},{r.z:.3f},{r.gnb},{r.tx_beam},"
            f"{r.subarray},{r.rx_beam},{_fmt_db(r.snr_db)},{_fmt_db(r.fsnr_db)},"
            f"{r.mcs},{r.dl_mbps:.2f},{r.ul_mbps:.2f},{r.event}")
    return "\n".join(lines) + "\n"


def format_events(events: list[Event]) -> str:
    return "".join(e.format_line() + "\n" for e in events)


def format_coverage(cm: CoverageMap) -> str:
    lines = [COVERAGE_COLUMNS]
    for x, y, se, gnb in cm.point_rows():
        lines.append(f"{x:.3f},{y:.3f},{se:.4f},{gnb}")
    return "\n".join(lines) + "\n"


def trace_to_json(rows: list[TraceRow]) -> str:
    out = []
    for r in rows:
        d = dict(t=round(r.t_s, 6), x=round(r.x, 6), y=round(r.y, 6),
                 z=round(r.z, 6), gnb=r.gnb, txbeam=r.tx_beam, subarr=r.subarray,
                 rxbeam=r.rx_beam,
                 snr_db=None if math.isinf(r.snr_db) else round(r.snr_db, 4),
                 fsnr_db=None if math.isinf(r.fsnr_db) else round(r.fsnr_db, 4),
                 mcs=r.mcs, dl_mbps=round(r.dl_mbps, 4), ul_mbps=round(r.ul_mbps, 4),
                 event=r.event)
        out.append(d)
    return json.dumps(out, sort_keys=True, separators=(",", ":")) + "\n"


def coverage_to_json(cm: CoverageMap) -> str:
    out = [dict(x=round(x, 6), y=round(y, 6), se_bpshz=round(se, 6), best_gnb=g)
           for x, y, se, g in cm.point_rows()]
    return json.dumps(out, sort_keys=True, separators=(",", ":")) + "\n"


def emit(content: str, path: str) -> None:
    """Write pre-formatted content; IO errors carry the path context."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(content)
    except OSError as e:
        raise RuntimeError(f"cannot write output to {path}: {e}") from e
