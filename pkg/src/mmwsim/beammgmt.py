"""Beam management: acquisition, tracking, switching, handover, recovery.

A single-owner state machine per terminal. Every candidate
(gNB, tx beam, rx subarray, rx beam) carries a one-pole filtered SNR.
Intra-gNB beam switches fire immediately once a candidate clears a fixed
margin; inter-gNB handover requires clearing the hysteresis continuously
for the dwell time; radio link failure fires after the serving SNR stays
below threshold for the failure timer, and recovery re-runs acquisition
on the next full sweep.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class ServingTuple(NamedTuple):
    gnb: int
    tx_beam: int
    subarray: int
    rx_beam: int


class LinkMode(str, enum.Enum):
    ACQUIRING = "acquiring"
    CONNECTED = "connected"
    RADIO_LINK_FAILURE = "radio_link_failure"


@dataclass
class LinkState:
    mode: LinkMode = LinkMode.ACQUIRING
    serving: ServingTuple | None = None
    filtered_snr_db: float = -math.inf
    time_in_state_ms: float = 0.0


@dataclass(frozen=True)
class BmConfig:
    """Beam management knobs; the defaults are artifact choices, not
    measured values."""

    handover_hysteresis_db: float = 3.0
    dwell_ms: float = 100.0
    rlf_threshold_db: float = -1.0        # default: lowest MCS threshold - 2
    rlf_timer_ms: float = 200.0
    sweep_period_ms: float = 50.0
    snr_filter_coeff: float = 0.5
    intra_switch_margin_db: float = 1.0
    measurement_time_ms: float = 0.01

    def __post_init__(self):
        if self.handover_hysteresis_db < 0:
            raise ValueError("hysteresis must be non-negative")
        if self.dwell_ms < self.sweep_period_ms:
            raise ValueError("dwell must be at least one sweep period")
        if not 0.0 < self.snr_filter_coeff <= 1.0:
            raise ValueError("snr_filter_coeff must lie in (0, 1]")


class MeasurementReport:
    """Per-candidate instantaneous SNRs at one timestamp.

    One array of shape (tx beams, subarrays, rx beams) per gNB; NaN marks
    candidates not measured in this report. ``full`` says whether this
    report came from a complete sweep of every candidate.
    """

    def __init__(self, timestamp_ms: float, snr_db: dict[int, np.ndarray],
                 full: bool = True):
        if not snr_db:
            raise ValueError("measurement report cannot be empty")
        self.timestamp_ms = timestamp_ms
        self.snr_db = snr_db
        self.full = full

    def get(self, tup: ServingTuple) -> float:
        arr = self.snr_db.get(tup.gnb)
        if arr is None:
            return math.nan
        return float(arr[tup.tx_beam, tup.subarray, tup.rx_beam])

    def best(self) -> tuple[ServingTuple, float]:
        """Global argmax candidate; ties break to the lowest id tuple."""
        best_tup, best_snr = None, -math.inf
        for gnb in sorted(self.snr_db):
            arr = np.nan_to_num(self.snr_db[gnb], nan=-math.inf)
            idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
            snr = float(arr[idx])
            if snr > best_snr:
                best_tup = ServingTuple(gnb, *map(int, idx))
                best_snr = snr
        return best_tup, best_snr


@dataclass(frozen=True)
class Event:
    kind: str                    # BeamSwitch | Handover | LinkDrop | Reacquired
    t_ms: float
    prior: ServingTuple | None
    new: ServingTuple | None
    prior_snr_db: float
    new_snr_db: float

    def format_line(self) -> str:
        def fmt(tup):
            return "-" if tup is None else f"{tup.gnb}:{tup.tx_beam}:{tup.subarray}:{tup.rx_beam}"

        def db(x):
            return "-inf" if math.isinf(x) and x < 0 else f"{x:.2f}"

        return (f"t={self.t_ms / 1000.0:.3f}s {self.kind} "
                f"{fmt(self.prior)}->{fmt(self.new)} "
                f"snr {db(self.prior_snr_db)}->{db(self.new_snr_db)} dB")


@dataclass(frozen=True)
class SweepPlan:
    """Round-robin measurement order covering every candidate once."""

    order: tuple[tuple[int, int, int], ...]   # (gnb, tx beam, ue beam index)
    measurement_time_ms: float

    def __len__(self) -> int:
        return len(self.order)

    @property
    def acquisition_latency_ms(self) -> float:
        return len(self.order) * self.measurement_time_ms


def sweep_schedule(c: BmConfig, n_gnbs: int, beams_per_gnb: int,
                   ue_beams: int) -> SweepPlan:
    """Measurement plan visiting every (gNB, tx beam, UE beam) exactly once."""
    if min(n_gnbs, beams_per_gnb, ue_beams) < 1:
        raise ValueError("all candidate counts must be positive")
    order = tuple((g, b, u)
                  for g in range(n_gnbs)
                  for b in range(beams_per_gnb)
                  for u in range(ue_beams))
    return SweepPlan(order, c.measurement_time_ms)


class BeamManager:
    """Owns the link state and per-candidate SNR filters for one terminal."""

    def __init__(self, config: BmConfig):
        self.config = config
        self.state = LinkState()
        self._filtered: dict[int, np.ndarray] = {}
        self._rlf_low_ms = 0.0
        self._dwell_ms: dict[int, float] = {}

    def _update_filters(self, report: MeasurementReport) -> None:
        c = self.config.snr_filter_coeff
        for gnb, snr in report.snr_db.items():
            prev = self._filtered.get(gnb)
            if prev is None:
                prev = np.full(snr.shape, np.nan)
            fresh = ~np.isnan(snr)
            seeded = fresh & np.isnan(prev)
            out = prev.copy()
            out[fresh] = (1.0 - c) * prev[fresh] + c * snr[fresh]
            out[seeded] = snr[seeded]
            self._filtered[gnb] = out

    def _filtered_of(self, tup: ServingTuple) -> float:
        return float(self._filtered[tup.gnb][tup.tx_beam, tup.subarray, tup.rx_beam])

    def _best_filtered(self, gnb: int) -> tuple[ServingTuple, float]:
        arr = np.nan_to_num(self._filtered[gnb], nan=-math.inf)
        idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
        return ServingTuple(gnb, *map(int, idx)), float(arr[idx])

    def acquire(self, report: MeasurementReport) -> LinkState:
        """Initial beam acquisition on the global best measured candidate.

        Stays in the acquiring mode if every candidate is in outage
        (below the radio-link-failure threshold).
        """
        self._update_filters(report)
        tup, snr = report.best()
        if tup is None or snr < self.config.rlf_threshold_db:
            self.state = LinkState(LinkMode.ACQUIRING, None, -math.inf,
                                   self.state.time_in_state_ms)
            return self.state
        self.state = LinkState(LinkMode.CONNECTED, tup, snr, 0.0)
        self._rlf_low_ms = 0.0
        self._dwell_ms = {}
        return self.state

    def tick(self, report: MeasurementReport, dt_ms: float) -> tuple[LinkState, list[Event]]:
        """Advance the state machine by one step using fresh measurements."""
        if dt_ms <= 0:
            raise ValueError("dt_ms must be positive")
        cfg = self.config
        t = report.timestamp_ms
        events: list[Event] = []
        self.state.time_in_state_ms += dt_ms

        if self.state.mode != LinkMode.CONNECTED:
            if report.full:
                prior_mode = self.state.mode
                st = self.acquire(report)
                if st.mode == LinkMode.CONNECTED and prior_mode == LinkMode.RADIO_LINK_FAILURE:
                    events.append(Event("Reacquired", t, None, st.serving,
                                        -math.inf, st.filtered_snr_db))
            else:
                self._update_filters(report)
            return self.state, events

        serving = self.state.serving
        if math.isnan(report.get(serving)):
            raise ValueError(
                f"measurement report at t={t} ms is missing the serving tuple {serving}")
        self._update_filters(report)
        f_serving = self._filtered_of(serving)

        # Intra-gNB switch: a better beam on the serving transmitter wins
        # immediately once it clears the switch margin.
        best_same, best_same_snr = self._best_filtered(serving.gnb)
        if best_same != serving and best_same_snr >= f_serving + cfg.intra_switch_margin_db:
            events.append(Event("BeamSwitch", t, serving, best_same,
                                f_serving, best_same_snr))
            serving = best_same
            f_serving = best_same_snr

        # Inter-gNB handover: another transmitter must beat the serving
        # one by the hysteresis continuously for the dwell time.
        handover_to: int | None = None
        for gnb in sorted(self._filtered):
            if gnb == serving.gnb:
                continue
            _, best_other = self._best_filtered(gnb)
            if best_other >= f_serving + cfg.handover_hysteresis_db:
                self._dwell_ms[gnb] = self._dwell_ms.get(gnb, 0.0) + dt_ms
                if self._dwell_ms[gnb] >= cfg.dwell_ms and handover_to is None:
                    handover_to = gnb
            else:
                self._dwell_ms[gnb] = 0.0
        if handover_to is not None:
            target, target_snr = self._best_filtered(handover_to)
            events.append(Event("Handover", t, serving, target,
                                f_serving, target_snr))
            serving = target
            f_serving = target_snr
            self._dwell_ms = {}
            self._rlf_low_ms = 0.0
            self.state.time_in_state_ms = 0.0

        # Radio link failure: serving filtered SNR below threshold for the
        # full failure timer.
        if f_serving < cfg.rlf_threshold_db:
            self._rlf_low_ms += dt_ms
        else:
            self._rlf_low_ms = 0.0
        if self._rlf_low_ms >= cfg.rlf_timer_ms:
            events.append(Event("LinkDrop", t, serving, None, f_serving, -math.inf))
            self.state = LinkState(LinkMode.RADIO_LINK_FAILURE, None, -math.inf, 0.0)
            self._rlf_low_ms = 0.0
            self._dwell_ms = {}
            return self.state, events

        if serving != self.state.serving:
            self.state.serving = serving
        self.state.filtered_snr_db = f_serving
        return self.state, events
