"""Link budget and link adaptation.

SNR from composite path gains under the prototype's power limits, SNR to
MCS mapping up to 64-QAM with optional switching hysteresis, and
throughput under the TDD airtime split.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class Direction(str, enum.Enum):
    DL = "dl"
    UL = "ul"


@dataclass(frozen=True)
class DuplexConfig:
    """TDD airtime split. The default favors the downlink 3:1."""

    dl_fraction: float = 0.75
    ul_fraction: float = 0.25

    def __post_init__(self):
        if not self.dl_fraction > 0:
            raise ValueError("dl_fraction must be positive")
        if self.ul_fraction < 0:
            raise ValueError("ul_fraction must be non-negative")
        if self.dl_fraction + self.ul_fraction > 1.0 + 1e-12:
            raise ValueError("airtime fractions must sum to at most 1")

    def fraction(self, direction: Direction) -> float:
        return self.dl_fraction if direction == Direction.DL else self.ul_fraction


@dataclass(frozen=True)
class LinkBudget:
    """Prototype power and bandwidth limits.

    The base-station EIRP ceiling, transmit dynamic range, and bandwidth
    are the hardware's; terminal EIRP and noise figure are configurable
    assumptions (the hardware description leaves them open).
    """

    gnb_max_eirp_dbm: float = 55.0
    tx_dynamic_range_db: float = 19.0
    bandwidth_mhz: float = 240.0
    noise_figure_db: float = 7.0
    ue_eirp_dbm: float = 30.0
    carrier_ghz: float = 28.0

    def noise_floor_dbm(self) -> float:
        return -174.0 + 10.0 * math.log10(self.bandwidth_mhz * 1e6) + self.noise_figure_db

    def eirp_dbm(self, direction: Direction) -> float:
        return self.gnb_max_eirp_dbm if direction == Direction.DL else self.ue_eirp_dbm


def snr_db(b: LinkBudget, direction: Direction, path_gain_db: float,
           power_backoff_db: float = 0.0) -> float:
    """Link SNR for a composite path gain (beamforming gains included).

    path_gain_db is negative for a lossy path; -inf marks a fully blocked
    link and propagates to an SNR of -inf.
    """
    if not 0.0 <= power_backoff_db <= b.tx_dynamic_range_db:
        raise ValueError(
            f"power backoff {power_backoff_db} dB outside the "
            f"[0, {b.tx_dynamic_range_db}] dB dynamic range")
    return b.eirp_dbm(direction) - power_backoff_db + path_gain_db - b.noise_floor_dbm()


@dataclass(frozen=True)
class McsEntry:
    modulation: str
    code_rate: str
    spectral_efficiency: float     # delivered bps/Hz, overhead included
    min_snr_db: float


@dataclass(frozen=True)
class McsTable:
    """Ordered MCS ladder; thresholds and efficiencies strictly increase."""

    entries: tuple[McsEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("MCS table cannot be empty")
        for a, b in zip(self.entries, self.entries[1:]):
            if not b.min_snr_db > a.min_snr_db:
                raise ValueError("MCS thresholds must strictly increase")
            if not b.spectral_efficiency > a.spectral_efficiency:
                raise ValueError("MCS efficiencies must strictly increase")
        if self.entries[-1].modulation != "64QAM":
            raise ValueError("the top MCS entry must be 64-QAM")

    def peak_rate_mbps(self, bandwidth_mhz: float = 240.0) -> float:
        return self.entries[-1].spectral_efficiency * bandwidth_mhz


# Default ladder calibrated so the top rate at 240 MHz is 600 Mbps (the
# prototype's observed peak rather than the raw constellation rate; the
# efficiencies fold in implementation overhead). Thresholds are AWGN
# waterfall values less a 2 dB implementation margin.
DEFAULT_MCS_TABLE = McsTable((
    McsEntry("QPSK", "1/2", 5.0 / 6.0, 1.0),
    McsEntry("QPSK", "3/4", 25.0 / 24.0, 4.0),
    McsEntry("16QAM", "1/2", 5.0 / 4.0, 7.0),
    McsEntry("16QAM", "3/4", 25.0 / 16.0, 10.5),
    McsEntry("64QAM", "1/2", 15.0 / 8.0, 13.5),
    McsEntry("64QAM", "2/3", 25.0 / 12.0, 16.5),
    McsEntry("64QAM", "5/6", 5.0 / 2.0, 19.5),
))

OUTAGE = -1   # MCS index reported when no entry's threshold is met


def select_mcs(t: McsTable, snr: float, hysteresis_db: float = 0.0,
               current: int | None = None) -> int:
    """Index of the serving MCS entry, or OUTAGE below the lowest threshold.

    Stateless (current=None): the highest entry whose threshold is at most
    snr - hysteresis; an SNR exactly on a threshold selects that entry when
    hysteresis is zero. Stateful: upgrades still require clearing the new
    threshold by the hysteresis, but the current entry is kept until SNR
    falls below its own threshold, so entry flips need SNR swings of at
    least the hysteresis.
    """
    def highest_at_most(level: float) -> int:
        idx = OUTAGE
        for i, e in enumerate(t.entries):
            if e.min_snr_db <= level:
                idx = i
        return idx

    if current is None or current == OUTAGE:
        return highest_at_most(snr - hysteresis_db)
    if current >= len(t.entries):
        raise ValueError(f"current MCS index {current} out of range")
    if snr < t.entries[current].min_snr_db:
        return highest_at_most(snr)
    upgraded = highest_at_most(snr - hysteresis_db)
    return max(upgraded, current)


def throughput_mbps(t: McsTable, mcs_index: int, duplex: DuplexConfig,
                    direction: Direction, bandwidth_mhz: float = 240.0) -> float:
    """Delivered rate for one direction; outage delivers nothing."""
    if mcs_index == OUTAGE:
        return 0.0
    if not 0 <= mcs_index < len(t.entries):
        raise ValueError(f"MCS index {mcs_index} out of range")
    eff = t.entries[mcs_index].spectral_efficiency
    return eff * bandwidth_mhz * duplex.fraction(direction)


def spectral_efficiency(t: McsTable, mcs_index: int) -> float:
    """Delivered spectral efficiency of an entry; outage is zero."""
    if mcs_index == OUTAGE:
        return 0.0
    return t.entries[mcs_index].spectral_efficiency
