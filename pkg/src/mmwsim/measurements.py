"""Channel sounding emulation and propagation model fitting.

Maximal-length PN sequences, correlation-based power-delay-profile
estimation at half-chip resolution (a 100 Mc/s chip rate despread by a
200 MHz sampler gives 5 ns bins), RMS delay spread, and the least-squares
fit that recovers path loss exponent and shadowing std from distance
samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .antenna import ArrayGeometry, beam_gain_db, quantize_weights, steering_vector
from .channel import ClusterSet, PathLossParams, free_space_db

# Primitive feedback taps (polynomial exponents) per register length,
# fixed for reproducibility. Standard minimal-tap maximal-length sets.
PN_TAPS: dict[int, tuple[int, ...]] = {
    2: (2, 1), 3: (3, 2), 4: (4, 3), 5: (5, 3), 6: (6, 5), 7: (7, 6),
    8: (8, 6, 5, 4), 9: (9, 5), 10: (10, 7), 11: (11, 9), 12: (12, 6, 4, 1),
    13: (13, 4, 3, 1), 14: (14, 5, 3, 1), 15: (15, 14), 16: (16, 15, 13, 4),
    17: (17, 14), 18: (18, 11), 19: (19, 6, 2, 1), 20: (20, 17),
}


def pn_sequence(order: int) -> np.ndarray:
    """Maximal-length +/-1 chip sequence of length 2^order - 1.

    Fibonacci LFSR seeded all-ones with the documented taps; a register
    bit of 1 maps to chip +1.
    """
    if order not in PN_TAPS:
        raise ValueError(f"unsupported PN order {order}; supported: 2..20")
    taps = PN_TAPS[order]
    length = (1 << order) - 1
    state = (1 << order) - 1
    chips = np.empty(length, dtype=float)
    for i in range(length):
        out = state & 1
        chips[i] = 1.0 if out else -1.0
        fb = 0
        for tp in taps:
            fb ^= (state >> (order - tp)) & 1
        state = (state >> 1) | (fb << (order - 1))
    return chips


@dataclass(frozen=True)
class Pdp:
    """Power-delay profile: bin delays in ns and nonnegative linear powers."""

    delays_ns: np.ndarray
    powers: np.ndarray
    resolution_ns: float

    def __post_init__(self):
        if self.delays_ns.shape != self.powers.shape:
            raise ValueError("delays and powers must align")
        if np.any(self.powers < 0):
            raise ValueError("powers must be non-negative")
        if np.any(np.diff(self.delays_ns) <= 0):
            raise ValueError("delays must strictly increase")


def sound_channel(cir: list[tuple[float, complex]], chip_rate_mcps: float = 100.0,
                  order: int = 10, noise_snr_db: float = math.inf,
                  n_periods: int = 16, seed: int = 0) -> Pdp:
    """Estimate a PDP by sounding a tapped-delay channel with a PN sequence.

    The sequence is transmitted as ideal pulses sampled at twice the chip
    rate, passed through the channel taps (rounded to the half-chip grid),
    noise is added at the given SNR per sample, and the average over
    ``n_periods`` periods is circularly correlated against the reference.
    Powers are normalized by the sequence length so a unit tap yields a
    peak of one sequence length.
    """
    if chip_rate_mcps <= 0:
        raise ValueError("chip rate must be positive")
    chips = pn_sequence(order)
    length = chips.size
    fs_mhz = 2.0 * chip_rate_mcps
    resolution_ns = 1e3 / fs_mhz
    n_samples = 2 * length
    duration_ns = n_samples * resolution_ns

    tx = np.zeros(n_samples, dtype=complex)
    tx[::2] = chips
    rx = np.zeros(n_samples, dtype=complex)
    for delay_ns, amp in cir:
        if delay_ns < 0:
            raise ValueError("tap delays must be non-negative")
        if delay_ns >= duration_ns:
            raise ValueError(
                f"tap at {delay_ns} ns aliases: sequence spans {duration_ns:.1f} ns")
        shift = int(round(delay_ns / resolution_ns))
        rx += amp * np.roll(tx, shift)

    if math.isfinite(noise_snr_db):
        rng = np.random.Generator(np.random.PCG64(seed))
        sig_power = float(np.mean(np.abs(rx) ** 2))
        ref_power = sig_power if sig_power > 0 else 1.0
        noise_power = ref_power * 10.0 ** (-noise_snr_db / 10.0)
        acc = np.zeros(n_samples, dtype=complex)
        scale = math.sqrt(noise_power / 2.0)
        for _ in range(n_periods):
            noise = scale * (rng.standard_normal(n_samples)
                             + 1j * rng.standard_normal(n_samples))
            acc += rx + noise
        rx = acc / n_periods

    ref_f = np.fft.fft(tx)
    corr = np.fft.ifft(np.fft.fft(rx) * np.conj(ref_f))
    powers = np.abs(corr) ** 2 / length
    delays = np.arange(n_samples) * resolution_ns
    return Pdp(delays, powers, resolution_ns)


def rms_delay_spread(p: Pdp, threshold_db: float = 25.0) -> float:
    """Power-weighted RMS spread over taps within threshold of the peak."""
    peak = float(p.powers.max())
    if peak <= 0.0:
        raise ValueError("PDP has no power above zero")
    keep = p.powers >= peak * 10.0 ** (-threshold_db / 10.0)
    if not np.any(keep):
        raise ValueError("no taps above the threshold")
    w = p.powers[keep]
    tau = p.delays_ns[keep]
    mean = float(np.sum(w * tau) / np.sum(w))
    second = float(np.sum(w * tau ** 2) / np.sum(w))
    return math.sqrt(max(second - mean ** 2, 0.0))


def cluster_pdp(clusters: ClusterSet, gains_db: np.ndarray | None = None) -> Pdp:
    """Ideal (omni) PDP of a cluster set: one tap per cluster."""
    if gains_db is None:
        gains_db = np.array([c.power_db for c in clusters.clusters])
    delays = np.array([c.excess_delay_ns for c in clusters.clusters])
    powers = 10.0 ** (np.asarray(gains_db, dtype=float) / 10.0)
    order = np.argsort(delays)
    delays, powers = delays[order], powers[order]
    if delays.size > 1 and np.any(np.diff(delays) == 0.0):
        # Merge taps sharing a delay so the profile stays strictly increasing.
        uniq, inv = np.unique(delays, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, powers)
        delays, powers = uniq, merged
    return Pdp(delays, powers, resolution_ns=0.0)


def beam_filtered_pdp(clusters: ClusterSet, geometry: ArrayGeometry,
                      n_bits: int = 4) -> Pdp:
    """PDP seen through a single analog beam pointed at the strongest cluster.

    Each cluster's tap is weighted by the beam's power gain toward its
    departure direction, normalized to the gain toward the pointed cluster.
    """
    powers = np.array([c.power_db for c in clusters.clusters])
    target = clusters.clusters[int(np.argmax(powers))]
    az0 = min(max(target.aod_az_deg, -89.0), 89.0)
    el0 = min(max(target.aod_el_deg, -89.0), 89.0)
    w = quantize_weights(steering_vector(geometry, az0, el0), n_bits)
    ref = beam_gain_db(geometry, w, az0, el0)
    rel = np.array([beam_gain_db(geometry, w, c.aod_az_deg, c.aod_el_deg) - ref
                    for c in clusters.clusters])
    return cluster_pdp(clusters, powers + rel)


@dataclass(frozen=True)
class PathLossSample:
    distance_m: float
    path_loss_db: float

    def __post_init__(self):
        if self.distance_m < 1.0:
            raise ValueError("samples must be at least the 1 m reference distance")


@dataclass(frozen=True)
class PathLossFit:
    alpha_hat: float
    sigma_hat_db: float
    residuals_db: np.ndarray


def fit_path_loss(samples: list[PathLossSample], f_c_ghz: float) -> PathLossFit:
    """Least-squares fit of the close-in model to measured samples.

    The intercept is pinned to the free-space loss at 1 m, so the fit has
    one slope parameter: the path loss exponent. The shadowing std is the
    residual standard deviation with an n-1 denominator.
    """
    if len(samples) < 3:
        raise ValueError("need at least 3 samples to fit")
    d = np.array([s.distance_m for s in samples])
    if np.all(d == d[0]):
        raise ValueError("samples must span distinct distances")
    y = np.array([s.path_loss_db for s in samples]) - free_space_db(f_c_ghz)
    x = 10.0 * np.log10(d)
    alpha = float(np.sum(x * y) / np.sum(x * x))
    resid = y - alpha * x
    sigma = float(np.sqrt(np.sum(resid ** 2) / (len(samples) - 1)))
    return PathLossFit(alpha, sigma, resid)


def synthesize_path_loss_samples(params: PathLossParams, n: int, seed,
                                 d_range_m: tuple[float, float] = (1.0, 200.0),
                                 ) -> list[PathLossSample]:
    """Generate samples from the model itself (log-uniform distances)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = d_range_m
    d = 10.0 ** rng.uniform(math.log10(lo), math.log10(hi), n)
    pl0 = free_space_db(params.f_c_ghz)
    shadow = rng.normal(0.0, params.sigma_x_db, n)
    pl = pl0 + 10.0 * params.alpha * np.log10(d) + shadow
    return [PathLossSample(float(di), float(pi)) for di, pi in zip(d, pl)]
