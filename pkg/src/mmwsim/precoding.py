"""Single-user beam-pair selection and multi-user analog precoders.

Three multi-user strategies over composite array-domain channels:
per-user beam steering (interference-agnostic matched filtering),
zeroforcing (each user's weights null the others), and generalized
eigenvector precoding, which maximizes each user's
signal-to-leakage-plus-noise ratio and interpolates between the two.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .antenna import Codebook, UeAntennaState, apply_grip_mask, subarray_local_angles
from .channel import ClusterSet


class PrecoderStrategy(str, enum.Enum):
    STEERING = "steering"
    ZEROFORCING = "zeroforcing"
    GENERALIZED_EIGENVECTOR = "generalized_eigenvector"


@dataclass
class PrecoderSet:
    """Per-user unit-norm weight vectors with the strategy that built them."""

    weights: list[np.ndarray]
    strategy: PrecoderStrategy

    def __post_init__(self):
        for k, w in enumerate(self.weights):
            n = np.linalg.norm(w)
            if abs(n - 1.0) > 1e-9:
                raise ValueError(f"precoder {k} is not unit norm (|w|={n})")


def _validate_channels(channels) -> list[np.ndarray]:
    hs = [np.asarray(h, dtype=complex) for h in channels]
    if not hs:
        raise ValueError("at least one user channel is required")
    dim = hs[0].shape
    for k, h in enumerate(hs):
        if h.ndim != 1 or h.shape != dim:
            raise ValueError("user channels must be 1-D vectors of equal length")
        if not np.all(np.isfinite(h.view(float))):
            raise ValueError(f"channel {k} has non-finite entries")
        if np.linalg.norm(h) == 0.0:
            raise ValueError(f"channel {k} is identically zero")
    return hs


def select_beam_pair(clusters: ClusterSet, tx_codebook: Codebook,
                     ue: UeAntennaState, ue_codebooks: list[Codebook],
                     cluster_gains_db: np.ndarray | None = None,
                     ) -> tuple[int, int, int, float]:
    """Exhaustive best (tx beam, rx subarray, rx beam) over the cluster set.

    Maximizes the phase-agnostic coupled gain: the power sum over clusters
    of cluster gain times transmit and receive beam gains. Cluster gains
    default to the set's relative powers; pass blockage-adjusted gains to
    weight the search by the live channel. Ties resolve to the lowest
    (tx, subarray, beam) tuple. Returns the winning indices and the coupled
    gain in dB.
    """
    if not clusters.clusters:
        raise ValueError("cluster set is empty")
    if cluster_gains_db is None:
        cluster_gains_db = np.array([c.power_db for c in clusters.clusters])
    gains_lin = 10.0 ** (np.asarray(cluster_gains_db, dtype=float) / 10.0)
    aod_az = np.array([c.aod_az_deg for c in clusters.clusters])
    aod_el = np.array([c.aod_el_deg for c in clusters.clusters])
    gtx = 10.0 ** (tx_codebook.gains_toward(aod_az, aod_el) / 10.0)   # (B, C)

    n_sub = ue.n_subarrays
    n_rx = len(ue_codebooks[0].finest)
    grx = np.zeros((n_sub, n_rx, len(clusters.clusters)))
    for sid in range(n_sub):
        for ci, c in enumerate(clusters.clusters):
            mask = apply_grip_mask(ue, sid, c.aoa_az_deg, c.aoa_el_deg)
            if math.isinf(mask):
                continue
            az_l, el_l = subarray_local_angles(ue, sid, c.aoa_az_deg, c.aoa_el_deg)
            grx[sid, :, ci] = 10.0 ** ((ue_codebooks[sid].gains_toward(az_l, el_l) - mask) / 10.0)

    coupled = np.einsum("bc,src,c->bsr", gtx, grx, gains_lin)
    flat = int(np.argmax(coupled))   # argmax takes the first max: lowest tuple wins
    b, s, r = np.unravel_index(flat, coupled.shape)
    best = coupled[b, s, r]
    if best <= 0.0:
        return int(b), int(s), int(r), -math.inf
    return int(b), int(s), int(r), 10.0 * math.log10(best)


def mu_steering(channels) -> PrecoderSet:
    """Matched filter per user, ignoring inter-user interference."""
    hs = _validate_channels(channels)
    ws = [h / np.linalg.norm(h) for h in hs]
    return PrecoderSet(ws, PrecoderStrategy.STEERING)


def mu_zeroforcing(channels) -> PrecoderSet:
    """Project each user's channel onto the null space of the others.

    Requires at most as many users as antennas and linearly independent
    channels; raises naming the offending users otherwise.
    """
    hs = _validate_channels(channels)
    k_users = len(hs)
    n = hs[0].size
    if k_users > n:
        raise ValueError(f"zeroforcing needs K <= N, got K={k_users}, N={n}")
    ws = []
    for k, h in enumerate(hs):
        others = [hs[j] for j in range(k_users) if j != k]
        if others:
            basis = np.stack(others, axis=1)                  # (N, K-1)
            q, r = np.linalg.qr(basis)
            diag = np.abs(np.diag(r))
            scale = max(np.linalg.norm(b) for b in others)
            if np.any(diag < 1e-10 * scale):
                raise ValueError(
                    f"channels of users other than {k} are rank deficient; "
                    "zeroforcing directions are not defined")
            w = h - q @ (q.conj().T @ h)
        else:
            w = h.copy()
        nw = np.linalg.norm(w)
        if nw < 1e-10 * np.linalg.norm(h):
            dependents = [j for j in range(k_users) if j != k]
            raise ValueError(
                f"user {k}'s channel lies in the span of users {dependents}; "
                "cannot steer a null")
        ws.append(w / nw)
    return PrecoderSet(ws, PrecoderStrategy.ZEROFORCING)


def mu_gev(channels, noise_power: float) -> PrecoderSet:
    """Signal-to-leakage-plus-noise maximizing precoder per user.

    w_k is the dominant generalized eigenvector of (h_k h_k^H,
    sigma^2 I + sum_{j != k} h_j h_j^H). The leakage matrix is Hermitian
    positive definite, so the pair reduces by Cholesky factorization to an
    ordinary eigenproblem whose rank-one structure gives the dominant
    eigenvector in closed form (two triangular solves, no inversion).
    """
    if not noise_power > 0:
        raise ValueError("noise_power must be positive")
    hs = _validate_channels(channels)
    k_users = len(hs)
    n = hs[0].size
    ws = []
    for k, h in enumerate(hs):
        m = noise_power * np.eye(n, dtype=complex)
        for j in range(k_users):
            if j != k:
                m += np.outer(hs[j], hs[j].conj())
        low = np.linalg.cholesky(m)
        # Dominant eigenvector of L^-H h h^H L^-1 is g = L^-1 h (rank one);
        # transforming back gives w proportional to L^-H g.
        g = np.linalg.solve(low, h)
        w = np.linalg.solve(low.conj().T, g)
        ws.append(w / np.linalg.norm(w))
    return PrecoderSet(ws, PrecoderStrategy.GENERALIZED_EIGENVECTOR)


def slnr(w: np.ndarray, channels, k: int, noise_power: float) -> float:
    """Signal-to-leakage-plus-noise ratio of unit vector ``w`` for user k."""
    hs = _validate_channels(channels)
    sig = abs(np.vdot(hs[k], w)) ** 2
    leak = sum(abs(np.vdot(hs[j], w)) ** 2 for j in range(len(hs)) if j != k)
    return float(sig / (noise_power + leak))


def sum_rate(p: PrecoderSet, channels, noise_power: float) -> float:
    """Sum spectral efficiency in bps/Hz under single-stream-per-user SINRs."""
    hs = _validate_channels(channels)
    if len(p.weights) != len(hs):
        raise ValueError("precoder count must match user count")
    total = 0.0
    for k, h in enumerate(hs):
        sig = abs(np.vdot(h, p.weights[k])) ** 2
        interf = sum(abs(np.vdot(h, p.weights[j])) ** 2
                     for j in range(len(hs)) if j != k)
        total += math.log2(1.0 + sig / (noise_power + interf))
    return total


def quantized_sum_rate_loss(p: PrecoderSet, channels, noise_power: float,
                            n_bits: int = 4) -> tuple[PrecoderSet, float]:
    """Pass a precoder set through n-bit constant-modulus quantization.

    Returns the quantized set and the sum-rate loss in bps/Hz. The analog
    front end forces constant modulus, so amplitude structure is dropped
    and only phases survive; the loss is reported rather than hidden.
    """
    from .antenna import quantize_weights
    qs = []
    for w in p.weights:
        q = quantize_weights(w, n_bits).weights()
        qs.append(q / np.linalg.norm(q))
    qset = PrecoderSet(qs, p.strategy)
    return qset, sum_rate(p, channels, noise_power) - sum_rate(qset, channels, noise_power)
