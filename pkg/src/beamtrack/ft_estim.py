"""Fast-time operations repeated every FT-CPI.

Training-sequence generation, the per-cluster beam-aware LS channel estimator,
joint LS/MMSE baselines operating on the analog-stage output, intra-cluster
spatial matched filtering, and the digital cluster combiner.

Stacking convention: a block of per-symbol vectors v_1..v_n concatenates
symbol-major, [v_1; v_2; ...; v_n]; 2-D arrays use shape (n_symbols, dim) and
flat vectors are the same data raveled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamform import BeamformerSet
from .numerics import standard_complex_normal

TRAINING_ALPHABET = np.array([1.0 + 0j, 1j, -1.0 + 0j, -1j])

__all__ = [
    "EstimationError",
    "TrainingBlock",
    "IecEstimate",
    "gen_training",
    "receive_symbol",
    "ba_ls",
    "joint_ls",
    "joint_mmse",
    "ics_cmf",
    "dcc_align",
    "dcc_combine",
]


class EstimationError(RuntimeError):
    """Estimator preconditions violated (singular Gram matrix, zero estimate norm)."""


@dataclass
class TrainingBlock:
    """Per-cluster training sequences and the cluster delays mapping them to users."""

    sequences: np.ndarray  # (M, N_F), unit-modulus entries
    delays: list[int]

    @property
    def n_f(self) -> int:
        return self.sequences.shape[1]


@dataclass
class IecEstimate:
    """Instantaneous effective channel estimate for one cluster at one FT-CPI."""

    vector: np.ndarray
    cluster: int
    ft_index: int


def gen_training(n_f: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus 4-phase training sequence; (s^H s) = N_F exactly."""
    if n_f < 1:
        raise ValueError("n_f must be >= 1")
    return TRAINING_ALPHABET[rng.integers(0, 4, size=n_f)]


def _as_block(v: np.ndarray, dim: int, name: str) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim == 1:
        if v.size % dim != 0:
            raise ValueError(f"{name} length {v.size} not a multiple of dim {dim}")
        return v.reshape(-1, dim)
    if v.ndim == 2 and v.shape[1] == dim:
        return v
    raise ValueError(f"{name} has shape {v.shape}, expected (*, {dim})")


def receive_symbol(
    bf: BeamformerSet | None,
    channels,
    symbols: np.ndarray,
    powers: np.ndarray,
    noise: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """One received symbol through all three stages from a single noise draw.

    y = sum_m sqrt(E_m) h_m s_m + eta at the antennas, r = S^H y after the
    analog stage, z_m = W_m^H r after each digital stage. ``channels`` is a
    ChannelRealization or a plain list of per-cluster vectors. With
    ``bf=None`` (identity analog stage) r is y and no digital outputs are
    produced.
    """
    if hasattr(channels, "vectors"):
        channels = channels.vectors
    n = channels[0].shape[0]
    y = np.zeros(n, dtype=np.complex128)
    for h, s, e in zip(channels, symbols, powers):
        y += np.sqrt(e) * h * s
    if noise > 0:
        y = y + np.sqrt(noise) * standard_complex_normal(rng, n)
    if bf is None:
        return y, y, []
    r = bf.abf.conj().T @ y
    z = [w.conj().T @ r for w in bf.dbf]
    return y, r, z


def ba_ls(
    z_concat: np.ndarray,
    s: np.ndarray,
    power: float,
    n_f: int,
    d_m: int,
) -> np.ndarray:
    """Beam-aware LS estimate of the effective channel from one training block.

    h_hat = sum_n conj(s_n) z_n / (sqrt(E) N_F): a weighted accumulation over
    the N_F training symbols, O(N_F D_m) multiplies.
    """
    z = _as_block(z_concat, d_m, "z_concat")
    if z.shape[0] != n_f or s.shape[0] != n_f:
        raise ValueError("training length mismatch")
    return (s.conj() @ z) / (np.sqrt(power) * n_f)


def _sequence_gram(sequences: np.ndarray, powers: np.ndarray) -> np.ndarray:
    amp = np.sqrt(np.asarray(powers, dtype=float))
    g = sequences.conj() @ sequences.T
    return g * np.outer(amp, amp)


def joint_ls(
    r_concat: np.ndarray,
    sequences: np.ndarray,
    powers: np.ndarray,
) -> np.ndarray:
    """Joint LS estimate of all clusters' analog-stage channels, shape (M, R).

    The stacked regressor is [sqrt(E_1) s_1 ... sqrt(E_M) s_M] (x) I_R, so
    V^H V = G (x) I_R with G the M x M sequence Gram matrix; only G is inverted.
    """
    m = sequences.shape[0]
    dim = np.asarray(r_concat).size // sequences.shape[1]
    r = _as_block(r_concat, dim, "r_concat")
    amp = np.sqrt(np.asarray(powers, dtype=float))
    proj = (sequences.conj() @ r) * amp[:, None]  # (M, R) = V^H r by blocks
    gram = _sequence_gram(sequences, powers)
    try:
        return np.linalg.solve(gram, proj)
    except np.linalg.LinAlgError:
        raise EstimationError(f"singular {m}x{m} sequence Gram matrix") from None


def joint_mmse(
    r_concat: np.ndarray,
    sequences: np.ndarray,
    powers: np.ndarray,
    rbar_blocks: list[np.ndarray],
    noise: float,
) -> np.ndarray:
    """Joint MMSE estimate R V^H (V R V^H + N0 I)^-1 r, shape (M, R).

    The N_F R-size inverse is reduced to M R via the Woodbury identity in a
    factor form that never inverts the block prior: with R_m = B_m B_m^H,
    (V R V^H + N0 I)^-1 r = (r - U c) / N0 where U = V Gamma and c solves the
    M R-size system (N0 I + U^H U) c = U^H r. Rank-deficient priors are fine.
    """
    if noise <= 0:
        raise ValueError("noise must be > 0")
    m, n_f = sequences.shape
    dim = rbar_blocks[0].shape[0]
    r = _as_block(r_concat, dim, "r_concat")
    amp = np.sqrt(np.asarray(powers, dtype=float))

    # thin factors: drop numerically zero prior eigenvalues so the inner
    # system size tracks the effective prior rank, not M R
    factors = []
    for rb in rbar_blocks:
        w, v = np.linalg.eigh(0.5 * (rb + rb.conj().T))
        keep = w > 1e-14 * max(w[-1], 0.0)
        factors.append(v[:, keep] * np.sqrt(w[keep]))

    gram = _sequence_gram(sequences, powers)  # V^H V = gram (x) I_R
    t = (sequences.conj() @ r) * amp[:, None]  # blocks of V^H r, shape (M, R)
    c_vec = np.concatenate([factors[i].conj().T @ t[i] for i in range(m)])

    ranks = [f.shape[1] for f in factors]
    edges = np.concatenate([[0], np.cumsum(ranks)])
    total = int(edges[-1])
    inner = np.zeros((total, total), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            inner[edges[i] : edges[i + 1], edges[j] : edges[j + 1]] = (
                gram[i, j] * (factors[i].conj().T @ factors[j])
            )
    solved = np.linalg.solve(noise * np.eye(total) + inner, c_vec)
    correction = inner @ solved
    est = np.empty((m, dim), dtype=np.complex128)
    for i in range(m):
        block = c_vec[edges[i] : edges[i + 1]] - correction[edges[i] : edges[i + 1]]
        est[i] = factors[i] @ block / noise
    return est


def ics_cmf(estimate, z: np.ndarray) -> complex:
    """Matched filter on the digital-stage output: s_hat = h_hat^H z.

    ``estimate`` is the channel-estimate vector or an IecEstimate.
    """
    if isinstance(estimate, IecEstimate):
        estimate = estimate.vector
    if estimate.shape != z.shape:
        raise ValueError(f"shape mismatch {estimate.shape} vs {z.shape}")
    return complex(np.vdot(estimate, z))


def dcc_align(
    symbol_stream: np.ndarray,
    estimate: np.ndarray,
    power: float,
    delay: int,
) -> np.ndarray:
    """Delay/gain/phase-align one cluster's symbol estimates.

    b_tilde[n] = s_hat[n + delay] / (sqrt(E) h_hat^H h_hat); output is shorter
    by ``delay`` samples.
    """
    norm_sq = float(np.vdot(estimate, estimate).real)
    if norm_sq <= 0.0:
        raise EstimationError("zero channel-estimate norm in dcc_align")
    if delay < 0:
        raise ValueError("delay must be >= 0")
    shifted = symbol_stream[delay:] if delay else symbol_stream
    return shifted / (np.sqrt(power) * norm_sq)


def dcc_combine(
    aligned: list[np.ndarray],
    weights: np.ndarray,
    user_map: list[int],
) -> list[np.ndarray]:
    """Combine per-cluster aligned streams into per-user streams.

    ``weights[m, u]`` must vanish unless user_map[m] == u, and each user's
    weights must sum to 1 (unit signal coefficient).
    """
    weights = np.asarray(weights, dtype=float)
    m_clusters, n_users = weights.shape
    if len(aligned) != m_clusters or len(user_map) != m_clusters:
        raise ValueError("aligned streams / user_map / weights disagree on cluster count")
    for m in range(m_clusters):
        for u in range(n_users):
            if weights[m, u] != 0.0 and user_map[m] != u:
                raise ValueError(
                    f"weight ({m}, {u}) nonzero but cluster {m} belongs to user {user_map[m]}"
                )
    sums = weights.sum(axis=0)
    if not np.allclose(sums, 1.0, atol=1e-9):
        raise ValueError(f"per-user weights must sum to 1, got {sums}")
    n_common = min(len(a) for a in aligned)
    out = []
    for u in range(n_users):
        acc = np.zeros(n_common, dtype=np.complex128)
        for m in range(m_clusters):
            if weights[m, u] != 0.0:
                acc += weights[m, u] * aligned[m][:n_common]
        out.append(acc)
    return out
