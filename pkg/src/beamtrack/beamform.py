"""Beamformer construction: DFT analog stage, sector codebook, GEB digital stages.

Dimension bookkeeping through the receive chain is N (antennas) -> R (RF
chains, analog stage S) -> D_m (per-cluster digital combiner W^(m)), with total
per-cluster beamformer T^(m) = S W^(m).

DFT index convention: k = 1..N with spatial frequency phi_k = 2 pi k / N,
compared against steering frequencies pi sin(theta) on the principal branch
(-pi, pi]. Windows of consecutive indices wrap modulo N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import generalized_eig, hermitize, qr_orthonormalize

__all__ = [
    "ClusterCollisionError",
    "BeamformerSet",
    "SectorCodebook",
    "dft_basis",
    "principal_frequency",
    "wrap_angle",
    "build_abf",
    "sector_codebook",
    "sector_matrix",
    "sector_support",
    "approx_reduced_ccms",
    "rd_geb",
    "fd_geb",
    "dft_bf",
    "mmse_bf",
]


class ClusterCollisionError(RuntimeError):
    """Two clusters demanded the same DFT index; the realization must stop."""


@dataclass
class BeamformerSet:
    """Analog stage, per-cluster index windows, and per-cluster digital stages.

    Columns of ``abf`` are cluster-major: cluster m owns columns
    m*(R/M) .. (m+1)*(R/M)-1, in the order of its ``dft_indices`` window.
    """

    abf: np.ndarray  # N x R, orthonormal columns
    dft_indices: list[list[int]]  # per cluster, 1-based DFT indices
    dbf: list[np.ndarray] = field(default_factory=list)  # per cluster, R x D_m
    total: list[np.ndarray] = field(default_factory=list)  # per cluster, N x D_m

    @property
    def n_antennas(self) -> int:
        return self.abf.shape[0]

    @property
    def n_rfc(self) -> int:
        return self.abf.shape[1]

    @property
    def n_clusters(self) -> int:
        return len(self.dft_indices)

    def attach_dbf(self, dbf: list[np.ndarray]) -> "BeamformerSet":
        self.dbf = list(dbf)
        self.total = [self.abf @ w for w in self.dbf]
        return self

    def cluster_columns(self, m: int) -> np.ndarray:
        w = self.n_rfc // self.n_clusters
        return np.arange(m * w, (m + 1) * w)


def dft_basis(k: int, n_antennas: int) -> np.ndarray:
    """k-th DFT basis vector u(phi_k), phi_k = 2 pi k / N, k in 1..N."""
    if not 1 <= k <= n_antennas:
        raise IndexError(f"DFT index {k} outside 1..{n_antennas}")
    phi = 2.0 * np.pi * k / n_antennas
    return np.exp(1j * phi * np.arange(n_antennas)) / np.sqrt(n_antennas)


def wrap_angle(x: np.ndarray | float) -> np.ndarray | float:
    """Map angles to the principal branch (-pi, pi]."""
    return x - 2.0 * np.pi * np.ceil((np.asarray(x) - np.pi) / (2.0 * np.pi))


def principal_frequency(k: np.ndarray | int, n_antennas: int) -> np.ndarray | float:
    """Spatial frequency of DFT index k on the principal branch."""
    return wrap_angle(2.0 * np.pi * np.asarray(k) / n_antennas)


def _window_indices(start: int, width: int, n: int) -> list[int]:
    return [((start - 1 + r) % n) + 1 for r in range(width)]


def build_abf(
    aoa_estimates: np.ndarray,
    n_antennas: int,
    n_rfc: int,
) -> BeamformerSet:
    """Select per-cluster windows of consecutive DFT indices and assemble S.

    Each cluster independently gets the R/M-wide window minimizing the summed
    principal-branch distance between its DFT frequencies and pi sin(aoa);
    ties break toward the lower starting index. Overlapping windows across
    clusters raise ClusterCollisionError.
    """
    aoa_estimates = np.atleast_1d(np.asarray(aoa_estimates, dtype=float))
    m_clusters = aoa_estimates.size
    if n_rfc % m_clusters != 0:
        raise ValueError(f"n_rfc {n_rfc} not divisible by {m_clusters} clusters")
    if np.any(np.abs(aoa_estimates) >= 0.5 * np.pi):
        raise ValueError("aoa estimates must lie inside (-pi/2, pi/2)")
    width = n_rfc // m_clusters
    psi = principal_frequency(np.arange(1, n_antennas + 1), n_antennas)

    windows: list[list[int]] = []
    for theta in aoa_estimates:
        target = np.pi * np.sin(theta)
        dist = np.abs(wrap_angle(psi - target))
        best_cost, best_start = np.inf, 0
        for start in range(1, n_antennas + 1):
            idx = [(start - 1 + r) % n_antennas for r in range(width)]
            cost = dist[idx].sum()
            if cost < best_cost - 1e-15:
                best_cost, best_start = cost, start
        windows.append(_window_indices(best_start, width, n_antennas))

    seen: dict[int, int] = {}
    for m, win in enumerate(windows):
        for k in win:
            if k in seen:
                raise ClusterCollisionError(
                    f"clusters {seen[k]} and {m} both selected DFT index {k}"
                )
            seen[k] = m

    columns = [dft_basis(k, n_antennas) for win in windows for k in win]
    s_mat = np.stack(columns, axis=1)
    return BeamformerSet(abf=s_mat, dft_indices=windows)


def sector_matrix(k: int, n_antennas: int) -> np.ndarray:
    """Sector covariance C_k in closed form: (C_k)_{ab} = e^{j(a-b)phi_k} sinc((a-b)/N) / N."""
    if not 1 <= k <= n_antennas:
        raise IndexError(f"DFT index {k} outside 1..{n_antennas}")
    n = n_antennas
    phi = 2.0 * np.pi * k / n
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    return hermitize(np.exp(1j * phi * diff) * np.sinc(diff / n) / n)


@dataclass
class SectorCodebook:
    """Covariance codebook {C_k} tiling the DFT circle; sum_k C_k = I_N."""

    matrices: list[np.ndarray]

    @property
    def n_antennas(self) -> int:
        return len(self.matrices)

    def __getitem__(self, k: int) -> np.ndarray:
        # 1-based per the DFT index convention
        if not 1 <= k <= len(self.matrices):
            raise IndexError(f"DFT index {k} outside 1..{len(self.matrices)}")
        return self.matrices[k - 1]


def sector_codebook(n_antennas: int) -> SectorCodebook:
    return SectorCodebook([sector_matrix(k, n_antennas) for k in range(1, n_antennas + 1)])


def sector_support(indices: list[int], n_antennas: int) -> tuple[float, float]:
    """Angular interval covered by a window of consecutive DFT sectors.

    Each index k covers spatial frequencies phi_k +/- pi/N; the union of a
    consecutive window is contiguous. Returned as (theta_lo, theta_hi), clipped
    to the ULA field of view.
    """
    n = n_antennas
    psi0 = float(principal_frequency(indices[0], n))
    lo = psi0 - np.pi / n
    hi = psi0 + (len(indices) - 1) * 2.0 * np.pi / n + np.pi / n
    lo_s = np.clip(lo / np.pi, -1.0, 1.0)
    hi_s = np.clip(hi / np.pi, -1.0, 1.0)
    return float(np.arcsin(lo_s)), float(np.arcsin(hi_s))


def approx_reduced_ccms(
    bf: BeamformerSet,
    codebook: SectorCodebook | None,
    powers: np.ndarray,
    noise: float,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Codebook-approximated reduced CCM per cluster and the reduced total covariance.

    rbar_m = S^H ((M/R) sum_{k in window_m} C_k) S,
    psibar = sum_m E_m rbar_m + N0 I_R.
    """
    if not bf.dft_indices:
        raise ValueError("BeamformerSet has no DFT index windows")
    n = bf.n_antennas
    scale = bf.n_clusters / bf.n_rfc
    rbars = []
    for win in bf.dft_indices:
        c_sum = np.zeros((n, n), dtype=np.complex128)
        for k in win:
            c_sum += codebook[k] if codebook is not None else sector_matrix(k, n)
        rbars.append(hermitize(bf.abf.conj().T @ (scale * c_sum) @ bf.abf))
    psibar = noise * np.eye(bf.n_rfc, dtype=np.complex128)
    for e, rbar in zip(powers, rbars):
        psibar = psibar + e * rbar
    return rbars, hermitize(psibar)


def rd_geb(rbar: np.ndarray, psibar: np.ndarray, d_m: int) -> np.ndarray:
    """Top-d_m generalized eigenvectors of (rbar, psibar), QR-orthonormalized."""
    if not 1 <= d_m <= rbar.shape[0]:
        raise ValueError(f"d_m must be in [1, {rbar.shape[0]}], got {d_m}")
    _, vecs = generalized_eig(rbar, psibar)
    return qr_orthonormalize(vecs[:, :d_m])


def fd_geb(r_full: np.ndarray, psi_full: np.ndarray, d_m: int) -> np.ndarray:
    """Full-dimensional variant of rd_geb; the pair lives at dimension N."""
    return rd_geb(r_full, psi_full, d_m)


def dft_bf(bf: BeamformerSet, m: int) -> np.ndarray:
    """Selection DBF (ones and zeros) picking cluster m's own RF chains."""
    if not bf.dft_indices:
        raise ValueError("BeamformerSet has no DFT index windows")
    width = bf.n_rfc // bf.n_clusters
    w = np.zeros((bf.n_rfc, width))
    for r, row in enumerate(bf.cluster_columns(m)):
        w[row, r] = 1.0
    return w


def mmse_bf(scaled_channels: np.ndarray, noise: float, m: int) -> np.ndarray:
    """Linear MMSE symbol combiner (H H^H + N0 I)^-1 h_m for unit-variance symbols.

    ``scaled_channels`` columns are sqrt(E_m') h_m' so the Gram term is the
    signal covariance. Single-column combiner; deliberately not orthonormalized.
    """
    if noise <= 0:
        raise ValueError("noise must be > 0 for the MMSE combiner")
    h = np.asarray(scaled_channels, dtype=np.complex128)
    gram = h @ h.conj().T + noise * np.eye(h.shape[0], dtype=np.complex128)
    w = np.linalg.solve(gram, h[:, m])
    return w[:, None]
