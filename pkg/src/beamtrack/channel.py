"""Ground-truth channel physics for a ULA uplink with mobile signal clusters.

Covers steering vectors, ray-based channel draws, exact (quadrature) and
sinc-form cluster covariance matrices, the low-rank kernel basis used by the
parametric trackers, and the linear-Gaussian mobility process with its
slow-time aggregation.

All angles are radians here; degrees exist only at the config/report boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericsError, gauss_legendre_nodes, hermitize, standard_complex_normal

HALF_PI = 0.5 * np.pi

__all__ = [
    "ChannelGeometryError",
    "ClusterTruth",
    "MobilityModel",
    "ChannelRealization",
    "LowRankBasis",
    "steering_vector",
    "steering_block",
    "steering_gram",
    "ray_offsets",
    "draw_channel",
    "cluster_ccm",
    "sinc_ccm",
    "lowrank_basis",
    "total_covariance",
    "advance_mobility",
    "mobility_path",
    "st_transition",
]


class ChannelGeometryError(ValueError):
    """Cluster interval leaves the ULA's unambiguous (-pi/2, pi/2) field of view."""


@dataclass
class ClusterTruth:
    """Ground-truth description of one signal cluster."""

    mean_aoa: float  # radians
    angular_velocity: float = 0.0  # radians / second
    angular_spread: float = np.deg2rad(3.0)  # radians
    power: float = 1.0  # linear
    delay: int = 0  # symbols
    user_id: int = 0

    def __post_init__(self) -> None:
        if not abs(self.mean_aoa) < HALF_PI:
            raise ChannelGeometryError(f"|mean_aoa| must be < pi/2, got {self.mean_aoa}")
        if self.angular_spread <= 0:
            raise ValueError("angular_spread must be > 0")
        if self.power <= 0:
            raise ValueError("power must be > 0")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")


@dataclass
class MobilityModel:
    """x_{p+1} = A x_p + nu with A = [[1, T_F], [0, 1]] and diagonal innovation."""

    ft_duration: float  # seconds per fast-time interval
    sigma_theta_sq: float  # rad^2
    sigma_omega_sq: float  # (rad/s)^2

    @property
    def transition(self) -> np.ndarray:
        return np.array([[1.0, self.ft_duration], [0.0, 1.0]])

    @property
    def innovation_cov(self) -> np.ndarray:
        return np.diag([self.sigma_theta_sq, self.sigma_omega_sq])

    def __post_init__(self) -> None:
        if self.ft_duration < 0 or self.sigma_theta_sq < 0 or self.sigma_omega_sq < 0:
            raise ValueError("mobility model parameters must be nonnegative")


@dataclass
class ChannelRealization:
    """Per-cluster channel vectors drawn for one fast-time interval."""

    vectors: list[np.ndarray]
    ft_index: int = 0


@dataclass
class LowRankBasis:
    """Truncated eigenbasis of the sinc covariance kernel D (built at theta = 0).

    ``efd`` columns are sqrt(lambda_d) * e_d, so efd @ efd^H approximates D with
    Frobenius error bounded by the sum of the discarded eigenvalues.
    """

    d_matrix: np.ndarray
    efd: np.ndarray
    rank: int
    eigenvalues: np.ndarray = field(repr=False, default=None)

    def truncated(self, rank: int) -> "LowRankBasis":
        if not 1 <= rank <= self.efd.shape[1]:
            raise ValueError(f"rank {rank} outside stored basis of rank {self.efd.shape[1]}")
        return LowRankBasis(self.d_matrix, self.efd[:, :rank], rank, self.eigenvalues)


def steering_vector(theta: float, n_antennas: int) -> np.ndarray:
    """Unit-norm ULA steering vector, entry k = exp(j pi k sin(theta)) / sqrt(N)."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    phases = np.pi * np.sin(theta) * np.arange(n_antennas)
    return np.exp(1j * phases) / np.sqrt(n_antennas)


def steering_block(thetas: np.ndarray, n_antennas: int) -> np.ndarray:
    """Stack of steering vectors, shape (len(thetas), n_antennas)."""
    thetas = np.asarray(thetas, dtype=float)
    phases = np.pi * np.sin(thetas)[..., None] * np.arange(n_antennas)
    return np.exp(1j * phases) / np.sqrt(n_antennas)


def steering_gram(psi: np.ndarray, thetas: np.ndarray, n_antennas: int) -> np.ndarray:
    """Exact inner products u(psi)^H a(theta) for DFT vectors u, shape (*thetas, len(psi)).

    Evaluated through the closed-form geometric sum (w^N - 1) / (N (w - 1))
    with w = e^{j(pi sin(theta) - psi)}, which is separable: one complex
    exponential pair per theta and per psi instead of an N-term sum. This is
    the hot kernel of the simulator, kept to two broadcast products and one
    division per entry.
    """
    n = n_antennas
    psi = np.asarray(psi, dtype=float)
    s = np.pi * np.sin(np.asarray(thetas, dtype=float))
    out_shape = s.shape + psi.shape
    s = s.reshape(-1, 1)
    p = psi.reshape(1, -1)

    w = np.exp(1j * s) * np.exp(-1j * p)
    w_n = np.exp(1j * n * s) * np.exp(-1j * n * p)
    den = w - 1.0
    num = w_n - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / (n * den)
    # w -> 1 limit (steering frequency on a DFT bin): the sum is exactly N.
    degenerate = np.abs(den) < 1e-9
    if degenerate.any():
        out[degenerate] = 1.0
    return out.reshape(out_shape)


def ray_offsets(spread: float, n_rays: int) -> np.ndarray:
    """Deterministic equispaced ray offsets with midpoint placement across the spread."""
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    return -0.5 * spread + (np.arange(n_rays) + 0.5) * spread / n_rays


def _check_interval(theta: float, spread: float) -> None:
    if not (-HALF_PI < theta - 0.5 * spread and theta + 0.5 * spread < HALF_PI):
        raise ChannelGeometryError(
            f"cluster interval ({theta - spread / 2:.4f}, {theta + spread / 2:.4f}) rad "
            "crosses +/- pi/2"
        )


def draw_channel(
    cluster: ClusterTruth,
    n_antennas: int,
    n_rays: int,
    rng: np.random.Generator,
    placement: str = "grid",
) -> np.ndarray:
    """One ray-based channel draw h = sum_l alpha_l a(theta_l) / sqrt(L).

    Gains are i.i.d. CN(0, 1); ray angles are the deterministic equispaced grid
    across the cluster interval (``placement="random"`` draws them uniformly
    instead). E||h||^2 = 1 by construction.
    """
    _check_interval(cluster.mean_aoa, cluster.angular_spread)
    if placement == "grid":
        angles = cluster.mean_aoa + ray_offsets(cluster.angular_spread, n_rays)
    elif placement == "random":
        angles = cluster.mean_aoa + cluster.angular_spread * (rng.random(n_rays) - 0.5)
    else:
        raise ValueError(f"unknown ray placement {placement!r}")
    gains = standard_complex_normal(rng, n_rays)
    a = steering_block(angles, n_antennas)
    return (gains @ a) / np.sqrt(n_rays)


def cluster_ccm(theta: float, spread: float, n_antennas: int, nodes: int = 257) -> np.ndarray:
    """Exact cluster covariance (1/spread) * integral of a(t) a(t)^H over the interval.

    Gauss-Legendre quadrature; unit trace by construction (steering vectors are
    unit norm and the weights sum to the interval length).
    """
    if spread <= 0:
        raise ValueError("spread must be > 0")
    _check_interval(theta, spread)
    x, w = gauss_legendre_nodes(theta - 0.5 * spread, theta + 0.5 * spread, nodes)
    a = steering_block(x, n_antennas)
    r = (a * w[:, None]).T @ a.conj() / spread
    return hermitize(r)


def _sinc_kernel(spread: float, n_antennas: int, d_theta: float = 0.0) -> np.ndarray:
    idx = np.arange(n_antennas)
    diff = idx[:, None] - idx[None, :]
    return np.sinc(diff * np.cos(d_theta) * np.sin(0.5 * spread))


def sinc_ccm(
    theta: float,
    spread: float,
    n_antennas: int,
    d_theta: float = 0.0,
) -> np.ndarray:
    """Sinc-form covariance diag(a(theta)) D diag(a(theta))^H with kernel D.

    D is evaluated at ``d_theta`` (0 by default: the kernel's theta dependence
    through cos(theta) sin(spread/2) is weak and neglected). Diagonal entries
    are exactly 1/N; theta = 0 returns D / N itself.
    """
    _check_interval(theta, spread)
    d = _sinc_kernel(spread, n_antennas, d_theta)
    phases = np.exp(1j * np.pi * np.sin(theta) * np.arange(n_antennas))
    return hermitize((phases[:, None] * phases.conj()[None, :]) * d / n_antennas)


def lowrank_basis(spread: float, n_antennas: int, rank: int) -> LowRankBasis:
    """Top-``rank`` eigenpairs of the sinc kernel D, columns scaled by sqrt(lambda)."""
    if not 1 <= rank <= n_antennas:
        raise ValueError(f"rank must be in [1, {n_antennas}], got {rank}")
    d = _sinc_kernel(spread, n_antennas)
    w, v = np.linalg.eigh(d)
    w, v = w[::-1], v[:, ::-1]
    efd = v[:, :rank] * np.sqrt(np.clip(w[:rank], 0.0, None))
    return LowRankBasis(d_matrix=d, efd=efd, rank=rank, eigenvalues=w)


def total_covariance(
    ccms: list[np.ndarray], powers: list[float], noise: float
) -> np.ndarray:
    """Total receive covariance sum_m E_m R_m + N0 I."""
    if len(ccms) != len(powers) or not ccms:
        raise NumericsError("ccms and powers must be nonempty and matched")
    dim = ccms[0].shape[0]
    psi = noise * np.eye(dim, dtype=np.complex128)
    for r, e in zip(ccms, powers):
        if r.shape != (dim, dim):
            raise NumericsError(f"covariance shape {r.shape} does not match dim {dim}")
        if e <= 0:
            raise ValueError("cluster powers must be > 0")
        psi = psi + e * r
    return hermitize(psi)


def advance_mobility(
    state: np.ndarray, model: MobilityModel, rng: np.random.Generator
) -> np.ndarray:
    """One fast-time step of the state equation x' = A x + nu."""
    state = np.asarray(state, dtype=float)
    noise = rng.standard_normal(2) * np.sqrt(
        [model.sigma_theta_sq, model.sigma_omega_sq]
    )
    return model.transition @ state + noise


def mobility_path(
    state: np.ndarray, model: MobilityModel, steps: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized mobility recursion over a block of fast-time intervals.

    Returns ``(path, final)`` where ``path[i]`` is the state at the i-th
    interval of the block (``path[0]`` is the input state) and ``final`` is the
    state after ``steps`` advances, i.e. the head of the next block. Consumes
    exactly ``steps`` innovation pairs.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    state = np.asarray(state, dtype=float)
    nu = rng.standard_normal((steps, 2)) * np.sqrt(
        [model.sigma_theta_sq, model.sigma_omega_sq]
    )
    t_f = model.ft_duration
    omega = np.empty(steps + 1)
    omega[0] = state[1]
    omega[1:] = state[1] + np.cumsum(nu[:, 1])
    theta = np.empty(steps + 1)
    theta[0] = state[0]
    theta[1:] = state[0] + t_f * np.cumsum(omega[:-1]) + np.cumsum(nu[:, 0])
    path = np.stack([theta[:steps], omega[:steps]], axis=1)
    return path, np.array([theta[steps], omega[steps]])


def st_transition(model: MobilityModel, p_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Slow-time aggregation (A^P, sum_{i=1..P} A^i Sigma (A^i)^T), in closed form."""
    if p_count < 1:
        raise ValueError("p_count must be >= 1")
    p = p_count
    t_f = model.ft_duration
    a_st = np.array([[1.0, p * t_f], [0.0, 1.0]])
    sum_i = p * (p + 1) / 2.0
    sum_i2 = p * (p + 1) * (2 * p + 1) / 6.0
    s_tt = p * model.sigma_theta_sq + t_f**2 * model.sigma_omega_sq * sum_i2
    s_tw = t_f * model.sigma_omega_sq * sum_i
    s_ww = p * model.sigma_omega_sq
    return a_st, np.array([[s_tt, s_tw], [s_tw, s_ww]])
