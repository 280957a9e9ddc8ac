"""Slow-time AoA trackers running once per ST-CPI.

All four trackers consume quantities gathered during the preceding block of P
fast-time intervals: the parametric batch ML estimator and the statistical EKF
use the per-cluster effective-channel estimates, the modified OMP uses the raw
analog-stage training observations, and the periodogram uses the power at the
cluster's own RF chains.

The parametric reduced covariance model R(theta) ~= E(theta) E(theta)^H with
E(theta) = T^H diag(a(theta)) E_fd links them to the channel module's low-rank
kernel basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import LowRankBasis, steering_block, steering_vector
from .numerics import hermitize

__all__ = [
    "AngleGrid",
    "TrackerState",
    "make_grid",
    "r_theta",
    "ba_ml",
    "sekf_observe",
    "sekf_noise_cov",
    "sekf_jacobian",
    "sekf_update",
    "build_omp_dictionary",
    "omp_track",
    "periodogram_track",
]


@dataclass
class AngleGrid:
    """Strictly increasing search angles confined to a cluster's beam coverage."""

    angles: np.ndarray  # radians
    resolution: float  # radians

    def __post_init__(self) -> None:
        if self.angles.size < 1:
            raise ValueError("empty angle grid")
        if self.angles.size > 1 and not np.all(np.diff(self.angles) > 0):
            raise ValueError("grid angles must be strictly increasing")

    @property
    def lo(self) -> float:
        return float(self.angles[0])

    @property
    def hi(self) -> float:
        return float(self.angles[-1])


def make_grid(theta_lo: float, theta_hi: float, resolution: float) -> AngleGrid:
    """Grid of integer multiples of ``resolution`` inside [theta_lo, theta_hi]."""
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    k_lo = int(np.ceil(theta_lo / resolution - 1e-9))
    k_hi = int(np.floor(theta_hi / resolution + 1e-9))
    if k_hi < k_lo:
        angles = np.array([0.5 * (theta_lo + theta_hi)])
    else:
        angles = resolution * np.arange(k_lo, k_hi + 1)
    return AngleGrid(angles=angles, resolution=resolution)


@dataclass
class TrackerState:
    """Per-cluster slow-time tracker state.

    ``aoa_estimate`` is the angle recorded for metrics. The SEKF additionally
    carries filtered (k|k) and predicted (k+1|k) mean/covariance; the predicted
    angle is what beamformer construction consumes.
    """

    kind: str
    aoa_estimate: float
    x_filt: np.ndarray | None = None
    cov_filt: np.ndarray | None = None
    x_pred: np.ndarray | None = None
    cov_pred: np.ndarray | None = None
    ill_conditioned: bool = False
    clamped: bool = False
    imag_residual: float = 0.0
    extra: dict = field(default_factory=dict)


def _batch_array(batch) -> np.ndarray:
    """Accept a (P, D) array or a list of per-interval estimate objects."""
    if isinstance(batch, np.ndarray):
        return batch
    rows = [b.vector if hasattr(b, "vector") else np.asarray(b) for b in batch]
    return np.stack(rows) if rows else np.zeros((0, 0), dtype=complex)


def r_theta(
    theta: float,
    total_bf: np.ndarray,
    basis: LowRankBasis,
) -> tuple[np.ndarray, np.ndarray]:
    """Parametric reduced covariance at ``theta``: (R(theta), E(theta)).

    E(theta) = T^H diag(a(theta)) E_fd, applied as an O(N * rank) elementwise
    scaling of the stored kernel basis; R(theta) = E E^H.
    """
    n = total_bf.shape[0]
    a = steering_vector(theta, n) * np.sqrt(n)  # bare phases: diag(a) absorbs the 1/sqrt(N)
    scaled = (a[:, None] * basis.efd) / np.sqrt(n)
    e_mat = total_bf.conj().T @ scaled
    return hermitize(e_mat @ e_mat.conj().T), e_mat


def _projector_complement(e_mat: np.ndarray) -> np.ndarray:
    """M(theta) = I - E (E^H E)^-1 E^H for a full-column-rank E."""
    d = e_mat.shape[0]
    gram = e_mat.conj().T @ e_mat
    proj = e_mat @ np.linalg.solve(gram, e_mat.conj().T)
    return np.eye(d) - proj


def ba_ml(
    batch: np.ndarray,
    grid: AngleGrid,
    total_bf: np.ndarray,
    basis_reduced: LowRankBasis,
) -> float:
    """Batch ML angle estimate: argmin over the grid of tr(M(theta) sum_p h h^H).

    The sample accumulation is computed once per batch; ``basis_reduced`` must
    be strictly thinner than the digital stage (rank < D_m) so the reduced
    model is overdetermined.
    """
    batch = _batch_array(batch)
    if batch.ndim != 2 or batch.shape[0] < 1:
        raise ValueError("batch must be a nonempty (P, D_m) array")
    d_m = batch.shape[1]
    if basis_reduced.rank >= d_m:
        raise ValueError(
            f"reduced rank {basis_reduced.rank} must be < digital dimension {d_m}"
        )
    acc = batch.T @ batch.conj()  # sum_p h h^H
    total = float(np.trace(acc).real)
    best_val, best_theta = np.inf, grid.angles[0]
    for theta in grid.angles:
        _, e_mat = r_theta(float(theta), total_bf, basis_reduced)
        gram = e_mat.conj().T @ e_mat
        proj = e_mat @ np.linalg.solve(gram, e_mat.conj().T)
        val = total - float(np.sum(proj * acc.T).real)  # tr(M acc) = tr(acc) - tr(P acc)
        if val < best_val - 1e-15:
            best_val, best_theta = val, float(theta)
    return best_theta


def sekf_observe(batch: np.ndarray) -> np.ndarray:
    """Column-major vec of the sample-mean covariance (1/P) sum_p h h^H."""
    batch = np.asarray(batch)
    if batch.ndim != 2 or batch.shape[0] < 1:
        raise ValueError("batch must be a nonempty (P, D_m) array")
    c = (batch.T @ batch.conj()) / batch.shape[0]
    return c.reshape(-1, order="F")


def sekf_noise_cov(r_f: np.ndarray, p_count: int) -> np.ndarray:
    """Observation-error covariance (1/P) conj(R_f) kron R_f (complex Gaussian channel)."""
    if p_count < 1:
        raise ValueError("p_count must be >= 1")
    return np.kron(r_f.conj(), r_f) / p_count


def sekf_jacobian(
    theta_pred: float,
    total_bf: np.ndarray,
    basis: LowRankBasis,
    step: float = 1e-5,
) -> np.ndarray:
    """Jacobian of vec(R_f) w.r.t. the state, central finite difference in theta.

    The velocity column is exactly zero (the observation model is angle-only
    under the slow-time coherence assumption). The additive noise diagonal in
    R_f is constant and drops out of the derivative.
    """
    r_plus, _ = r_theta(theta_pred + step, total_bf, basis)
    r_minus, _ = r_theta(theta_pred - step, total_bf, basis)
    d_vec = (r_plus - r_minus).reshape(-1, order="F") / (2.0 * step)
    jac = np.zeros((d_vec.size, 2), dtype=np.complex128)
    jac[:, 0] = d_vec
    return jac


def _floor_psd(sigma: np.ndarray) -> np.ndarray:
    sigma = 0.5 * (sigma + sigma.T)
    w, v = np.linalg.eigh(sigma)
    return (v * np.clip(w, 0.0, None)) @ v.T


def sekf_update(
    state: TrackerState,
    observation: np.ndarray,
    q: np.ndarray,
    jac: np.ndarray,
    st_model: tuple[np.ndarray, np.ndarray],
    r_f_pred: np.ndarray,
    cond_limit: float = 1e12,
    coverage: tuple[float, float] | None = None,
) -> TrackerState:
    """One EKF cycle: gain, filtered mean/covariance, and slow-time prediction.

    The state is real; the complex innovation K (f - vec(R_f)) is collapsed to
    its real part (its imaginary residue is conjugate-symmetry rounding noise,
    tracked in ``imag_residual``). If the gain-equation inverse is
    ill-conditioned the update is skipped and only the prediction is applied,
    with ``ill_conditioned`` set. Covariances are symmetrized and eigenvalue-
    floored at zero after every step.
    """
    a_st, sigma_nu_st = st_model
    x_pred = np.asarray(state.x_pred, dtype=float)
    cov_pred = np.asarray(state.cov_pred, dtype=float)

    innovation_cov = jac @ cov_pred @ jac.conj().T + q
    ill = not np.all(np.isfinite(innovation_cov.view(np.float64))) or (
        np.linalg.cond(innovation_cov) > cond_limit
    )
    imag_residual = 0.0
    if ill:
        x_filt, cov_filt = x_pred.copy(), cov_pred.copy()
    else:
        gain = cov_pred @ jac.conj().T @ np.linalg.inv(innovation_cov)
        innovation = observation - r_f_pred.reshape(-1, order="F")
        update = gain @ innovation
        scale = max(float(np.max(np.abs(update.real))), 1e-300)
        imag_residual = float(np.max(np.abs(update.imag))) / scale
        x_filt = x_pred + update.real
        cov_filt = _floor_psd(cov_pred - np.real(gain @ jac) @ cov_pred)

    clamped = False
    if coverage is not None:
        lo, hi = coverage
        if not lo <= x_filt[0] <= hi:
            x_filt = x_filt.copy()
            x_filt[0] = float(np.clip(x_filt[0], lo, hi))
            clamped = True

    x_next = a_st @ x_filt
    cov_next = _floor_psd(a_st @ cov_filt @ a_st.T + sigma_nu_st)
    if coverage is not None:
        lo, hi = coverage
        if not lo <= x_next[0] <= hi:
            x_next = x_next.copy()
            x_next[0] = float(np.clip(x_next[0], lo, hi))
            clamped = True

    return TrackerState(
        kind="sekf",
        aoa_estimate=float(x_filt[0]),
        x_filt=x_filt,
        cov_filt=cov_filt,
        x_pred=x_next,
        cov_pred=cov_next,
        ill_conditioned=ill,
        clamped=clamped,
        imag_residual=imag_residual,
    )


def build_omp_dictionary(
    abf: np.ndarray,
    sequences: np.ndarray,
    grids: list[AngleGrid],
    powers: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sparse-recovery dictionary over all clusters' search grids.

    Column for (cluster m, angle theta) is sqrt(E_m) (s_m kron S^H a(theta)),
    matching the symbol-major stacking of the training observations. Returns
    (G, cluster_of_column, theta_of_column).
    """
    n = abf.shape[0]
    n_f = sequences.shape[1]
    r_dim = abf.shape[1]
    blocks, owners, thetas = [], [], []
    for m, grid in enumerate(grids):
        proj = abf.conj().T @ steering_block(grid.angles, n).T  # (R, n_g)
        block = np.sqrt(powers[m]) * (
            sequences[m][:, None, None] * proj[None, :, :]
        ).reshape(n_f * r_dim, -1)
        blocks.append(block)
        owners.append(np.full(grid.angles.size, m))
        thetas.append(grid.angles)
    return (
        np.concatenate(blocks, axis=1),
        np.concatenate(owners),
        np.concatenate(thetas),
    )


def omp_track(
    f_matrix: np.ndarray,
    dictionary: np.ndarray,
    cluster_of: np.ndarray,
    theta_of: np.ndarray,
    reg: float = 1e-10,
) -> tuple[np.ndarray, dict]:
    """Modified orthogonal matching pursuit over a slow-time batch.

    Greedy column selection by total row energy ||G_c^H F_res||^2 (the weight
    matrix is row-sparse across the batch), first selection per cluster fixes
    that cluster's angle, and the residual is jointly deflated against all
    selected columns. Terminates once every cluster is assigned.
    """
    n_clusters = int(cluster_of.max()) + 1
    residual = f_matrix
    unassigned = set(range(n_clusters))
    estimates = np.full(n_clusters, np.nan)
    selected: list[int] = []
    regularized = False

    max_iter = dictionary.shape[1]
    iterations = 0
    while unassigned:
        if iterations >= max_iter:  # defensive; the deflation zeroes used columns
            for m in unassigned:
                own = np.flatnonzero(cluster_of == m)
                estimates[m] = theta_of[own[own.size // 2]]
            break
        iterations += 1
        corr = dictionary.conj().T @ residual
        energy = np.sum(np.abs(corr) ** 2, axis=1)
        c = int(np.argmax(energy))
        owner = int(cluster_of[c])
        if owner in unassigned:
            unassigned.discard(owner)
            estimates[owner] = theta_of[c]
        selected.append(c)
        sub = dictionary[:, selected]
        gram = sub.conj().T @ sub
        rhs = sub.conj().T @ f_matrix
        try:
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            regularized = True
            coef = np.linalg.solve(gram + reg * np.eye(gram.shape[0]), rhs)
        residual = f_matrix - sub @ coef

    info = {"iterations": iterations, "regularized": regularized, "selected": selected}
    return estimates, info


def periodogram_track(
    z_batch: np.ndarray,
    s_tilde: np.ndarray,
    grid: AngleGrid,
) -> float:
    """Peak of rho(theta) = sum_samples |a(theta)^H S_tilde z|^2 over the grid.

    ``z_batch`` is either the raw (n_samples, R/M) sample stack or an already
    accumulated (R/M, R/M) sample covariance sum.
    """
    z_batch = np.asarray(z_batch)
    w = s_tilde.shape[1]
    if z_batch.ndim == 2 and z_batch.shape == (w, w) and np.allclose(
        z_batch, z_batch.conj().T
    ):
        cov = z_batch
    else:
        cov = z_batch.T @ z_batch.conj()
    n = s_tilde.shape[0]
    v = s_tilde.conj().T @ steering_block(grid.angles, n).T  # (w, n_g)
    spectrum = np.einsum("wg,wv,vg->g", v.conj(), cov, v).real
    return float(grid.angles[int(np.argmax(spectrum))])
