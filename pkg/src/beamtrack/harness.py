"""Two-timescale Monte-Carlo engine.

A realization advances cluster mobility every FT-CPI, runs the fast-time
receive/estimation chain, and invokes beam tracking plus beamformer
reconstruction once per ST-CPI (P FT-CPIs). Trials are independent
realizations with Philox substreams keyed by (seed, trial), so results are
bit-identical for any worker count.

The fast-time chain runs block-vectorized per ST-CPI. Post-analog noise is
drawn directly at the RF-chain dimension (exact for an orthonormal analog
stage) and per-cluster channels are projected with the closed-form Dirichlet
kernel instead of synthesizing the antenna-dimension channel; both are
algebraically identical to the staged chain for the same draws.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from . import beamform, channel, ft_estim, metrics, tracking
from .beamform import BeamformerSet, ClusterCollisionError
from .config import ScenarioConfig
from .numerics import gauss_legendre_nodes, hermitize, make_rng, standard_complex_normal

DEG = np.pi / 180.0
MIN_SEPARATION_RAD = 3.0 * DEG
MAX_AOA_RAD = 60.0 * DEG
SWEEP_AXES = ("p", "snr", "offset")

__all__ = ["RunResult", "run_realization", "run_experiment", "sweep", "SWEEP_AXES"]


@dataclass
class RunResult:
    """Long-format metric records collected over one or more trials."""

    config: dict
    seed: int
    angular_rows: list = field(default_factory=list)  # (trial, st, cluster, err_rad)
    nmse_rows: list = field(default_factory=list)  # (trial, st, ft, cluster, value)
    sinr_rows: list = field(default_factory=list)  # (trial, st, ft, cluster, linear)
    nmse_ratio_rows: list = field(default_factory=list)  # (trial, cluster, value)
    terminations: list = field(default_factory=list)  # (trial, reason, ft_completed)

    def merge(self, other: "RunResult") -> "RunResult":
        self.angular_rows += other.angular_rows
        self.nmse_rows += other.nmse_rows
        self.sinr_rows += other.sinr_rows
        self.nmse_ratio_rows += other.nmse_ratio_rows
        self.terminations += other.terminations
        return self

    # -- typed views used by reporting and tests ------------------------------
    def angular_errors(self, cluster: int | None = None) -> np.ndarray:
        rows = [r for r in self.angular_rows if cluster is None or r[2] == cluster]
        return np.array([r[3] for r in rows], dtype=float)

    def nmse_values(self, cluster: int | None = None) -> np.ndarray:
        rows = [r for r in self.nmse_rows if cluster is None or r[3] == cluster]
        return np.array([r[4] for r in rows], dtype=float)

    def sinr_values(self, cluster: int | None = None) -> np.ndarray:
        rows = [r for r in self.sinr_rows if cluster is None or r[3] == cluster]
        return np.array([r[4] for r in rows], dtype=float)

    def nmse_empirical(self, cluster: int) -> float:
        vals = [r[2] for r in self.nmse_ratio_rows if r[1] == cluster]
        return float(np.mean(vals)) if vals else float("nan")


@dataclass
class _Stages:
    """Beamformers and tracker scaffolding in effect for one ST-CPI."""

    bf: BeamformerSet | None  # None when fully digital (analog stage = identity)
    dbf: list[np.ndarray]  # per cluster, (R_eff, D_m)
    total: list[np.ndarray]  # per cluster, (N, D_m)
    psi_cols: np.ndarray | None  # principal frequencies of the analog columns
    grids: list[tracking.AngleGrid]


@dataclass
class _BlockData:
    """Tracker inputs accumulated while the block's fast-time chain ran."""

    iec_estimates: list[np.ndarray]  # per cluster, (P, D_m)
    omp_obs: np.ndarray | None = None  # (N_F * R, P) stacked training outputs
    periodogram_cov: list[np.ndarray] | None = None  # per cluster, (R/M, R/M)


def _linear_powers(config: ScenarioConfig) -> np.ndarray:
    return np.array([10.0 ** (c.snr_db / 10.0) for c in config.clusters])


def _mobility_model(config: ScenarioConfig) -> channel.MobilityModel:
    return channel.MobilityModel(
        ft_duration=config.t_f,
        sigma_theta_sq=config.sigma_theta_sq * DEG**2,
        sigma_omega_sq=config.sigma_omega_sq * DEG**2,
    )


def _first_violation(paths: np.ndarray) -> tuple[int, str | None]:
    """First FT-CPI of the block violating geometry, or (block length, None).

    paths: (M, P, 2) mobility states. Violations: any pairwise AoA gap below
    3 degrees, or any AoA outside +/-60 degrees.
    """
    thetas = paths[:, :, 0]
    p_len = thetas.shape[1]
    out = np.abs(thetas).max(axis=0) > MAX_AOA_RAD
    close = np.zeros(p_len, dtype=bool)
    m = thetas.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            close |= np.abs(thetas[i] - thetas[j]) < MIN_SEPARATION_RAD
    first_out = int(np.argmax(out)) if out.any() else p_len
    first_close = int(np.argmax(close)) if close.any() else p_len
    if first_out == first_close == p_len:
        return p_len, None
    if first_close < first_out:
        return first_close, "cluster_separation"
    return first_out, "aoa_out_of_range"


def _window_grid(config: ScenarioConfig, window: list[int]) -> tracking.AngleGrid:
    lo, hi = beamform.sector_support(window, config.n_antennas)
    return tracking.make_grid(lo, hi, config.grid_resolution_deg * DEG)


def _virtual_grid(config: ScenarioConfig, theta: float) -> tracking.AngleGrid:
    """Fully digital stages have no DFT sectors; use an RD-equivalent window."""
    n = config.n_antennas
    half_psi = (config.n_rfc // config.n_clusters) * np.pi / n
    center = np.pi * np.sin(theta)
    lo = float(np.arcsin(np.clip((center - half_psi) / np.pi, -1.0, 1.0)))
    hi = float(np.arcsin(np.clip((center + half_psi) / np.pi, -1.0, 1.0)))
    return tracking.make_grid(lo, hi, config.grid_resolution_deg * DEG)


def _project_channels(
    config: ScenarioConfig,
    psi_cols: np.ndarray | None,
    thetas: np.ndarray,
    gains: np.ndarray,
    spread: float,
) -> np.ndarray:
    """Analog-stage channel block (P, R_eff) for one cluster.

    thetas: (P,) true AoAs; gains: (P, L) ray gains. Dirichlet projection when
    an analog DFT stage exists, antenna-dimension synthesis otherwise; chunked
    to bound temporaries.
    """
    offsets = channel.ray_offsets(spread, config.ray_count)
    p_len = thetas.shape[0]
    n = config.n_antennas
    scale = 1.0 / np.sqrt(config.ray_count)
    width = psi_cols.size if psi_cols is not None else n
    out = np.empty((p_len, width), dtype=np.complex128)
    # chunk so the (chunk, L, width) temporaries stay cache-resident
    chunk = max(1, 400_000 // max(1, offsets.size * width))
    for lo in range(0, p_len, chunk):
        hi = min(lo + chunk, p_len)
        rays = thetas[lo:hi, None] + offsets[None, :]
        if psi_cols is not None:
            grams = channel.steering_gram(psi_cols, rays, n)  # (b, L, R)
            out[lo:hi] = np.einsum("plr,pl->pr", grams, gains[lo:hi]) * scale
        else:
            steer = channel.steering_block(rays.reshape(-1), n).reshape(
                hi - lo, offsets.size, n
            )
            out[lo:hi] = np.einsum("pln,pl->pn", steer, gains[lo:hi]) * scale
    return out


def _reduced_ccm(
    proj: np.ndarray, weights: np.ndarray, spread: float
) -> np.ndarray:
    """Quadrature assembly of T^H R T from pre-projected node steering vectors."""
    return hermitize(proj.T @ (weights[:, None] * proj.conj())) / spread


class _Realization:
    """State and scratch for one seeded realization."""

    def __init__(self, config: ScenarioConfig, trial_index: int):
        self.config = config
        self.trial = trial_index
        self.rng = make_rng(config.seed, trial_index)
        self.result = RunResult(config=config.to_dict(), seed=config.seed)
        self.powers = _linear_powers(config)
        self.noise = 1.0
        self.model = _mobility_model(config)
        self.spreads = [c.spread_deg * DEG for c in config.clusters]
        self.ranks = config.dbf_ranks()
        self.st_model = channel.st_transition(self.model, config.p_count)
        self.stride = config.stride()
        self.rd_cache: dict = {}
        self.fd_cache: dict = {}
        m = config.n_clusters
        self.states = np.array(
            [[c.aoa_deg * DEG, c.velocity_deg * DEG] for c in config.clusters]
        )
        self.baml_bases = [
            channel.lowrank_basis(s, config.n_antennas, config.baml_rank)
            for s in self.spreads
        ]
        self.sekf_bases = [
            channel.lowrank_basis(s, config.n_antennas, config.sekf_rank)
            for s in self.spreads
        ]
        self.fixed_pilots = None
        if config.tracker == "omp":
            self.fixed_pilots = np.stack(
                [ft_estim.gen_training(config.n_f, self.rng) for _ in range(m)]
            )
        self.sekf_cov0 = np.diag(
            [
                (config.sekf_init_std_deg[0] * DEG) ** 2,
                (config.sekf_init_std_deg[1] * DEG) ** 2,
            ]
        )
        self.sekf_states = [
            tracking.TrackerState(
                kind="sekf",
                aoa_estimate=self.states[i, 0],
                x_pred=np.array([self.states[i, 0], 0.0]),
                cov_pred=self.sekf_cov0.copy(),
            )
            for i in range(m)
        ]
        # Tracker init: true AoAs at the first ST-CPI head (prior acquisition).
        self.estimates = self.states[:, 0].copy()
        self.nmse_num = np.zeros(m)
        self.nmse_den = np.zeros(m)

    # -- beamformer construction ----------------------------------------------
    def _rd_geb_dbfs(self, bf: BeamformerSet) -> list[np.ndarray]:
        key = tuple(tuple(w) for w in bf.dft_indices)
        if key not in self.rd_cache:
            rbars, psibar = beamform.approx_reduced_ccms(bf, None, self.powers, self.noise)
            self.rd_cache[key] = [
                beamform.rd_geb(rbars[i], psibar, self.ranks[i])
                for i in range(self.config.n_clusters)
            ]
        return self.rd_cache[key]

    def _fd_geb_totals(self, constr: np.ndarray) -> list[np.ndarray]:
        cfg = self.config
        res = cfg.grid_resolution_deg * DEG
        key = tuple(np.round(constr / res).astype(int))
        if key not in self.fd_cache:
            snapped = np.array(key) * res
            ccms = [
                channel.cluster_ccm(float(a), s, cfg.n_antennas, cfg.quad_nodes)
                for a, s in zip(snapped, self.spreads)
            ]
            psi = channel.total_covariance(ccms, self.powers, self.noise)
            self.fd_cache[key] = [
                beamform.fd_geb(ccms[i], psi, self.ranks[i])
                for i in range(cfg.n_clusters)
            ]
        return self.fd_cache[key]

    def _construction_rbars(
        self, bf: BeamformerSet | None, constr: np.ndarray
    ) -> list[np.ndarray]:
        cfg = self.config
        out = []
        for theta, spread in zip(constr, self.spreads):
            r_full = channel.cluster_ccm(float(theta), spread, cfg.n_antennas, cfg.quad_nodes)
            if bf is None:
                out.append(r_full)
            else:
                out.append(hermitize(bf.abf.conj().T @ r_full @ bf.abf))
        return out

    def _head_estimate(
        self,
        bf: BeamformerSet | None,
        constr: np.ndarray,
        r_head: np.ndarray,
        seq_head: np.ndarray,
    ) -> np.ndarray:
        """Power-scaled joint channel estimate (M, R_eff) from the head training."""
        if self.config.ft_estimator == "joint_mmse":
            rbars = self._construction_rbars(bf, constr)
            est = ft_estim.joint_mmse(r_head.T, seq_head, self.powers, rbars, self.noise)
        else:
            est = ft_estim.joint_ls(r_head.T, seq_head, self.powers)
        return est * np.sqrt(self.powers)[:, None]

    # -- main loop ---------------------------------------------------------------
    def run(self) -> RunResult:
        cfg = self.config
        m = cfg.n_clusters
        p_done = 0
        st_index = 0
        reason = "completed"

        while p_done < cfg.p_max:
            st_index += 1
            planned = min(cfg.p_count, cfg.p_max - p_done)

            paths = np.empty((m, planned, 2))
            finals = np.empty((m, 2))
            for i in range(m):
                paths[i], finals[i] = channel.mobility_path(
                    self.states[i], self.model, planned, self.rng
                )
            p_eff, violation = _first_violation(paths)
            if p_eff == 0:
                reason = violation
                break
            paths = paths[:, :p_eff]
            theta_head = paths[:, 0, 0]

            if cfg.mode == "genie_aided":
                constr = theta_head + cfg.construction_offset_deg * DEG
            else:
                constr = self.estimates.copy()

            try:
                bf = (
                    None
                    if cfg.full_dimensional
                    else beamform.build_abf(constr, cfg.n_antennas, cfg.n_rfc)
                )
            except (ClusterCollisionError, ValueError):
                reason = "cluster_collision"
                break
            psi_cols = (
                None
                if bf is None
                else np.concatenate(
                    [
                        beamform.principal_frequency(np.array(w), cfg.n_antennas)
                        for w in bf.dft_indices
                    ]
                )
            )

            # Draw order within a block: gains (cluster-major), training
            # symbols, training noise; then strided data draws inside the chain.
            gains = [
                standard_complex_normal(self.rng, (p_eff, cfg.ray_count))
                for _ in range(m)
            ]
            if self.fixed_pilots is not None:
                seqs = np.broadcast_to(self.fixed_pilots, (p_eff, m, cfg.n_f))
            else:
                idx = self.rng.integers(0, 4, size=(p_eff, m, cfg.n_f))
                seqs = ft_estim.TRAINING_ALPHABET[idx]
            r_dim = cfg.effective_rfc()
            train_noise = np.sqrt(self.noise) * standard_complex_normal(
                self.rng, (p_eff, r_dim, cfg.n_f)
            )

            hbar = np.stack(
                [
                    _project_channels(cfg, psi_cols, paths[i, :, 0], gains[i], self.spreads[i])
                    for i in range(m)
                ],
                axis=2,
            )  # (P, R_eff, M)
            r_train = (
                np.einsum("prm,pmn->prn", hbar * np.sqrt(self.powers), seqs) + train_noise
            )

            # Digital stages (instantaneous combiners consume the head training).
            if cfg.beamformer in ("mmse_bf", "fd_mmse_bf"):
                head_est = self._head_estimate(bf, constr, r_train[0], seqs[0])
                dbf = [beamform.mmse_bf(head_est.T, self.noise, i) for i in range(m)]
            elif cfg.beamformer == "rd_geb":
                dbf = self._rd_geb_dbfs(bf)
            elif cfg.beamformer == "dft_bf":
                dbf = [beamform.dft_bf(bf, i) for i in range(m)]
            else:  # fd_geb
                dbf = self._fd_geb_totals(constr)

            if bf is not None:
                bf.attach_dbf(dbf)
                total = bf.total
                grids = [_window_grid(cfg, w) for w in bf.dft_indices]
            else:
                total = dbf
                grids = [_virtual_grid(cfg, float(t)) for t in constr]
            stages = _Stages(bf=bf, dbf=dbf, total=total, psi_cols=psi_cols, grids=grids)

            block = self._process_block(
                stages, paths, hbar, r_train, seqs, constr, p_done, st_index
            )

            # beam tracking fires only after a full P-length batch
            if p_eff == cfg.p_count and violation is None:
                self._run_trackers(stages, block, theta_head, constr, st_index, p_eff)

            p_done += p_eff
            if violation is not None:
                reason = violation
                break
            self.states = finals

        for i in range(m):
            if self.nmse_den[i] > 0:
                self.result.nmse_ratio_rows.append(
                    (self.trial, i, float(self.nmse_num[i] / self.nmse_den[i]))
                )
        self.result.terminations.append((self.trial, reason, p_done))
        return self.result

    # -- fast-time chain over one block -----------------------------------------
    def _process_block(
        self,
        stages: _Stages,
        paths: np.ndarray,
        hbar: np.ndarray,
        r_train: np.ndarray,
        seqs: np.ndarray,
        constr: np.ndarray,
        p_done: int,
        st_index: int,
    ) -> _BlockData:
        cfg = self.config
        m = cfg.n_clusters
        p_eff = r_train.shape[0]
        n_f = cfg.n_f

        truths = [hbar[:, :, i] @ stages.dbf[i].conj() for i in range(m)]
        joint_all = None
        use_joint_iec = cfg.ft_estimator != "ba_ls" and cfg.beamformer not in (
            "mmse_bf",
            "fd_mmse_bf",
        )
        if use_joint_iec:
            joint_all = self._joint_block(stages, r_train, seqs, constr)

        iec_estimates = []
        for i in range(m):
            if joint_all is not None:
                est_bar = joint_all[:, i, :]
                iec = est_bar @ stages.dbf[i].conj()
                self.nmse_num[i] += float(np.sum(np.abs(est_bar - hbar[:, :, i]) ** 2))
                self.nmse_den[i] += float(np.sum(np.abs(hbar[:, :, i]) ** 2))
            else:
                z_tr = np.einsum("rd,prn->pdn", stages.dbf[i].conj(), r_train)
                iec = np.einsum("pdn,pn->pd", z_tr, seqs[:, i].conj()) / (
                    np.sqrt(self.powers[i]) * n_f
                )
                self.nmse_num[i] += float(np.sum(np.abs(iec - truths[i]) ** 2))
                self.nmse_den[i] += float(np.sum(np.abs(truths[i]) ** 2))
            iec_estimates.append(iec)

        record_analytic = cfg.ft_estimator == "ba_ls" and cfg.beamformer not in (
            "mmse_bf",
            "fd_mmse_bf",
        )
        n_sub = min(cfg.data_subsample, cfg.n_s) if cfg.n_s > 0 else 0
        for i in range(p_eff):
            if (p_done + i) % self.stride != 0:
                continue
            ft_index = p_done + i + 1
            if record_analytic:
                self._record_analytic_nmse(stages, paths[:, i, 0], st_index, ft_index)
            if n_sub > 0:
                self._record_sinr(
                    stages, hbar[i], iec_estimates, i, n_sub, st_index, ft_index
                )

        block = _BlockData(iec_estimates=iec_estimates)
        if cfg.tracker == "omp":
            block.omp_obs = r_train.transpose(0, 2, 1).reshape(p_eff, -1).T
        if cfg.tracker == "periodogram":
            block.periodogram_cov = []
            for i in range(m):
                z = r_train[:, stages.bf.cluster_columns(i), :]  # (P, w, N_F)
                block.periodogram_cov.append(np.einsum("pwn,pvn->wv", z, z.conj()))
        return block

    def _joint_block(
        self,
        stages: _Stages,
        r_train: np.ndarray,
        seqs: np.ndarray,
        constr: np.ndarray,
    ) -> np.ndarray:
        """Joint LS/MMSE estimates for every FT-CPI of the block: (P, M, R_eff)."""
        cfg = self.config
        p_eff = r_train.shape[0]
        out = np.empty((p_eff, cfg.n_clusters, r_train.shape[1]), dtype=np.complex128)
        rbars = (
            self._construction_rbars(stages.bf, constr)
            if cfg.ft_estimator == "joint_mmse"
            else None
        )
        for p in range(p_eff):
            if cfg.ft_estimator == "joint_ls":
                out[p] = ft_estim.joint_ls(r_train[p].T, seqs[p], self.powers)
            else:
                out[p] = ft_estim.joint_mmse(
                    r_train[p].T, seqs[p], self.powers, rbars, self.noise
                )
        return out

    def _record_analytic_nmse(
        self, stages: _Stages, thetas_now: np.ndarray, st_index: int, ft_index: int
    ) -> None:
        cfg = self.config
        m = cfg.n_clusters
        # One node set per interfering cluster, projected through every total BF.
        r_tilde = [[None] * m for _ in range(m)]
        for mp in range(m):
            x, w = gauss_legendre_nodes(
                thetas_now[mp] - 0.5 * self.spreads[mp],
                thetas_now[mp] + 0.5 * self.spreads[mp],
                cfg.quad_nodes,
            )
            steer = channel.steering_block(x, cfg.n_antennas)  # (nodes, N)
            for mm in range(m):
                proj = steer @ stages.total[mm].conj()
                r_tilde[mm][mp] = _reduced_ccm(proj, w, self.spreads[mp])
        for mm in range(m):
            d_m = stages.total[mm].shape[1]
            psi_tilde = self.noise * np.eye(d_m, dtype=np.complex128)
            for mp in range(m):
                psi_tilde = psi_tilde + self.powers[mp] * r_tilde[mm][mp]
            value = metrics.nmse_analytic(psi_tilde, r_tilde[mm][mm], self.powers[mm], cfg.n_f)
            self.result.nmse_rows.append((self.trial, st_index, ft_index, mm, value))

    def _record_sinr(
        self,
        stages: _Stages,
        hbar_now: np.ndarray,
        iec_estimates: list[np.ndarray],
        p_idx: int,
        n_sub: int,
        st_index: int,
        ft_index: int,
    ) -> None:
        cfg = self.config
        m = cfg.n_clusters
        data_idx = self.rng.integers(0, 4, size=(m, n_sub))
        data_sym = ft_estim.TRAINING_ALPHABET[data_idx]
        data_noise = np.sqrt(self.noise) * standard_complex_normal(
            self.rng, (hbar_now.shape[0], n_sub)
        )
        r_data = (hbar_now * np.sqrt(self.powers)) @ data_sym + data_noise
        for i in range(m):
            z = stages.dbf[i].conj().T @ r_data  # (D, n_sub)
            est = iec_estimates[i][p_idx]
            outputs = est.conj() @ z
            coeff = np.sqrt(self.powers[i]) * float(np.vdot(est, est).real) * data_sym[i]
            value = metrics.sinr_empirical(outputs, coeff)
            self.result.sinr_rows.append((self.trial, st_index, ft_index, i, value))

    # -- slow-time tracking --------------------------------------------------------
    def _run_trackers(
        self,
        stages: _Stages,
        block: _BlockData,
        theta_head: np.ndarray,
        constr: np.ndarray,
        st_index: int,
        p_eff: int,
    ) -> None:
        cfg = self.config
        m = cfg.n_clusters
        recorded = np.empty(m)

        if cfg.tracker == "ba_ml":
            for i in range(m):
                recorded[i] = tracking.ba_ml(
                    block.iec_estimates[i],
                    stages.grids[i],
                    stages.total[i],
                    self.baml_bases[i],
                )
            self.estimates[:] = recorded
        elif cfg.tracker == "sekf":
            for i in range(m):
                state = self.sekf_states[i]
                if cfg.lockin_mode:
                    # Each ST-CPI is an independent given-error trial.
                    state = tracking.TrackerState(
                        kind="sekf",
                        aoa_estimate=float(constr[i]),
                        x_pred=np.array([constr[i], 0.0]),
                        cov_pred=self.sekf_cov0.copy(),
                    )
                theta_pred = float(state.x_pred[0])
                r_mat, _ = tracking.r_theta(theta_pred, stages.total[i], self.sekf_bases[i])
                d_m = r_mat.shape[0]
                r_f_pred = r_mat + (self.noise / (self.powers[i] * cfg.n_f)) * np.eye(d_m)
                jac = tracking.sekf_jacobian(theta_pred, stages.total[i], self.sekf_bases[i])
                q = tracking.sekf_noise_cov(r_f_pred, p_eff)
                obs = tracking.sekf_observe(block.iec_estimates[i])
                grid = stages.grids[i]
                new_state = tracking.sekf_update(
                    state,
                    obs,
                    q,
                    jac,
                    self.st_model,
                    r_f_pred,
                    coverage=(grid.lo, grid.hi),
                )
                self.sekf_states[i] = new_state
                recorded[i] = new_state.aoa_estimate
                self.estimates[i] = float(new_state.x_pred[0])
        elif cfg.tracker == "omp":
            dictionary, owners, thetas = tracking.build_omp_dictionary(
                stages.bf.abf, self.fixed_pilots, stages.grids, self.powers
            )
            est, _ = tracking.omp_track(block.omp_obs, dictionary, owners, thetas)
            recorded[:] = est
            self.estimates[:] = recorded
        else:  # periodogram
            for i in range(m):
                s_tilde = stages.bf.abf[:, stages.bf.cluster_columns(i)]
                recorded[i] = tracking.periodogram_track(
                    block.periodogram_cov[i], s_tilde, stages.grids[i]
                )
            self.estimates[:] = recorded

        for i in range(m):
            self.result.angular_rows.append(
                (self.trial, st_index, i, float(recorded[i] - theta_head[i]))
            )


def run_realization(config: ScenarioConfig, trial_index: int) -> RunResult:
    """Execute one seeded realization; scheduling follows the module docstring."""
    return _Realization(config, trial_index).run()


def run_experiment(config: ScenarioConfig, workers: int = 1, out_dir=None) -> RunResult:
    """Dispatch `config.trials` independent realizations and merge them in trial order.

    A worker failure propagates (no partial results). Output files are written
    when ``out_dir`` is given.
    """
    if workers <= 1:
        fragments = [run_realization(config, t) for t in range(config.trials)]
    else:
        with multiprocessing.Pool(min(workers, config.trials)) as pool:
            fragments = pool.starmap(
                run_realization, [(config, t) for t in range(config.trials)]
            )
    result = RunResult(config=config.to_dict(), seed=config.seed)
    for frag in sorted(fragments, key=lambda f: f.terminations[0][0]):
        result.merge(frag)
    if out_dir is not None:
        from . import results as results_io

        results_io.write_outputs(result, config, out_dir)
    return result


def sweep(
    config: ScenarioConfig,
    axis: str,
    values: list[float],
    workers: int = 1,
    out_dir=None,
) -> list[tuple[float, RunResult]]:
    """One experiment per axis value.

    ``p``: FT-CPIs per ST-CPI; ``snr``: first cluster's SNR in dB with the
    other clusters shifted by the same delta (near-far offsets preserved);
    ``offset``: genie construction error in degrees (lock-in experiment).
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    runs = []
    for value in values:
        cfg_dict = config.to_dict()
        if axis == "p":
            cfg_dict["p_count"] = int(value)
        elif axis == "snr":
            base = cfg_dict["clusters"][0]["snr_db"]
            for c in cfg_dict["clusters"]:
                c["snr_db"] = float(value) + (c["snr_db"] - base)
        else:  # offset
            cfg_dict["mode"] = "genie_aided"
            cfg_dict["construction_offset_deg"] = float(value)
            cfg_dict["lockin_mode"] = True
        sub = ScenarioConfig.from_dict(cfg_dict)
        runs.append((float(value), run_experiment(sub, workers=workers)))
    if out_dir is not None:
        from . import results as results_io

        results_io.write_sweep_outputs(runs, config, axis, out_dir)
    return runs
