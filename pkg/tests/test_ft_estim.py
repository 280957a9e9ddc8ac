"""Fast-time chain: training statistics, LS/MMSE estimators against naive
stacked solutions, matched filtering, and the cluster combiner."""

import numpy as np
import pytest

from beamtrack.beamform import build_abf, rd_geb, approx_reduced_ccms
from beamtrack.channel import cluster_ccm, steering_vector, total_covariance
from beamtrack.ft_estim import (
    EstimationError,
    TRAINING_ALPHABET,
    ba_ls,
    dcc_align,
    dcc_combine,
    gen_training,
    ics_cmf,
    joint_ls,
    joint_mmse,
    receive_symbol,
)
from beamtrack.numerics import make_rng, standard_complex_normal

DEG = np.pi / 180.0


def stacked_regressor(sequences, powers, r_dim):
    """V = [sqrt(E_1) s_1 (x) I_R ... ], the full (N_F R) x (M R) stack."""
    m = sequences.shape[0]
    return np.concatenate(
        [
            np.sqrt(powers[i]) * np.kron(sequences[i][:, None], np.eye(r_dim))
            for i in range(m)
        ],
        axis=1,
    )


def naive_joint_ls(r_concat, sequences, powers):
    """Full-size stacked pseudo-inverse, no Kronecker exploitation."""
    m, n_f = sequences.shape
    r_dim = r_concat.size // n_f
    v = stacked_regressor(sequences, powers, r_dim)
    est = np.linalg.pinv(v) @ r_concat.reshape(-1)
    return est.reshape(m, r_dim)


def naive_joint_mmse(r_concat, sequences, powers, rbar_blocks, noise):
    """Direct N_F R-size inverse of (V Rbar V^H + N0 I)."""
    m, n_f = sequences.shape
    r_dim = rbar_blocks[0].shape[0]
    v = stacked_regressor(sequences, powers, r_dim)
    rbar = np.zeros((m * r_dim, m * r_dim), dtype=complex)
    for i, b in enumerate(rbar_blocks):
        rbar[i * r_dim : (i + 1) * r_dim, i * r_dim : (i + 1) * r_dim] = b
    big = v @ rbar @ v.conj().T + noise * np.eye(n_f * r_dim)
    est = rbar @ v.conj().T @ np.linalg.solve(big, r_concat.reshape(-1))
    return est.reshape(m, r_dim)


class TestGenTraining:
    def test_exact_norm(self):
        s = gen_training(17, make_rng(0))
        assert np.vdot(s, s).real == 17.0  # unit-modulus alphabet: exact
        assert np.all(np.isin(s, TRAINING_ALPHABET))

    def test_cross_correlation_moments(self):
        # independent sequences: E[s^H s'] = 0 and E[|s^H s'|^2] = N_F
        rng = make_rng(1)
        n_f, pairs = 10, 100_000
        a = TRAINING_ALPHABET[rng.integers(0, 4, size=(pairs, n_f))]
        b = TRAINING_ALPHABET[rng.integers(0, 4, size=(pairs, n_f))]
        inner = np.sum(a.conj() * b, axis=1)
        assert abs(np.mean(inner)) < 0.05
        assert abs(np.mean(np.abs(inner) ** 2) - n_f) < 0.03 * n_f

    def test_deterministic_under_seed(self):
        np.testing.assert_array_equal(gen_training(8, make_rng(5)), gen_training(8, make_rng(5)))


class TestReceiveSymbol:
    def make_stages(self, n=32, r=8, d=2):
        angles = np.array([10, 30]) * DEG
        bf = build_abf(angles, n, r)
        powers = np.array([10.0, 100.0])
        rbars, psibar = approx_reduced_ccms(bf, None, powers, 1.0)
        bf.attach_dbf([rd_geb(rbars[m], psibar, d) for m in range(2)])
        return bf, angles, powers

    def test_noiseless_single_cluster(self):
        h = steering_vector(0.1, 8)
        y, r, z = receive_symbol(None, [h], np.array([1.0]), np.array([4.0]), 0.0, make_rng(0))
        np.testing.assert_allclose(y, 2.0 * h, atol=1e-14)

    def test_accepts_channel_realization(self):
        from beamtrack.channel import ChannelRealization

        h = steering_vector(0.1, 8)
        real = ChannelRealization(vectors=[h], ft_index=3)
        y1, _, _ = receive_symbol(None, real, np.array([1.0]), np.array([4.0]), 1.0, make_rng(1))
        y2, _, _ = receive_symbol(None, [h], np.array([1.0]), np.array([4.0]), 1.0, make_rng(1))
        np.testing.assert_array_equal(y1, y2)

    def test_stage_consistency_and_contraction(self):
        bf, angles, powers = self.make_stages()
        rng = make_rng(2)
        hs = [steering_vector(t, 32) for t in angles]
        symbols = TRAINING_ALPHABET[rng.integers(0, 4, size=2)]
        y, r, z = receive_symbol(bf, hs, symbols, powers, 1.0, rng)
        np.testing.assert_allclose(r, bf.abf.conj().T @ y, atol=1e-12)
        for m in range(2):
            np.testing.assert_allclose(z[m], bf.total[m].conj().T @ y, atol=1e-12)
            np.testing.assert_allclose(z[m], bf.dbf[m].conj().T @ r, atol=1e-12)
        assert np.linalg.norm(r) <= np.linalg.norm(y) + 1e-12

    def test_received_covariance_matches_total(self):
        n, trials = 8, 100_000
        angles = np.array([5, 40]) * DEG
        powers = np.array([2.0, 5.0])
        spread = 3 * DEG
        rng = make_rng(3)
        # the total covariance averages over symbols, noise, AND channel
        # draws, so the channel is refreshed every symbol
        from beamtrack.channel import ray_offsets, steering_block

        rays = [steering_block(a + ray_offsets(spread, 64), n) for a in angles]
        acc = np.zeros((n, n), dtype=complex)
        batch = trials // 10
        for _ in range(10):
            hs = [
                standard_complex_normal(rng, (batch, 64)) @ a_mat / 8.0
                for a_mat in rays
            ]
            sym = TRAINING_ALPHABET[rng.integers(0, 4, size=(batch, 2))]
            noise = standard_complex_normal(rng, (batch, n))
            ys = (
                sym[:, 0:1] * np.sqrt(powers[0]) * hs[0]
                + sym[:, 1:2] * np.sqrt(powers[1]) * hs[1]
                + noise
            )
            acc += ys.T @ ys.conj()
        cov = acc / trials
        expected = total_covariance(
            [cluster_ccm(a, spread, n) for a in angles], powers, 1.0
        )
        rel = np.linalg.norm(cov - expected) / np.linalg.norm(expected)
        assert rel < 0.03


class TestBaLs:
    def test_noiseless_single_cluster_exact(self):
        rng = make_rng(4)
        d, n_f, e = 3, 10, 7.0
        h = standard_complex_normal(rng, d)
        s = gen_training(n_f, rng)
        z = np.sqrt(e) * s[:, None] * h[None, :]  # (N_F, D)
        est = ba_ls(z, s, e, n_f, d)
        np.testing.assert_allclose(est, h, atol=1e-12)

    def test_noise_only_variance(self):
        # estimate ~ CN(0, N0 / (E N_F) I)
        rng = make_rng(5)
        d, n_f, e, n0, trials = 2, 10, 4.0, 2.0, 100_000
        s = gen_training(n_f, rng)
        noise = np.sqrt(n0) * standard_complex_normal(rng, (trials, n_f, d))
        ests = np.einsum("n,tnd->td", s.conj(), noise) / (np.sqrt(e) * n_f)
        var = np.mean(np.abs(ests) ** 2)
        assert abs(var - n0 / (e * n_f)) < 0.03 * n0 / (e * n_f)

    def test_orthogonal_interferer_cancels_exactly(self):
        d, n_f = 2, 4
        s1 = np.array([1, 1, 1, 1], dtype=complex)
        s2 = np.array([1, -1, 1, -1], dtype=complex)  # s1^H s2 = 0
        h_own = np.array([1.0 + 1j, 2.0])
        h_int = np.array([5.0, -3.0j])
        z = s1[:, None] * h_own + s2[:, None] * h_int
        est = ba_ls(z, s1, 1.0, n_f, d)
        np.testing.assert_allclose(est, h_own, atol=1e-12)

    def test_conditionally_unbiased(self):
        # random interferer data: interference term has zero mean
        rng = make_rng(6)
        d, n_f, trials = 2, 10, 100_000
        e_own, e_int = 4.0, 400.0
        h_own = np.array([0.5 - 0.2j, 1.0 + 0.3j])
        h_int = np.array([1.0, 1.0j])
        s_own = TRAINING_ALPHABET[rng.integers(0, 4, size=(trials, n_f))]
        s_int = TRAINING_ALPHABET[rng.integers(0, 4, size=(trials, n_f))]
        z = (
            np.sqrt(e_own) * s_own[:, :, None] * h_own
            + np.sqrt(e_int) * s_int[:, :, None] * h_int
        )
        ests = np.einsum("tn,tnd->td", s_own.conj(), z) / (np.sqrt(e_own) * n_f)
        mean = ests.mean(axis=0)
        scale = np.abs(h_own) + np.sqrt(e_int / e_own) * np.abs(h_int)
        np.testing.assert_allclose(mean, h_own, atol=0.03 * scale.max())

    def test_flat_input_accepted(self):
        rng = make_rng(7)
        z = standard_complex_normal(rng, (5, 3))
        s = gen_training(5, rng)
        np.testing.assert_allclose(
            ba_ls(z.reshape(-1), s, 1.0, 5, 3), ba_ls(z, s, 1.0, 5, 3), atol=1e-15
        )


class TestJointLs:
    def test_orthogonal_noiseless_recovery(self):
        r_dim = 4
        s = np.array([[1, 1, 1, 1], [1, -1, 1, -1]], dtype=complex)
        powers = np.array([2.0, 8.0])
        rng = make_rng(8)
        h = standard_complex_normal(rng, (2, r_dim))
        r = np.einsum("m,mn,md->nd", np.sqrt(powers), s, h)
        est = joint_ls(r, s, powers)
        np.testing.assert_allclose(est, h, atol=1e-12)

    def test_single_cluster_reduces_to_ba_ls(self):
        rng = make_rng(9)
        r_dim, n_f = 6, 10
        s = gen_training(n_f, rng)[None, :]
        r = standard_complex_normal(rng, (n_f, r_dim))
        est = joint_ls(r, s, np.array([3.0]))
        np.testing.assert_allclose(est[0], ba_ls(r, s[0], 3.0, n_f, r_dim), atol=1e-12)

    def test_matches_naive_pinv(self):
        rng = make_rng(10)
        m, n_f, r_dim = 3, 8, 5
        s = TRAINING_ALPHABET[rng.integers(0, 4, size=(m, n_f))]
        powers = np.array([1.0, 10.0, 100.0])
        r = standard_complex_normal(rng, (n_f, r_dim))
        est = joint_ls(r, s, powers)
        np.testing.assert_allclose(est, naive_joint_ls(r, s, powers), atol=1e-9)

    def test_singular_gram_raises(self):
        s = np.ones((2, 4), dtype=complex)  # identical sequences
        r = np.zeros((4, 3), dtype=complex)
        with pytest.raises(EstimationError):
            joint_ls(r, s, np.array([1.0, 1.0]))


class TestJointMmse:
    def make_problem(self, seed=11, m=2, n_f=6, r_dim=4, noise=0.5, rank_deficient=False):
        rng = make_rng(seed)
        s = TRAINING_ALPHABET[rng.integers(0, 4, size=(m, n_f))]
        powers = np.linspace(1.0, 3.0, m)
        rbars = []
        for i in range(m):
            b = standard_complex_normal(rng, (r_dim, 1 if rank_deficient else r_dim))
            rbars.append(b @ b.conj().T)
        r = standard_complex_normal(rng, (n_f, r_dim))
        return r, s, powers, rbars, noise

    def test_matches_naive_full_inverse(self):
        r, s, powers, rbars, noise = self.make_problem()
        est = joint_mmse(r, s, powers, rbars, noise)
        oracle = naive_joint_mmse(r, s, powers, rbars, noise)
        np.testing.assert_allclose(est, oracle, atol=1e-9)

    def test_rank_deficient_prior_is_fine(self):
        r, s, powers, rbars, noise = self.make_problem(seed=12, rank_deficient=True)
        est = joint_mmse(r, s, powers, rbars, noise)
        oracle = naive_joint_mmse(r, s, powers, rbars, noise)
        np.testing.assert_allclose(est, oracle, atol=1e-9)

    def test_large_noise_shrinks_to_zero(self):
        r, s, powers, rbars, _ = self.make_problem(seed=13)
        est = joint_mmse(r, s, powers, rbars, 1e12)
        assert np.max(np.abs(est)) < 1e-6

    def test_diffuse_prior_converges_to_ls(self):
        # orthogonal sequences, prior -> kappa I with large kappa
        r_dim = 3
        s = np.array([[1, 1, 1, 1], [1, -1, 1, -1]], dtype=complex)
        powers = np.array([1.0, 2.0])
        rng = make_rng(14)
        r = standard_complex_normal(rng, (4, r_dim))
        kappa = 1e6
        rbars = [kappa * np.eye(r_dim)] * 2
        est = joint_mmse(r, s, powers, rbars, 1.0)
        np.testing.assert_allclose(est, joint_ls(r, s, powers), atol=1e-4)

    def test_mse_not_worse_than_ls(self):
        # Monte-Carlo at reference power levels: Bayes-optimality
        rng = make_rng(15)
        m, n_f, r_dim, noise, trials = 2, 10, 4, 1.0, 10_000
        powers = np.array([10.0, 1000.0])
        rbars = []
        factors = []
        for i in range(m):
            b = standard_complex_normal(rng, (r_dim, 2)) / np.sqrt(2)
            rbars.append(b @ b.conj().T)
            factors.append(b)
        se_mmse = se_ls = 0.0
        for _ in range(trials):
            s = TRAINING_ALPHABET[rng.integers(0, 4, size=(m, n_f))]
            h = np.stack(
                [factors[i] @ standard_complex_normal(rng, 2) for i in range(m)]
            )
            r = np.einsum("m,mn,md->nd", np.sqrt(powers), s, h)
            r = r + np.sqrt(noise) * standard_complex_normal(rng, (n_f, r_dim))
            try:
                est_ls = joint_ls(r, s, powers)
            except EstimationError:
                continue
            est_mmse = joint_mmse(r, s, powers, rbars, noise)
            se_ls += float(np.sum(np.abs(est_ls - h) ** 2))
            se_mmse += float(np.sum(np.abs(est_mmse - h) ** 2))
        assert se_mmse <= se_ls


class TestIcsCmfAndDcc:
    def test_matched_filter_collapse(self):
        h = np.array([1.0 + 1j, -2j, 0.5])
        out = ics_cmf(h, np.sqrt(9.0) * h * 1.0)
        assert abs(out - 3.0 * np.vdot(h, h).real) < 1e-12

    def test_zero_and_linearity(self):
        rng = make_rng(16)
        h = standard_complex_normal(rng, 4)
        z1 = standard_complex_normal(rng, 4)
        z2 = standard_complex_normal(rng, 4)
        assert ics_cmf(h, np.zeros(4, dtype=complex)) == 0
        lhs = ics_cmf(h, 2.0 * z1 + 3j * z2)
        rhs = 2.0 * ics_cmf(h, z1) + 3j * ics_cmf(h, z2)
        assert abs(lhs - rhs) < 1e-12

    def test_align_perfect_knowledge(self):
        h = np.array([0.3 + 0.4j, -1.0j])
        e = 4.0
        symbols = TRAINING_ALPHABET[np.arange(4) % 4]
        stream = np.sqrt(e) * np.vdot(h, h).real * symbols
        aligned = dcc_align(stream, h, e, 0)
        np.testing.assert_allclose(aligned, symbols, atol=1e-12)

    def test_align_shifts_by_delay(self):
        h = np.array([1.0 + 0j])
        stream = np.arange(10, dtype=complex)
        out = dcc_align(stream, h, 1.0, 2)
        np.testing.assert_allclose(out, np.arange(2, 10), atol=1e-14)

    def test_align_scaling_linear(self):
        h = np.array([1.0, 1j])
        stream = np.array([1.0 + 1j, 2.0, -3j])
        a1 = dcc_align(stream, h, 2.0, 0)
        a2 = dcc_align((0.5 - 2j) * stream, h, 2.0, 0)
        np.testing.assert_allclose(a2, (0.5 - 2j) * a1, atol=1e-12)

    def test_align_zero_norm_raises(self):
        with pytest.raises(EstimationError):
            dcc_align(np.ones(3, dtype=complex), np.zeros(2, dtype=complex), 1.0, 0)

    def test_combine_passthrough(self):
        streams = [np.array([1.0, 2.0], dtype=complex), np.array([3.0, 4.0], dtype=complex)]
        out = dcc_combine(streams, np.eye(2), [0, 1])
        np.testing.assert_allclose(out[0], streams[0], atol=1e-15)
        np.testing.assert_allclose(out[1], streams[1], atol=1e-15)

    def test_combine_equal_multipath_halves_noise(self):
        rng = make_rng(17)
        trials = 10_000
        sym = TRAINING_ALPHABET[rng.integers(0, 4, size=trials)]
        n1 = standard_complex_normal(rng, trials)
        n2 = standard_complex_normal(rng, trials)
        out = dcc_combine(
            [sym + n1, sym + n2], np.array([[1.0], [1.0]]) * 0.5, [0, 0]
        )[0]
        resid_var = np.mean(np.abs(out - sym) ** 2)
        assert abs(resid_var - 0.5) < 0.05  # two equal paths halve the variance

    def test_combine_rejects_bad_support(self):
        streams = [np.ones(2, dtype=complex)] * 2
        with pytest.raises(ValueError):
            dcc_combine(streams, np.array([[0.5, 0.5], [0.5, 0.5]]), [0, 1])

    def test_combine_requires_unit_weight_sum(self):
        streams = [np.ones(2, dtype=complex)] * 2
        with pytest.raises(ValueError):
            dcc_combine(streams, np.array([[0.5], [0.4]]), [0, 0])
