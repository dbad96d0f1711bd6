import math

import numpy as np
import pytest
from scipy.linalg import expm

from lyaplab import cocycle as C
from lyaplab import lyapunov as L
from lyaplab.brownian import PathConfig
from lyaplab.grassmann import StructureForm

from conftest import CFG_MED, N_MED


def sp4_random_rep(seed=0, scale=0.4):
    """Two random symplectic generators exp(J·S) with S symmetric."""
    rng = np.random.default_rng(seed)
    j = np.zeros((4, 4))
    j[:2, 2:] = np.eye(2)
    j[2:, :2] = -np.eye(2)
    gens = []
    for _ in range(2):
        s = rng.standard_normal((4, 4))
        s = s + s.T
        gens.append(expm(scale * j @ s).astype(complex))
    return C.Representation(
        generators=tuple(gens), form=StructureForm("symplectic", j.astype(complex))
    )


def iid_words(n_words, length, n_letters, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_words):
        out.append(
            [int(rng.integers(1, n_letters + 1)) * int(rng.choice([-1, 1])) for _ in range(length)]
        )
    return out


class TestFrameMachinery:
    def test_qr_positive_diagonal(self, rng):
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        q, r = L.qr_positive(m)
        assert np.allclose(q @ r, m)
        d = np.diag(r)
        assert np.all(np.abs(d.imag) < 1e-12) and np.all(d.real > 0)
        assert np.max(np.abs(q.conj().T @ q - np.eye(4))) < 1e-12

    def test_batched_matches_scalar(self, fuchsian_rep, rng):
        words = iid_words(6, 37, 4, 3)
        batch_top = L._batched_top_logs(fuchsian_rep, words)
        batch_qr = L._batched_qr_logs(fuchsian_rep, words, 16)
        for i, w in enumerate(words):
            scalar_top = C.cocycle_norm_log(C.transport(fuchsian_rep, w))
            assert batch_top[i] == pytest.approx(scalar_top, abs=1e-10)
            scalar_qr = L.spectrum_from_word(fuchsian_rep, w, 16)
            assert np.max(np.abs(np.sort(batch_qr[i]) - np.sort(scalar_qr))) < 1e-10

    def test_window_letters(self):
        from lyaplab.brownian import TrajectorySummary
        from lyaplab.geometry import HPoint

        s = TrajectorySummary((1, -2, 3), (0.5, 1.5, 2.5), HPoint(0, 1), 3.0, 1.0)
        assert L.window_letters(s, 0.0, 3.0) == [1, -2, 3]
        assert L.window_letters(s, 1.0, 3.0) == [-2, 3]
        assert L.window_letters(s, 0.5, 2.0) == [-2]


class TestEstimates:
    def test_identity_rep_is_exactly_zero(self, octagon):
        rep = C.Representation(generators=tuple(np.eye(2, dtype=complex) for _ in range(4)))
        top = L.estimate_top(rep, octagon, CFG_MED, 40)
        assert top.value == 0.0
        assert top.ci_half_width == 0.0

    def test_rank1_unimodular_is_zero(self, rank1_rep, octagon):
        top = L.estimate_top(rank1_rep, octagon, CFG_MED, 60)
        assert abs(top.value) <= max(0.01, top.ci_half_width)
        assert abs(top.value) < 1e-12

    def test_unitary_spectrum_vanishes(self, unitary_rep, octagon):
        est = L.estimate_spectrum(unitary_rep, octagon, CFG_MED, 60)
        for lam, ci in zip(est.lambdas, est.ci_half_widths):
            assert abs(lam) <= max(1e-10, ci)

    def test_fuchsian_top_near_quarter(self, fuchsian_rep, octagon):
        top = L.estimate_top(fuchsian_rep, octagon, CFG_MED, N_MED)
        assert top.value == pytest.approx(0.25, abs=0.025)

    def test_fuchsian_spectrum_symmetric_quarter(self, fuchsian_rep, octagon):
        est = L.estimate_spectrum(fuchsian_rep, octagon, CFG_MED, N_MED)
        assert est.lambdas[0] == pytest.approx(0.25, abs=0.025)
        assert est.lambdas[1] == pytest.approx(-0.25, abs=0.025)
        residual, ok = L.symmetry_residual(est)
        assert ok and residual < 1e-10  # unimodular: exact per-path cancellation

    def test_block_diagonal_top_matches_block(self, fuchsian_rep, octagon):
        phases = (0.9, 1.7, 1.7, 0.9)
        gens = []
        for g, t in zip(fuchsian_rep.generators, phases):
            m = np.zeros((3, 3), dtype=complex)
            m[:2, :2] = g
            m[2, 2] = np.exp(1j * t)
            gens.append(m)
        block = C.Representation(generators=tuple(gens))
        top_block = L.estimate_top(block, octagon, CFG_MED, 120)
        top_plain = L.estimate_top(fuchsian_rep, octagon, CFG_MED, 120)
        assert abs(top_block.value - top_plain.value) <= max(
            top_block.ci_half_width + top_plain.ci_half_width, 1e-10
        )

    def test_horizon_precondition(self, fuchsian_rep, octagon):
        with pytest.raises(ValueError):
            L.estimate_top(fuchsian_rep, octagon, PathConfig(dt=0.02, horizon=50.0, rng_seed=1), 20)

    def test_seed_determinism(self, fuchsian_rep, octagon):
        a = L.estimate_spectrum(fuchsian_rep, octagon, CFG_MED, 60)
        b = L.estimate_spectrum(fuchsian_rep, octagon, CFG_MED, 60)
        assert a.lambdas == b.lambdas and a.ci_half_widths == b.ci_half_widths

    def test_monotone_ordering_enforced(self, fuchsian_rep, octagon):
        est = L.estimate_spectrum(fuchsian_rep, octagon, CFG_MED, 60)
        assert all(est.lambdas[i] >= est.lambdas[i + 1] for i in range(len(est.lambdas) - 1))

    def test_kingman_horizon_doubling(self, fuchsian_rep, octagon):
        # doubling the horizon at fixed total path time moves the estimate
        # by less than the joint CI
        short = L.estimate_top(fuchsian_rep, octagon, CFG_MED, 200)
        long_cfg = PathConfig(dt=CFG_MED.dt, horizon=2 * CFG_MED.horizon, rng_seed=CFG_MED.rng_seed)
        long = L.estimate_top(fuchsian_rep, octagon, long_cfg, 100)
        assert abs(short.value - long.value) <= short.ci_half_width + long.ci_half_width


class TestSymmetry:
    def test_sp4_word_cocycle_against_bruteforce(self):
        rep = sp4_random_rep(seed=4)
        # brute-force oracle: per-word singular values of the plain product
        words12 = iid_words(2000, 12, 2, 11)
        logs = np.empty((len(words12), 4))
        for i, w in enumerate(words12):
            m = np.eye(4, dtype=complex)
            for letter in w:
                m = m @ rep.generator(letter)
            logs[i] = np.log(np.linalg.svd(m, compute_uv=False)) / 12.0
        oracle = logs.mean(axis=0)
        oracle_ci = 1.96 * logs.std(axis=0, ddof=1) / math.sqrt(len(words12))
        # QR pipeline on longer iid words
        est = L.spectrum_from_word_samples(rep, iid_words(400, 240, 2, 12), 240.0)
        # symplectic pairing holds for both
        for i in (0, 1):
            assert abs(oracle[i] + oracle[3 - i]) <= 2 * (oracle_ci[i] + oracle_ci[3 - i])
        residual, ok = L.symmetry_residual(est)
        assert ok

    def test_sp4_exact_sv_pairing(self):
        # symplectic singular values pair exactly at every length
        rep = sp4_random_rep(seed=5)
        m = np.eye(4, dtype=complex)
        for letter in (1, 2, -1, 2, 2, -2, 1, 1):
            m = m @ rep.generator(letter)
        s = np.linalg.svd(m, compute_uv=False)
        assert s[0] * s[3] == pytest.approx(1.0, rel=1e-10)
        assert s[1] * s[2] == pytest.approx(1.0, rel=1e-10)


class TestExteriorConsistency:
    def test_k_equals_n_unimodular(self, fuchsian_rep, octagon):
        disc, joint = L.exterior_consistency(fuchsian_rep, octagon, CFG_MED, 2, 100)
        assert disc <= max(joint, 1e-9)

    def test_k1_is_sharp(self, fuchsian_rep, octagon):
        disc, joint = L.exterior_consistency(fuchsian_rep, octagon, CFG_MED, 1, 100)
        assert disc <= joint

    def test_rank3_k2(self, weight2_preset, octagon):
        disc, joint = L.exterior_consistency(
            weight2_preset.representation, octagon, CFG_MED, 2, N_MED
        )
        assert disc <= joint

    def test_dimension_cap(self, octagon):
        rep = C.Representation(generators=tuple(np.eye(16, dtype=complex) for _ in range(4)))
        with pytest.raises(ValueError):
            L.exterior_consistency(rep, octagon, CFG_MED, 8, 10, dim_cap=4096)
