"""Acceptance criteria, one test per numbered criterion.

Each test prints a PASS line once its assertions hold (shown under
pytest -s / -rA); tolerances are pinned here, not configurable.  The
heavy criteria share one 1000-path horizon-200 trajectory set through
the cache, so the suite stays at desk scale.
"""

import math
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from lyaplab import brownian as B
from lyaplab import cocycle as C
from lyaplab import grassmann as GR
from lyaplab import harmonic as H
from lyaplab import lyapunov as L
from lyaplab.geometry import HPoint, genus2_octagon
from lyaplab.grassmann import Subspace, fhat_form
from lyaplab.presets import (
    fuchsian_genus2,
    rank1_unimodular,
    schottky_rank2,
    unitary_rank2,
    weight1_vhs,
    weight2_1k1,
)

CFG_ACC = B.PathConfig(dt=0.02, horizon=200.0, rng_seed=90210)
N_ACC = 1000
CFG_SCHOTTKY = B.PathConfig(dt=0.02, horizon=120.0, rng_seed=777)

OCTAGON = genus2_octagon()


def ok(line: str) -> None:
    print(f"ACCEPTANCE {line}: PASS")


def test_criterion_1_linear_algebra_exactness():
    rng = np.random.default_rng(1001)
    # corrected exterior-norm identity on 100 random 5x5 complex matrices
    worst = 0.0
    for _ in range(100):
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        for r in range(1, 5):
            worst = max(worst, GR.corrected_norm_identity_residual(m, r))
    assert worst <= 1e-9

    # Plücker/intersection predicate vs the stacked-basis rank oracle,
    # 10^3 instances (half with a planted shared vector), zero disagreements
    n, k = 5, 2
    disagreements = 0
    for trial in range(1000):
        gb = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        fb = rng.standard_normal((n, n - k)) + 1j * rng.standard_normal((n, n - k))
        if trial % 2 == 0:
            shared = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            gb[:, 0] = shared
            fb[:, 0] = shared
        g = Subspace.from_spanning(gb)
        f = Subspace.from_spanning(fb)
        s = np.linalg.svd(np.hstack([g.basis, f.basis]), compute_uv=False)
        oracle = s[-1] <= 1e-8 * s[0]
        pred, _ = GR.intersects_nontrivially(g, f)
        pairing = GR.divisor_distance(GR.plucker_embed(g), fhat_form(f)) <= 1e-8
        if pred != oracle or pairing != oracle:
            disagreements += 1
    assert disagreements == 0

    # weight-3 type (1,1,1,1) example: span(v2+v3, v0+v1) is real isotropic
    h = GR.StructureForm("hermitian", np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex))
    s_mat = np.zeros((4, 4), dtype=complex)
    s_mat[0, 3] = s_mat[3, 0] = s_mat[1, 2] = s_mat[2, 1] = 1.0
    sigma = GR.StructureForm("real", s_mat)
    plane = Subspace.from_spanning(np.array([[0, 1], [0, 1], [1, 0], [1, 0]], dtype=complex))
    iso, r_iso = GR.isotropic(plane, h)
    real, r_real = GR.is_real_subspace(plane, sigma)
    assert iso and real and r_iso < 1e-12 and r_real < 1e-12
    ok("1 linear-algebra exactness")


def test_criterion_2_sampler_soundness():
    # Dynkin residual within 3 stderr for three test functions, t=1, 1e4 paths
    s2 = 0.35**2

    def bump(x, y):
        return np.exp(-((x - 0.1) ** 2 + (y - 1.2) ** 2) / (2 * s2))

    def bump_lap(x, y):
        f = bump(x, y)
        return y * y * (
            f * (((x - 0.1) / s2) ** 2 - 1 / s2) + f * (((y - 1.2) / s2) ** 2 - 1 / s2)
        )

    cases = [
        ("constant", lambda x, y: np.full_like(x, 1.7), lambda x, y: np.zeros_like(x)),
        ("harmonic", lambda x, y: x, lambda x, y: np.zeros_like(x)),
        ("gaussian bump", bump, bump_lap),
    ]
    for name, f, lap in cases:
        res, se = B.dynkin_residual(f, lap, HPoint(0.0, 1.0), 1.0, 10_000, dt=2e-3, seed=2002)
        assert abs(res) <= max(3 * se, 1e-12), name

    # escape rate 0.50 +- 0.02 at T=200, 1e3 paths
    rate, ci = B.escape_rate(B.PathConfig(dt=0.01, horizon=200.0, rng_seed=2003), 1000)
    assert abs(rate - 0.5) <= 0.02

    # sup-tail log slope at most -(1-0.15)/(4 t0)
    t0 = 1.0
    rs = np.linspace(1.2, 3.2, 9)
    probs, _ = B.sup_tail(B.PathConfig(dt=2e-3, horizon=t0, rng_seed=2004), rs, t0, 20_000)
    slope = B.log_tail_slope(rs, probs)
    assert slope <= -(1 - 0.15) / (4 * t0)
    ok("2 sampler soundness")


def test_criterion_3_degenerate_spectra():
    # unitary rank-2 and rank-1 presets at horizon 200, 1e3 paths
    for preset in (unitary_rank2(), rank1_unimodular()):
        est = L.estimate_spectrum(preset.representation, OCTAGON, CFG_ACC, N_ACC)
        for lam, ci in zip(est.lambdas, est.ci_half_widths):
            assert abs(lam) <= max(0.01, ci), preset.name
    ok("3 degenerate-spectrum correctness")


def test_criterion_4_spectrum_structure():
    # Fuchsian genus-2 spectrum within 10% of the escape-rate oracle (1/4, -1/4)
    fuchs = fuchsian_genus2().representation
    est = L.estimate_spectrum(fuchs, OCTAGON, CFG_ACC, N_ACC)
    assert est.lambdas[0] == pytest.approx(0.25, abs=0.025)
    assert est.lambdas[1] == pytest.approx(-0.25, abs=0.025)

    # symmetry residual within CI for every runnable preset
    for preset in (
        fuchsian_genus2(),
        unitary_rank2(),
        rank1_unimodular(),
        weight1_vhs(),
        weight2_1k1(),
        schottky_rank2(),
    ):
        spec = L.estimate_spectrum(preset.representation, OCTAGON, CFG_ACC, N_ACC)
        _, within = L.symmetry_residual(spec)
        assert within, preset.name

    # ... and for an Sp(4) random-word cocycle
    from test_lyapunov import iid_words, sp4_random_rep

    sp4 = sp4_random_rep(seed=44)
    word_spec = L.spectrum_from_word_samples(sp4, iid_words(400, 240, 2, 45), 240.0)
    _, within = L.symmetry_residual(word_spec)
    assert within

    # exterior-power consistency at k=2 on the rank-3 preset
    disc, joint = L.exterior_consistency(
        weight2_1k1().representation, OCTAGON, CFG_ACC, 2, N_ACC
    )
    assert disc <= joint
    ok("4 spectrum structure")


def test_criterion_5_degree_formula():
    # weight-1 preset: margin lambda_1 - pi*deg >= -CI and exact arithmetic identity
    w1 = weight1_vhs()
    report = H.degree_report(
        w1.representation, OCTAGON, CFG_ACC, w1.divisor.form(), w1.divisor.degree, N_ACC
    )
    assert report.delta_est >= -report.lambda_ci
    assert report.delta_est == report.lambda_sum_est - report.pi_deg
    assert abs((report.delta_est + report.pi_deg) - report.lambda_sum_est) <= 4 * math.ulp(
        max(abs(report.lambda_sum_est), abs(report.pi_deg))
    )

    # cross-estimator agreement on the strongly irreducible Fuchsian preset
    fuchs = fuchsian_genus2().representation
    sample = H.sample_fiber_measure(fuchs, OCTAGON, CFG_ACC, N_ACC)
    assert sample.converged
    val, ci = H.lambda_from_measure(fuchs, OCTAGON, sample, probe_dt=1.0, n_probes=16)
    top = L.estimate_top(fuchs, OCTAGON, CFG_ACC, N_ACC)
    assert abs(val - top.value) <= ci + top.ci_half_width
    ok("5 degree formula and cross-estimator agreement")


def test_criterion_6_support_divisor_criterion():
    schottky = schottky_rank2()
    rep = schottky.representation
    divisor = schottky.divisor.form()

    gap_1 = H.support_divisor_gap(
        H.sample_fiber_measure(rep, OCTAGON, CFG_SCHOTTKY, 500), divisor
    )
    gap_2 = H.support_divisor_gap(
        H.sample_fiber_measure(rep, OCTAGON, CFG_SCHOTTKY, 1000), divisor
    )
    assert gap_1.min_distance > 0.05
    assert gap_2.min_distance > 0.05
    assert abs(gap_2.min_distance - gap_1.min_distance) <= 0.25 * gap_1.min_distance

    # a generic (non-invariant) divisor with degree 0 gives delta > 3 CI
    rng = np.random.default_rng(606)
    random_line = Subspace.from_spanning(
        (rng.standard_normal(2) + 1j * rng.standard_normal(2)).reshape(2, 1)
    )
    report = H.degree_report(
        rep, OCTAGON, CFG_SCHOTTKY, fhat_form(random_line), Fraction(0), 1000
    )
    assert report.delta_est > 3 * report.lambda_ci
    assert report.verdict == "strict-inequality"
    ok("6 support-divisor criterion")


def test_criterion_7_poisson_kernel():
    rng = np.random.default_rng(707)
    # exact value at the centre
    for n in (1, 2, 3):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        u /= np.linalg.norm(u)
        assert H.poisson_kernel(np.zeros(n, dtype=complex), u, n) == 1.0

    # boundary-integral normalization within 3 sigma (n = 2)
    z = np.array([0.25 + 0.15j, -0.3 + 0.1j])
    us = rng.standard_normal((20_000, 2)) + 1j * rng.standard_normal((20_000, 2))
    us /= np.linalg.norm(us, axis=1)[:, None]
    vals = np.array([H.poisson_kernel(z, u, 2) for u in us])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - 1.0) <= 3 * se

    # n=1 pluriharmonicity residual <= 1e-4; n=2 Levi form dominates at 5 points
    lap1, levi1 = H.pluriharmonicity_residual(
        np.array([0.35 + 0.2j]), np.array([np.exp(0.4j)]), 1, 1e-3
    )
    assert lap1 <= 1e-4 and levi1 <= 1e-4
    for _ in range(5):
        zz = 0.25 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
        uu = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        uu /= np.linalg.norm(uu)
        lap2, levi2 = H.pluriharmonicity_residual(zz, uu, 2, 1e-3)
        assert lap2 <= 1e-3
        assert levi2 >= 10 * lap2
    ok("7 Poisson-kernel remark")


def test_criterion_8_determinism(tmp_path):
    config = Path(__file__).resolve().parent.parent / "configs" / "unitary_spectrum.toml"
    env_path = str(Path(__file__).resolve().parent.parent / "src")
    outputs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "lyaplab",
                "run",
                str(config),
                "spectrum",
                "--output-dir",
                str(out),
            ],
            capture_output=True,
            text=True,
            env={"PYTHONPATH": env_path, "PATH": "/usr/bin:/bin"},
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((out / "spectrum.csv").read_bytes())
    assert outputs[0] == outputs[1]
    ok("8 byte-identical determinism")
