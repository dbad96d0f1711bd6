import math
import warnings

import numpy as np
import pytest

from lyaplab import cocycle as C
from lyaplab import grassmann as GR


def random_glc(rng, n, spread=1.0):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return m + spread * np.eye(n)


class TestRepresentation:
    def test_inverse_residual_enforced(self):
        bad = np.array([[1.0, 0.0], [0.0, 1e-200]], dtype=complex)
        with pytest.raises(ValueError):
            C.Representation(generators=(bad,), inverses=(np.eye(2, dtype=complex),))

    def test_form_violation_reports_index_and_residual(self):
        j = GR.StructureForm("hermitian", np.diag([1.0, -1.0]).astype(complex))
        g = np.diag([2.0, 1.0]).astype(complex)  # does not preserve J
        with pytest.raises(ValueError, match="generator 0.*residual"):
            C.Representation(generators=(g,), form=j)

    def test_signed_letters(self, fuchsian_rep):
        g = fuchsian_rep.generator(2)
        gi = fuchsian_rep.generator(-2)
        assert np.max(np.abs(g @ gi - np.eye(2))) < 1e-12


class TestTransport:
    def test_empty_word(self, fuchsian_rep):
        p = C.transport(fuchsian_rep, [])
        assert C.cocycle_norm_log(p) == 0.0
        assert np.allclose(p.unit, np.eye(2))

    def test_inverse_cancellation(self, fuchsian_rep):
        p = C.transport(fuchsian_rep, [1, -1])
        assert abs(C.cocycle_norm_log(p)) < 1e-10

    def test_prefix_matches_naive_product(self, fuchsian_rep, rng):
        word = [int(rng.integers(1, 5)) * int(rng.choice([-1, 1])) for _ in range(10_000)]
        prefix = word[:30]
        naive = np.eye(2, dtype=complex)
        for letter in prefix:
            naive = naive @ fuchsian_rep.generator(letter)
        t = C.transport(fuchsian_rep, prefix)
        got = math.exp(t.log_scale) * np.linalg.norm(t.unit, 2)
        want = np.linalg.norm(naive, 2)
        assert abs(got - want) / want < 1e-8
        # and the long word stays finite through rescaling
        long_t = C.transport(fuchsian_rep, word)
        assert math.isfinite(C.cocycle_norm_log(long_t))
        assert 0.5 <= np.linalg.norm(long_t.unit, 2) <= 2.0

    def test_unitary_word_norm_zero(self, unitary_rep, rng):
        word = [int(rng.integers(1, 5)) * int(rng.choice([-1, 1])) for _ in range(500)]
        assert abs(C.cocycle_norm_log(C.transport(unitary_rep, word))) < 1e-9

    def test_diagonal_singular_value(self):
        rep = C.Representation(generators=(np.diag([3.0, 1 / 3.0]).astype(complex),))
        assert C.cocycle_norm_log(C.transport(rep, [1])) == pytest.approx(math.log(3.0), abs=1e-12)

    def test_submultiplicative_on_splits(self, fuchsian_rep, rng):
        for _ in range(25):
            length = int(rng.integers(2, 40))
            word = [int(rng.integers(1, 5)) * int(rng.choice([-1, 1])) for _ in range(length)]
            cut = int(rng.integers(1, length))
            whole = C.cocycle_norm_log(C.transport(fuchsian_rep, word))
            left = C.cocycle_norm_log(C.transport(fuchsian_rep, word[:cut]))
            right = C.cocycle_norm_log(C.transport(fuchsian_rep, word[cut:]))
            assert whole <= left + right + 1e-8

    def test_vector_transport_matches_matrix(self, fuchsian_rep, rng):
        word = [int(rng.integers(1, 5)) * int(rng.choice([-1, 1])) for _ in range(40)]
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        v /= np.linalg.norm(v)
        u, log_norm = C.transport_vector(fuchsian_rep, word, v)
        m = np.eye(2, dtype=complex)
        for letter in word:
            m = m @ fuchsian_rep.generator(letter)
        want = m @ v
        assert abs(log_norm - math.log(np.linalg.norm(want))) < 1e-9
        phase_free = np.abs(np.vdot(u, want / np.linalg.norm(want)))
        assert phase_free == pytest.approx(1.0, abs=1e-9)


class TestExteriorPower:
    def test_top_power_is_determinant(self, fuchsian_rep):
        det_rep = C.exterior_power_rep(fuchsian_rep, 2)
        assert det_rep.n == 1
        for g, w in zip(fuchsian_rep.generators, det_rep.generators):
            assert w[0, 0] == pytest.approx(np.linalg.det(g), abs=1e-10)

    def test_identity_maps_to_identity(self):
        rep = C.Representation(generators=(np.eye(4, dtype=complex),))
        w = C.exterior_power_rep(rep, 2)
        assert np.allclose(w.generators[0], np.eye(6))

    def test_diagonal_products(self):
        rep = C.Representation(generators=(np.diag([2.0, 3.0, 5.0]).astype(complex),))
        w = C.exterior_power_rep(rep, 2)
        assert np.allclose(np.diag(w.generators[0]), [6.0, 10.0, 15.0])

    def test_functoriality(self, rng):
        a = random_glc(rng, 4)
        b = random_glc(rng, 4)
        for k in (2, 3):
            lhs = GR.compound_matrix(a @ b, k)
            rhs = GR.compound_matrix(a, k) @ GR.compound_matrix(b, k)
            denom = np.linalg.norm(GR.compound_matrix(a, k), 2) * np.linalg.norm(
                GR.compound_matrix(b, k), 2
            )
            assert np.max(np.abs(lhs - rhs)) <= 1e-8 * denom

    def test_norm_is_product_of_top_singular_values(self, rng):
        m = random_glc(rng, 5)
        s = np.linalg.svd(m, compute_uv=False)
        for k in (1, 2, 3, 4):
            got = np.linalg.norm(GR.compound_matrix(m, k), 2)
            want = float(np.prod(s[:k]))
            assert abs(got - want) / want < 1e-9

    def test_hermitian_form_transforms(self, weight1_preset):
        rep = weight1_preset.representation
        w = C.exterior_power_rep(rep, 2)
        assert w.form is not None and w.form.kind == "hermitian"
        for g in w.generators:
            assert C.form_residual(g, w.form) < 1e-8

    def test_symplectic_even_power_dropped(self, rng):
        j = np.zeros((4, 4))
        j[:2, 2:] = np.eye(2)
        j[2:, :2] = -np.eye(2)
        h = rng.standard_normal((4, 4))
        h = h + h.T
        g = __import__("scipy.linalg", fromlist=["expm"]).expm(j @ h * 0.2)
        rep = C.Representation(
            generators=(g.astype(complex),), form=GR.StructureForm("symplectic", j.astype(complex))
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            w = C.exterior_power_rep(rep, 2)
        assert w.form is None
        assert any("dropped" in str(c.message) for c in caught)

    def test_form_preserved_along_long_word(self, weight1_preset, rng):
        # M^H J M = J checked at unit scale: with M = e^s U the residual
        # per squared norm is ||U^H J U - e^{-2s} J||
        rep = weight1_preset.representation
        word = [int(rng.integers(1, 5)) * int(rng.choice([-1, 1])) for _ in range(1000)]
        t = C.transport(rep, word)
        j = rep.form.matrix
        shrink = math.exp(-2.0 * t.log_scale) if t.log_scale < 350 else 0.0
        resid = np.max(np.abs(t.unit.conj().T @ j @ t.unit - shrink * j))
        assert resid <= 1e-7


class TestDistanceNormBound:
    def test_unitary_is_zero(self, unitary_rep, octagon):
        assert C.distance_norm_bound_check(unitary_rep, octagon, 20, word_length=30) < 1e-12

    def test_fuchsian_ratio_half(self, fuchsian_rep, octagon):
        # ||g|| = exp(d(i, g·i)/2) for real unimodular matrices
        ratio = C.distance_norm_bound_check(fuchsian_rep, octagon, 40, word_length=60, seed=5)
        assert ratio == pytest.approx(0.5, abs=1e-6)

    def test_stability_under_doubling(self, fuchsian_rep, octagon):
        r1 = C.distance_norm_bound_check(fuchsian_rep, octagon, 30, word_length=40, seed=6)
        r2 = C.distance_norm_bound_check(fuchsian_rep, octagon, 60, word_length=40, seed=6)
        assert abs(r2 - r1) <= 0.10 * r1
