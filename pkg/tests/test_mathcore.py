import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsnoise.mathcore import (
    AccuracyError,
    NotPositiveDefiniteError,
    RandomStream,
    SpdMatrix,
    eigen_sym,
    integrate_nd,
    ln_gamma,
    tri_factor_inverse,
    upsilon,
)

from _oracles import charpoly_eigenvalues_5x5, upsilon_direct_integral, wallis_piecewise_upsilon
from conftest import TOEPLITZ_2, TOEPLITZ_5

# reference values computed with 30-digit arbitrary precision arithmetic
LGAMMA_REFERENCE = {
    1e-3: 6.90717888538385368251234466808,
    0.5: 0.572364942924700087071713675677,
    3.7: 1.42807232666538792187238112505,
    7.5: 7.53436423675873295515836763244,
    1e3: 5905.22042320918121182607691236,
}


class TestLnGamma:
    def test_at_one(self):
        assert ln_gamma(1.0) == 0.0

    def test_half_is_log_sqrt_pi(self):
        assert ln_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-15)

    @pytest.mark.parametrize("x,expected", sorted(LGAMMA_REFERENCE.items()))
    def test_reference_values(self, x, expected):
        assert ln_gamma(x) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            ln_gamma(bad)

    @given(st.floats(min_value=0.1, max_value=50.0))
    @settings(max_examples=200, deadline=None)
    def test_recurrence(self, x):
        ratio = math.exp(ln_gamma(x + 1.0)) / math.exp(ln_gamma(x))
        assert ratio == pytest.approx(x, rel=1e-10)


class TestUpsilon:
    def test_anchor_values(self):
        assert upsilon(2) == pytest.approx(2.0, rel=1e-15)
        assert upsilon(3) == pytest.approx(2.0 * math.pi, rel=1e-15)
        assert upsilon(4) == pytest.approx(4.0 * math.pi, rel=1e-15)
        assert upsilon(5) == pytest.approx(2.0 * math.pi**2, rel=1e-14)

    @pytest.mark.parametrize("p", range(2, 9))
    def test_matches_wallis_piecewise(self, p):
        assert upsilon(p) == pytest.approx(wallis_piecewise_upsilon(p), rel=1e-12)

    @pytest.mark.parametrize("p", range(2, 9))
    def test_matches_direct_integration(self, p):
        assert upsilon(p) == pytest.approx(upsilon_direct_integral(p), rel=1e-9)

    @pytest.mark.parametrize("p", [1, 0, -3, 2.5])
    def test_domain_errors(self, p):
        with pytest.raises(ValueError):
            upsilon(p)


class TestSpdMatrix:
    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            SpdMatrix([[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            SpdMatrix(np.ones((2, 3)))

    def test_symmetrization_is_exact(self):
        m = SpdMatrix([[2.0, 0.3 + 1e-14], [0.3, 1.0]])
        assert np.array_equal(m.entries, m.entries.T)

    def test_factor_consistency(self):
        m = SpdMatrix(TOEPLITZ_5)
        rebuilt = m.chol_lower @ m.chol_lower.T
        assert np.abs(rebuilt - m.entries).max() <= 1e-12
        lam, basis = m.eigenvalues, m.eigen_basis
        rebuilt = basis.T @ np.diag(lam) @ basis
        assert np.abs(rebuilt - m.entries).max() <= 1e-12

    def test_entries_read_only(self):
        m = SpdMatrix(np.eye(3))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 2.0


class TestEigenSym:
    def test_identity(self):
        lam, basis = eigen_sym(SpdMatrix(np.eye(3)))
        assert np.allclose(lam, 1.0)
        assert np.abs(basis @ basis.T - np.eye(3)).max() <= 1e-12

    def test_two_by_two(self):
        lam, _ = eigen_sym(SpdMatrix(TOEPLITZ_2))
        assert lam == pytest.approx([1.7, 0.3], rel=1e-14)

    def test_five_by_five_against_charpoly_roots(self):
        lam, _ = eigen_sym(SpdMatrix(TOEPLITZ_5))
        assert lam == pytest.approx(charpoly_eigenvalues_5x5(), rel=1e-12)

    def test_descending_order_and_reconstruction(self):
        rng = np.random.default_rng(5)
        for dim in (2, 3, 5, 8):
            a = rng.standard_normal((dim, dim))
            m = SpdMatrix(a @ a.T + dim * np.eye(dim))
            lam, basis = eigen_sym(m)
            assert np.all(np.diff(lam) <= 0)
            assert np.abs(basis.T @ np.diag(lam) @ basis - m.entries).max() <= 1e-10
            assert np.abs(basis @ basis.T - np.eye(dim)).max() <= 1e-12


class TestTriFactorInverse:
    def test_identity(self):
        assert np.allclose(tri_factor_inverse(SpdMatrix(np.eye(4))), np.eye(4))

    def test_diagonal(self):
        r = tri_factor_inverse(SpdMatrix(np.diag([4.0, 9.0])))
        assert np.allclose(r, np.diag([0.5, 1.0 / 3.0]))

    def test_reconstructs_inverse(self):
        m = SpdMatrix(TOEPLITZ_2)
        r = tri_factor_inverse(m)
        assert np.abs(r.T @ r - np.linalg.inv(m.entries)).max() <= 1e-10

    def test_upper_triangular_with_single_last_row_entry(self):
        m = SpdMatrix(TOEPLITZ_5)
        r = tri_factor_inverse(m)
        assert np.abs(np.tril(r, -1)).max() == 0.0
        assert np.abs(r[-1, :-1]).max() == 0.0
        assert r[-1, -1] == pytest.approx(1.0 / math.sqrt(m.entries[-1, -1]), rel=1e-12)

    def test_quad_form_identity(self):
        rng = np.random.default_rng(17)
        m = SpdMatrix(TOEPLITZ_5)
        r = tri_factor_inverse(m)
        inv = np.linalg.inv(m.entries)
        for _ in range(50):
            x = rng.standard_normal(5) * rng.uniform(0.1, 100)
            lhs = float(np.sum((r @ x) ** 2))
            rhs = float(x @ inv @ x)
            assert abs(lhs - rhs) <= 1e-9 * (1.0 + rhs)


class TestIntegrateNd:
    def test_gaussian_integral(self):
        val, err = integrate_nd(lambda x: np.exp(-x[:, 0] ** 2), 1, tol=1e-10)
        assert val == pytest.approx(math.sqrt(math.pi), abs=1e-8)
        assert err <= 1e-10

    def test_cauchy_normalization(self):
        val, _ = integrate_nd(lambda x: 1.0 / (1.0 + x[:, 0] ** 2), 1, tol=1e-10)
        assert val == pytest.approx(math.pi, abs=1e-8)

    def test_two_dim_gaussian(self):
        val, _ = integrate_nd(
            lambda x: np.exp(-np.sum(x**2, axis=1)), 2, tol=1e-9
        )
        assert val == pytest.approx(math.pi, abs=1e-7)

    def test_finite_box(self):
        val, _ = integrate_nd(
            lambda x: x[:, 0] * 0 + 1.0, 2, bounds=[(0, 2), (0, 3)], tol=1e-10
        )
        assert val == pytest.approx(6.0, rel=1e-10)

    def test_budget_exhaustion_raises(self):
        with pytest.raises(AccuracyError) as exc:
            integrate_nd(
                lambda x: np.cos(40.0 * x[:, 0]) / (1.0 + x[:, 0] ** 2),
                1,
                tol=1e-14,
                max_subdivisions=3,
            )
        assert math.isfinite(exc.value.estimate)

    def test_dimension_guard(self):
        with pytest.raises(ValueError):
            integrate_nd(lambda x: x[:, 0], 4)


class TestRandomStream:
    def test_bit_reproducibility(self):
        a = RandomStream(123, 7).generator.standard_normal(64)
        b = RandomStream(123, 7).generator.standard_normal(64)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RandomStream(123, 0).generator.standard_normal(64)
        b = RandomStream(123, 1).generator.standard_normal(64)
        assert not np.array_equal(a, b)

    def test_substream_offsets_id(self):
        s = RandomStream(9, 4).substream(3)
        assert (s.seed, s.stream_id) == (9, 7)

    def test_cross_stream_independence(self):
        # correlation between two substreams over many draws stays tiny
        a = RandomStream(1, 0).generator.standard_normal(200_000)
        b = RandomStream(1, 1).generator.standard_normal(200_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
