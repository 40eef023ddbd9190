import numpy as np
import pytest
from scipy import integrate, stats

from ocpph import ErlangSpec, PhaseType, erlang_rep, validate
from ocpph.errors import DomainError, InvalidRepresentationError, TailUnderflowError

from conftest import quad_moment, random_ph


def general(ph):
    """Same representation without the Erlang fast path."""
    return PhaseType(ph.alpha, ph.T)


class TestValidation:
    def test_exponential(self):
        ph = validate([1.0], [[-1.0]])
        np.testing.assert_array_equal(ph.exit_vector, [1.0])

    @pytest.mark.parametrize(
        "alpha, T, invariant",
        [
            ([0.5, 0.5], [[-1.0, 2.0], [0.0, -1.0]], "T-row-sum"),
            ([1.2, -0.2], [[-1.0, 0.0], [0.0, -1.0]], "alpha-nonnegative"),
            ([0.5, 0.4], [[-1.0, 0.0], [0.0, -1.0]], "alpha-sum"),
            ([1.0, 0.0], [[1.0, 0.0], [0.0, -1.0]], "T-diagonal"),
            ([1.0, 0.0], [[-1.0, -0.5], [0.0, -1.0]], "T-offdiagonal"),
            ([1.0, 0.0], [[-1.0, 1.0], [1.0, -1.0]], "T-nonsingular"),
            ([1.0], [[-1.0, 0.0], [0.0, -1.0]], "order"),
            ([1.0, 0.0], [[-1.0, np.inf], [0.0, -1.0]], "T-finite"),
        ],
    )
    def test_reports_violated_invariant(self, alpha, T, invariant):
        with pytest.raises(InvalidRepresentationError) as info:
            validate(alpha, T)
        assert info.value.invariant == invariant

    def test_table_erlang_is_valid(self):
        ph = erlang_rep(ErlangSpec(14, 16.74531))
        assert ph.order == 14

    def test_immutable(self):
        ph = validate([1.0], [[-1.0]])
        with pytest.raises(ValueError):
            ph.T[0, 0] = -2.0

    def test_erlang_spec_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ErlangSpec(0, 1.0)
        with pytest.raises(ValueError):
            ErlangSpec(2, -1.0)


class TestErlangRep:
    def test_exponential(self):
        ph = erlang_rep(ErlangSpec(1, 3.0))
        np.testing.assert_array_equal(ph.alpha, [1.0])
        np.testing.assert_array_equal(ph.T, [[-3.0]])

    def test_two_phases(self):
        ph = erlang_rep(ErlangSpec(2, 2.0))
        np.testing.assert_array_equal(ph.T, [[-2.0, 2.0], [0.0, -2.0]])
        np.testing.assert_array_equal(ph.exit_vector, [0.0, 2.0])

    def test_table1_ph_row(self):
        ph = erlang_rep(ErlangSpec(200, 164.1767))
        assert ph.order == 200
        assert ph.exit_vector[-1] == 164.1767
        assert np.count_nonzero(ph.exit_vector) == 1


class TestMeasures:
    def test_exponential_closed_form(self):
        ph = erlang_rep(ErlangSpec(1, 2.0))
        assert ph.pdf(1.0) == pytest.approx(2 * np.exp(-2.0), rel=1e-14)
        assert ph.reliability(1.0) == pytest.approx(np.exp(-2.0), rel=1e-14)

    def test_erlang2_closed_form(self):
        ph = erlang_rep(ErlangSpec(2, 1.0))
        x = np.linspace(0, 10, 21)
        np.testing.assert_allclose(ph.pdf(x), x * np.exp(-x), rtol=1e-13, atol=1e-300)
        assert ph.pdf(2.0) == pytest.approx(0.270671, abs=1e-6)

    def test_boundary(self, rng):
        for ph in (random_ph(rng, 3), erlang_rep(ErlangSpec(4, 2.0))):
            assert ph.cdf(0.0) == 0.0
            assert ph.reliability(0.0) == 1.0

    def test_negative_time(self):
        ph = erlang_rep(ErlangSpec(2, 1.0))
        for fn in (ph.pdf, ph.cdf, ph.reliability, ph.hazard, ph.cum_hazard):
            with pytest.raises(DomainError):
                fn(-0.1)

    def test_cdf_plus_reliability(self, rng):
        ph = random_ph(rng, 4)
        x = np.linspace(0, 8, 33)
        np.testing.assert_array_equal(ph.cdf(x) + ph.reliability(x), 1.0)

    def test_reliability_nonincreasing(self, rng):
        ph = random_ph(rng, 5)
        r = ph.reliability(np.linspace(0, 10, 200))
        assert np.all(np.diff(r) <= 1e-15)

    def test_fast_path_matches_matrix_exponential(self):
        ph = erlang_rep(ErlangSpec(14, 16.74531))
        x = np.linspace(0, 2.5, 40)
        gen = general(ph)
        np.testing.assert_allclose(ph.pdf(x), gen.pdf(x), rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(ph.reliability(x), gen.reliability(x), rtol=1e-10, atol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_normalization(self, seed):
        ph = random_ph(np.random.default_rng(seed), 3 + seed)
        q = ph.quantile(1 - 1e-10)
        mass, _ = integrate.quad(ph.pdf, 0, q, epsabs=0, epsrel=1e-12, limit=200)
        assert mass + ph.reliability(q) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("seed", range(4))
    def test_density_is_derivative_of_cdf(self, seed):
        ph = random_ph(np.random.default_rng(10 + seed), 4)
        for x in (0.3, 1.0, 2.7, 6.0):
            h = 1e-5 * max(1.0, x)
            fd = (ph.cdf(x + h) - ph.cdf(x - h)) / (2 * h)
            assert fd == pytest.approx(ph.pdf(x), rel=1e-5)

    def test_quantile_inverts_cdf(self, rng):
        ph = random_ph(rng, 3)
        for p in (0.01, 0.5, 0.99, 1 - 1e-10):
            assert ph.cdf(ph.quantile(p)) == pytest.approx(p, abs=1e-11)


class TestHazard:
    def test_memoryless(self):
        ph = erlang_rep(ErlangSpec(1, 3.5))
        np.testing.assert_allclose(ph.hazard(np.linspace(0, 50, 11)), 3.5, rtol=1e-13)

    def test_cum_hazard_zero(self, rng):
        assert random_ph(rng, 3).cum_hazard(0.0) == 0.0

    def test_erlang2(self):
        # survival (1 + x) e^{-x}, density x e^{-x}
        assert erlang_rep(ErlangSpec(2, 1.0)).hazard(1.0) == pytest.approx(0.5, rel=1e-14)

    def test_cum_hazard_is_minus_log_reliability(self, rng):
        ph = random_ph(rng, 3)
        x = np.linspace(0, 5, 11)
        np.testing.assert_allclose(ph.cum_hazard(x), -np.log(ph.reliability(x)), rtol=1e-13)

    def test_tail_underflow(self):
        ph = erlang_rep(ErlangSpec(1, 1.0))
        assert ph.cum_hazard(600.0) == pytest.approx(600.0)
        with pytest.raises(TailUnderflowError):
            ph.hazard(800.0)
        with pytest.raises(TailUnderflowError):
            ph.cum_hazard(800.0)


class TestMoments:
    def test_erlang(self):
        ph = erlang_rep(ErlangSpec(2, 4.0))
        assert ph.mean() == pytest.approx(0.5, rel=1e-14)
        assert ph.sd() == pytest.approx(np.sqrt(2) / 4, rel=1e-12)

    def test_table4_ph_row(self):
        ph = erlang_rep(ErlangSpec(1, 2560.425))
        # 1 / 2560.425; the published table rounds it to 0.0004
        assert ph.mean() == pytest.approx(0.00039056016, rel=1e-9)
        assert round(ph.mean(), 4) == 0.0004

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_quadrature(self, rng, k):
        ph = random_ph(rng, 3)
        assert ph.moment(k) == pytest.approx(quad_moment(ph, k), rel=1e-6)

    def test_mgf(self, rng):
        ph = random_ph(rng, 3)
        t = 0.4 * ph.mgf_bound()
        # e^{tx} inflates the tail, so integrate much further out
        upper = ph.quantile(1 - 1e-15) * 3
        ref = quad_moment(ph, 0, upper=upper, weight=lambda x: np.exp(t * x))
        assert ph.mgf(0.0) == 1.0
        assert ph.mgf(t) == pytest.approx(ref, rel=1e-8)
        with pytest.raises(DomainError):
            ph.mgf(ph.mgf_bound())


class TestCharFn:
    def test_origin(self, rng):
        assert random_ph(rng, 4).char_fn(0.0) == pytest.approx(1.0 + 0j, abs=1e-14)

    def test_exponential(self):
        assert erlang_rep(ErlangSpec(1, 1.0)).char_fn(1.0) == pytest.approx(0.5 + 0.5j, abs=1e-15)

    def test_quadrature(self, rng):
        ph = random_ph(rng, 3)
        t = 0.7
        upper = ph.quantile(1 - 1e-13)
        re, _ = integrate.quad(lambda x: np.cos(t * x) * ph.pdf(x), 0, upper, epsabs=0, epsrel=1e-12, limit=400)
        im, _ = integrate.quad(lambda x: np.sin(t * x) * ph.pdf(x), 0, upper, epsabs=0, epsrel=1e-12, limit=400)
        assert abs(ph.char_fn(t) - complex(re, im)) <= 1e-7

    def test_hermitian_and_bounded(self, rng):
        ph = random_ph(rng, 5)
        for t in np.linspace(-50, 50, 201):
            phi = ph.char_fn(t)
            assert abs(phi) <= 1 + 1e-12
            assert ph.char_fn(-t) == pytest.approx(np.conj(phi), abs=1e-13)


class TestSampling:
    def test_deterministic(self, rng):
        ph = random_ph(rng, 4)
        np.testing.assert_array_equal(ph.sample(500, 7).values, ph.sample(500, 7).values)
        assert not np.array_equal(ph.sample(500, 7).values, ph.sample(500, 8).values)

    def test_nonnegative(self, rng):
        assert np.all(random_ph(rng, 4).sample(2000, 1).values >= 0)

    def test_erlang_mean(self):
        ph = erlang_rep(ErlangSpec(2, 4.0))
        N = 10**5
        sample = ph.sample(N, 11).values
        assert abs(sample.mean() - 0.5) <= 4 * ph.sd() / np.sqrt(N)

    def test_ks_table1_erlang(self):
        ph = erlang_rep(ErlangSpec(14, 16.74531))
        N = 10**5
        sample = ph.sample(N, 3).values
        d = stats.kstest(sample, ph.cdf).statistic
        assert d < 1.63 / np.sqrt(N) * 1.5

    def test_ks_general(self, rng):
        ph = random_ph(rng, 4)
        sample = ph.sample(20000, 5).values
        assert stats.kstest(sample, ph.cdf).pvalue > 0.01
