"""Random variates, Gibbs samplers, and chain summaries."""

import math

import numpy as np
import pytest
from scipy import integrate, special

from aupriors import (Chain, GibbsConfig, MassUnderflow, ProprietyViolation,
                      gibbs_ner, generate_ner, sample_inverse_gamma,
                      sample_truncated_gamma01, summarize)
from aupriors.gibbs import (_solve_lower, _solve_upper_t, balanced_stats,
                            effective_sample_size, run_chain_batch)
from aupriors.models.ner import NerDataset, NerModel


class TestInverseGamma:
    def test_mean_matches_moment(self):
        rng = np.random.Generator(np.random.Philox(21))
        draws = np.array([sample_inverse_gamma(3.0, 2.0, rng)
                          for _ in range(1_000_000)])
        # IG(3, 2): mean 1, variance 1
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 1.0) < 3.0 * se

    def test_positivity(self):
        rng = np.random.Generator(np.random.Philox(5))
        draws = [sample_inverse_gamma(27.0, 13.0, rng) for _ in range(1000)]
        assert min(draws) > 0.0

    def test_au_sigma_shape_at_m10_n5(self):
        # the sampler's variance-step shape for 50 units plus the prior's 2
        from aupriors.gibbs import _ratio_flavor_shapes
        a_rho, a_sig = _ratio_flavor_shapes("au", 10, 5)
        assert a_sig == 27.0
        assert a_rho == 6.0

    def test_invalid_parameters(self):
        rng = np.random.Generator(np.random.Philox(5))
        with pytest.raises(ValueError):
            sample_inverse_gamma(-1.0, 1.0, rng)


class TestTruncatedGamma:
    def test_mean_matches_quadrature(self):
        # (shape 6, rate 0.1) puts ~1e-10 mass on (0,1): inversion branch
        dens = lambda x: x ** 5 * np.exp(-0.1 * x)
        z, _ = integrate.quad(dens, 0.0, 1.0)
        mean_oracle = integrate.quad(lambda x: x * dens(x), 0.0, 1.0)[0] / z
        rng = np.random.Generator(np.random.Philox(22))
        draws = np.array([sample_truncated_gamma01(6.0, 0.1, rng)
                          for _ in range(1_000_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - mean_oracle) < 3.0 * se

    def test_rejection_branch_mean(self):
        # (shape 2, rate 4) keeps ~0.9 of the mass inside: rejection branch
        dens = lambda x: x * np.exp(-4.0 * x)
        z, _ = integrate.quad(dens, 0.0, 1.0)
        mean_oracle = integrate.quad(lambda x: x * dens(x), 0.0, 1.0)[0] / z
        assert special.gammainc(2.0, 4.0) > 0.1
        rng = np.random.Generator(np.random.Philox(23))
        draws = np.array([sample_truncated_gamma01(2.0, 4.0, rng)
                          for _ in range(200_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - mean_oracle) < 3.0 * se

    def test_draws_strictly_inside_unit_interval(self):
        rng = np.random.Generator(np.random.Philox(24))
        for shape, rate in ((6.0, 0.1), (2.0, 4.0), (0.5, 1.0)):
            draws = [sample_truncated_gamma01(shape, rate, rng)
                     for _ in range(2000)]
            assert 0.0 < min(draws) and max(draws) < 1.0

    def test_mass_underflow(self):
        rng = np.random.Generator(np.random.Philox(25))
        with pytest.raises(MassUnderflow):
            sample_truncated_gamma01(800.0, 1.0, rng)


class TestTriangularSolves:
    def test_match_reference_solver(self):
        rng = np.random.Generator(np.random.Philox(31))
        A = rng.standard_normal((4, 4))
        M = A @ A.T + 4.0 * np.eye(4)
        L = np.linalg.cholesky(M)
        b = rng.standard_normal(4)
        np.testing.assert_allclose(_solve_lower(L, b), np.linalg.solve(L, b),
                                   rtol=1e-12)
        np.testing.assert_allclose(_solve_upper_t(L, b), np.linalg.solve(L.T, b),
                                   rtol=1e-12)

    def test_batch_matches_scalar(self):
        rng = np.random.Generator(np.random.Philox(32))
        A = rng.standard_normal((3, 3))
        L = np.linalg.cholesky(A @ A.T + 3.0 * np.eye(3))
        B = rng.standard_normal((5, 3))
        batched = _solve_lower(L, B)
        for i in range(5):
            np.testing.assert_array_equal(batched[i], _solve_lower(L, B[i]))


class TestGibbsNer:
    def test_deterministic_given_seed(self, small_balanced_data):
        cfg = GibbsConfig(n_draws=400, warmup=50, seed=123, flavor="au")
        a = gibbs_ner(small_balanced_data, cfg)
        b = gibbs_ner(small_balanced_data, cfg)
        np.testing.assert_array_equal(a.draws, b.draws)

    @pytest.mark.parametrize("flavor", ("au", "jeffreys", "dg"))
    def test_support_constraints(self, small_balanced_data, flavor):
        cfg = GibbsConfig(n_draws=500, warmup=50, seed=9, flavor=flavor)
        chain = gibbs_ner(small_balanced_data, cfg)
        assert np.all(chain.draws[:, 2] > 0.0)   # tau2
        assert np.all(chain.draws[:, 3] > 0.0)   # sigma2
        assert chain.draws.shape == (500, 4)
        assert chain.param_names == ("beta1", "beta2", "tau2", "sigma2")

    @pytest.mark.parametrize("flavor", ("au", "jeffreys", "dg"))
    def test_batched_lanes_match_solo_runs(self, flavor):
        model = NerModel.balanced_design(8, 5, p=2, seed=3)
        theta = [1.0, 1.0, 1.0, 1.0]
        cfg = GibbsConfig(n_draws=250, warmup=20, flavor=flavor)

        def stream(rep):
            return np.random.Generator(
                np.random.Philox(np.random.SeedSequence((9, 1, 8, rep))))

        gens, stats = [], []
        for rep in range(4):
            g = stream(rep)
            stats.append(balanced_stats(generate_ner(model, theta, g)))
            gens.append(g)
        draws, failed, _ = run_chain_batch(stats, gens, cfg)
        assert not failed.any()
        for rep in range(4):
            g = stream(rep)
            solo = gibbs_ner(generate_ner(model, theta, g), cfg, g)
            np.testing.assert_array_equal(solo.draws, draws[rep])

    def test_unbalanced_data_rejected(self):
        model = NerModel.from_unit_counts([2, 3, 4], p=1, seed=1)
        data = generate_ner(model, [1.0, 1.0, 1.0],
                            np.random.Generator(np.random.Philox(3)))
        with pytest.raises(ValueError):
            gibbs_ner(data, GibbsConfig(flavor="au"))

    def test_propriety_violation(self):
        # constant covariates within every area: aggregate scatter singular
        n, m = 5, 4
        x = tuple(np.full((n, 2), float(i + 1)) for i in range(m))
        rng = np.random.Generator(np.random.Philox(77))
        y = tuple(rng.standard_normal(n) for _ in range(m))
        data = NerDataset(y=y, x=x)
        with pytest.raises(ProprietyViolation):
            gibbs_ner(data, GibbsConfig(flavor="au"))

    def test_dg_skips_propriety_gate(self):
        # constant within areas (fails the improper-prior gate) but varying
        # across areas, so the overall design keeps full column rank
        n, m = 5, 4
        x = tuple(np.tile([float(i + 1), float(i + 1) ** 2], (n, 1))
                  for i in range(m))
        rng = np.random.Generator(np.random.Philox(77))
        y = tuple(rng.standard_normal(n) for _ in range(m))
        data = NerDataset(y=y, x=x)
        with pytest.raises(ProprietyViolation):
            gibbs_ner(data, GibbsConfig(flavor="au"))
        chain = gibbs_ner(data, GibbsConfig(n_draws=200, warmup=20, seed=1,
                                            flavor="dg"))
        assert np.isfinite(chain.draws).all()

    def test_dg_rank_deficient_design_rejected(self):
        n, m = 5, 4
        x = tuple(np.full((n, 2), float(i + 1)) for i in range(m))
        rng = np.random.Generator(np.random.Philox(78))
        y = tuple(rng.standard_normal(n) for _ in range(m))
        with pytest.raises(ProprietyViolation):
            gibbs_ner(NerDataset(y=y, x=x),
                      GibbsConfig(n_draws=200, warmup=20, seed=1, flavor="dg"))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GibbsConfig(flavor="laplace")
        with pytest.raises(ValueError):
            GibbsConfig(a_tau=0.0)


class TestConditionalMoments:
    """Each full-conditional sampler reproduces its distribution's first two
    moments with the other blocks frozen."""

    N = 100_000

    def test_coefficient_conditional(self, small_balanced_data):
        stats = balanced_stats(small_balanced_data)
        rho, sigma2 = 0.4, 1.3
        lam = 1.0 - rho
        prec = (stats.gram - (lam / stats.n) * stats.gram_sums) / sigma2
        rhs = (stats.xty - (lam / stats.n) * stats.xty_sums) / sigma2
        mean = np.linalg.solve(prec, rhs)
        cov = np.linalg.inv(prec)
        L = np.linalg.cholesky(prec)
        rng = np.random.Generator(np.random.Philox(40))
        z = rng.standard_normal((self.N, 2))
        draws = mean + _solve_upper_t(L, z)
        se_mean = np.sqrt(np.diag(cov) / self.N)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 3.0 * se_mean)
        emp_cov = np.cov(draws.T)
        se_cov = np.abs(cov) * math.sqrt(2.0 / self.N) + 1e-12
        assert np.all(np.abs(emp_cov - cov) < 4.0 * se_cov)

    def test_ratio_conditional(self):
        shape, rate = 6.0, 2.5
        dens = lambda x: x ** (shape - 1.0) * np.exp(-rate * x)
        z = integrate.quad(dens, 0.0, 1.0)[0]
        m1 = integrate.quad(lambda x: x * dens(x), 0.0, 1.0)[0] / z
        m2 = integrate.quad(lambda x: x * x * dens(x), 0.0, 1.0)[0] / z
        rng = np.random.Generator(np.random.Philox(41))
        draws = np.array([sample_truncated_gamma01(shape, rate, rng)
                          for _ in range(self.N)])
        se1 = draws.std(ddof=1) / math.sqrt(self.N)
        se2 = (draws ** 2).std(ddof=1) / math.sqrt(self.N)
        assert abs(draws.mean() - m1) < 3.0 * se1
        assert abs((draws ** 2).mean() - m2) < 3.0 * se2

    def test_variance_conditional(self):
        shape, scale = 27.0, 31.0
        m1 = scale / (shape - 1.0)
        m2 = scale ** 2 / ((shape - 1.0) * (shape - 2.0))
        rng = np.random.Generator(np.random.Philox(42))
        draws = np.array([sample_inverse_gamma(shape, scale, rng)
                          for _ in range(self.N)])
        se1 = draws.std(ddof=1) / math.sqrt(self.N)
        se2 = (draws ** 2).std(ddof=1) / math.sqrt(self.N)
        assert abs(draws.mean() - m1) < 3.0 * se1
        assert abs((draws ** 2).mean() - m2) < 3.0 * se2

    def test_area_effect_conditional(self, small_balanced_data):
        stats = balanced_stats(small_balanced_data)
        beta = np.array([1.0, 1.0])
        tau2, sigma2 = 0.8, 1.2
        resid = stats.area_y_sums - stats.area_x_sums @ beta
        prec = stats.n / sigma2 + 1.0 / tau2
        mean = (resid / sigma2) / prec
        rng = np.random.Generator(np.random.Philox(43))
        draws = mean + math.sqrt(1.0 / prec) * rng.standard_normal(
            (self.N, stats.m))
        se = math.sqrt(1.0 / prec / self.N)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 3.0 * se)


class TestSummaries:
    def test_iid_chain_ess_near_nominal(self):
        rng = np.random.Generator(np.random.Philox(50))
        x = rng.standard_normal(10_000)
        assert 8000 <= effective_sample_size(x) <= 12_000

    def test_constant_chain_convention(self):
        x = np.full(500, 3.3)
        assert effective_sample_size(x) == 500.0
        chain = Chain(draws=np.tile(x[:, None], (1, 2)), warmup=0, seed=None,
                      param_names=("a", "b"))
        s = summarize(chain)
        assert s.lower[0] == s.upper[0] == 3.3
        np.testing.assert_array_equal(s.ess, [500.0, 500.0])

    def test_ar1_chain_ess(self):
        rng = np.random.Generator(np.random.Philox(51))
        n, rho = 10_000, 0.5
        x = np.empty(n)
        x[0] = rng.standard_normal()
        innov = math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        for i in range(1, n):
            x[i] = rho * x[i - 1] + innov[i]
        ess = effective_sample_size(x)
        assert abs(ess - n / 3.0) < 0.2 * (n / 3.0)

    def test_equal_tailed_interval(self):
        rng = np.random.Generator(np.random.Philox(52))
        draws = rng.standard_normal((20_000, 1))
        chain = Chain(draws=draws, warmup=0, seed=None, param_names=("z",))
        s = summarize(chain)
        assert s.lower[0] == pytest.approx(-1.96, abs=0.05)
        assert s.upper[0] == pytest.approx(1.96, abs=0.05)

    def test_short_chain_rejected(self):
        chain = Chain(draws=np.zeros((50, 1)), warmup=0, seed=None,
                      param_names=("z",))
        with pytest.raises(ValueError):
            summarize(chain)
