"""Parameter-space primitives, finite differences, and the tensor contract."""

import numpy as np
import pytest

from aupriors import (DomainViolation, RectDomain, TensorTolerance, check_spd,
                      fd_gradient, get_model, verify_information_identity)
from aupriors.tensors import DerivativeBundle, fd_matrix_derivative

from conftest import interior_points
from oracles import (bernoulli_nodes, gamma_nodes, ner_tensor_oracle,
                     normal_locscale_nodes, normal_meanvar_nodes,
                     tensor_oracle)

IID_IDS = ("binomial", "normal-meanvar", "normal-locscale", "gamma")


class TestRectDomain:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            RectDomain(lower=(1.0,), upper=(0.0,))

    def test_unbounded_sides_never_produce_nan(self):
        dom = RectDomain(lower=(None, 0.0), upper=(None, None))
        assert dom.contains([1e308, 1.0], margin=[1.0, 0.5])
        assert not dom.contains([0.0, 0.5], margin=1.0)

    def test_margin_check(self):
        dom = RectDomain(lower=(0.0,), upper=(1.0,))
        assert dom.contains([0.5], margin=0.4)
        assert not dom.contains([0.01], margin=0.05)
        with pytest.raises(DomainViolation):
            dom.require_interior([0.01], margin=0.05)


class TestTolerance:
    def test_positive_fields_enforced(self):
        with pytest.raises(ValueError):
            TensorTolerance(rel=0.0)

    def test_steps_scale_with_magnitude(self, tol):
        steps = tol.steps(np.array([0.0, 9.0]))
        assert steps[1] == pytest.approx(10.0 * steps[0])


class TestFdGradient:
    def test_quadratic_exact(self, tol):
        grad = fd_gradient(lambda th: th[0] ** 2, [3.0], tol)
        np.testing.assert_allclose(grad, [6.0], rtol=1e-8)

    def test_variance_log_prior_gradient(self, tol):
        # d/d(mu, v) of -2 log v at (0, 1)
        grad = fd_gradient(lambda th: -2.0 * np.log(th[1]), [0.0, 1.0], tol)
        np.testing.assert_allclose(grad, [0.0, -2.0], atol=1e-8)

    def test_constant_field(self, tol):
        grad = fd_gradient(lambda th: 4.25, [0.3, 0.7, -1.0], tol)
        np.testing.assert_array_equal(grad, np.zeros(3))

    def test_stencil_outside_domain_raises(self, tol):
        dom = RectDomain(lower=(0.0,), upper=(1.0,))
        with pytest.raises(DomainViolation):
            fd_gradient(lambda th: th[0], [1e-7], tol, dom)

    def test_quadratics_exact_to_1e8_relative(self, tol):
        rng = np.random.Generator(np.random.Philox(11))
        A = rng.standard_normal((3, 3))
        A = A + A.T
        b = rng.standard_normal(3)
        for _ in range(5):
            x = rng.uniform(-2, 2, 3)
            grad = fd_gradient(lambda th: 0.5 * th @ A @ th + b @ th, x, tol)
            exact = A @ x + b
            np.testing.assert_allclose(grad, exact, rtol=1e-8, atol=1e-10)


class TestCheckSpd:
    def test_identity(self, tol):
        assert check_spd(np.eye(2), tol)

    def test_indefinite(self, tol):
        assert not check_spd(np.diag([1.0, -1.0]), tol)

    def test_asymmetric(self, tol):
        assert not check_spd(np.array([[1.0, 0.5], [0.0, 1.0]]), tol)

    def test_ill_conditioned_rejected(self, tol):
        assert not check_spd(np.diag([1.0, 1e-13]), tol)

    def test_ner_information_block(self, tol):
        bundle = get_model("ner-balanced", m=10, n=5).bundle()
        info = bundle.eval_H([1.0, 1.0, 1.0, 1.0])
        assert check_spd(info, tol)


class TestInformationIdentity:
    @pytest.mark.parametrize("model_id", IID_IDS)
    def test_iid_catalog_grid(self, bundles, tol, model_id):
        for pt in interior_points(model_id, 10):
            report = verify_information_identity(bundles[model_id], pt, tol)
            assert report.max_violation < 1e-6, (model_id, pt)

    def test_fault_injection_reported_not_thrown(self, bundles, tol):
        base = bundles["normal-meanvar"]
        broken = DerivativeBundle(
            name="broken", domain=base.domain, eval_H=base.eval_H,
            eval_I=base.eval_I, eval_J=base.eval_J,
            eval_K=lambda th: np.zeros((2, 2, 2)), iid=True)
        report = verify_information_identity(broken, [0.0, 1.0], tol)
        dI = fd_matrix_derivative(base.eval_I, np.array([0.0, 1.0]), tol)
        expected = np.max(np.abs(dI + base.eval_J(np.array([0.0, 1.0]))))
        assert not report.passed
        assert report.max_violation == pytest.approx(expected, rel=1e-6)

    def test_non_iid_bundle_rejected(self, bundles, tol):
        with pytest.raises(ValueError):
            verify_information_identity(bundles["linreg-var"], [0.0, 0.0, 1.0], tol)

    @pytest.mark.parametrize("model_id", ("linreg-var", "linreg-sd",
                                          "ner-balanced", "ner"))
    def test_identity_extends_to_grouped_bundles(self, bundles, tol, model_id):
        # same expectation identity, checked directly for the non-iid bundles
        for pt in interior_points(model_id, 4):
            b = bundles[model_id]
            dI = fd_matrix_derivative(b.eval_I, pt, tol, b.domain)
            residual = dI + b.eval_J(pt) + b.eval_K(pt)
            assert np.max(np.abs(residual)) < 1e-6


class TestBundleProperties:
    @pytest.mark.parametrize("model_id", IID_IDS + ("linreg-var", "linreg-sd",
                                                    "ner-balanced", "ner"))
    def test_h_symmetric_at_random_points(self, bundles, model_id):
        for pt in interior_points(model_id, 20):
            H = bundles[model_id].eval_H(pt)
            np.testing.assert_allclose(H, H.T, atol=1e-9)

    @pytest.mark.parametrize("model_id", IID_IDS + ("ner-balanced",))
    def test_k_symmetric_j_symmetric_in_hessian_pair(self, bundles, model_id):
        for pt in interior_points(model_id, 5):
            K = bundles[model_id].eval_K(pt)
            J = bundles[model_id].eval_J(pt)
            np.testing.assert_allclose(K, np.transpose(K, (0, 2, 1)), atol=1e-12)
            np.testing.assert_allclose(K, np.transpose(K, (1, 0, 2)), atol=1e-12)
            np.testing.assert_allclose(J, np.transpose(J, (1, 0, 2)), atol=1e-12)


_NODE_BUILDERS = {
    "binomial": bernoulli_nodes,
    "normal-meanvar": normal_meanvar_nodes,
    "normal-locscale": normal_locscale_nodes,
    "gamma": gamma_nodes,
}


class TestTensorsAgainstQuadratureOracle:
    """Analytic tensors vs exact expectations of FD log-density derivatives."""

    @pytest.mark.parametrize("model_id", IID_IDS)
    def test_iid_tensors(self, bundles, model_id):
        model = get_model(model_id)
        for pt in interior_points(model_id, 4, seed=77):
            logf, w = _NODE_BUILDERS[model_id](model, pt)
            H, I, J, K = tensor_oracle(logf, w, pt)
            b = bundles[model_id]
            np.testing.assert_allclose(b.eval_H(pt), H, rtol=2e-6, atol=2e-6)
            np.testing.assert_allclose(b.eval_I(pt), I, rtol=2e-6, atol=2e-6)
            np.testing.assert_allclose(b.eval_J(pt), J, rtol=3e-4, atol=3e-4)
            np.testing.assert_allclose(b.eval_K(pt), K, rtol=2e-3, atol=2e-3)

    def test_ner_tensors(self):
        model = get_model("ner-balanced", m=3, n=4)
        pt = np.array([1.0, 1.0, 1.0, 1.0])
        H, I, J, K = ner_tensor_oracle(model, pt)
        b = model.bundle()
        np.testing.assert_allclose(b.eval_H(pt), H, rtol=2e-6, atol=2e-6)
        np.testing.assert_allclose(b.eval_I(pt), I, rtol=2e-6, atol=2e-6)
        np.testing.assert_allclose(b.eval_J(pt), J, rtol=3e-4, atol=3e-4)
        np.testing.assert_allclose(b.eval_K(pt), K, rtol=2e-3, atol=2e-3)

    def test_ner_unbalanced_tensors(self):
        model = get_model("ner", m=3, n=3)
        pt = np.array([0.5, -0.5, 0.8, 1.6])
        H, I, J, K = ner_tensor_oracle(model, pt, k=5)
        b = model.bundle()
        np.testing.assert_allclose(b.eval_H(pt), H, rtol=2e-6, atol=2e-6)
        np.testing.assert_allclose(b.eval_I(pt), I, rtol=2e-6, atol=2e-6)
        np.testing.assert_allclose(b.eval_J(pt), J, rtol=3e-4, atol=3e-4)
        np.testing.assert_allclose(b.eval_K(pt), K, rtol=2e-3, atol=2e-3)

    def test_linreg_curvature_exact_on_orthogonal_residuals(self):
        # with residuals orthogonal to the design and ||e||^2 = n sigma^2 the
        # realized negative Hessian equals the limit exactly, so an FD check
        # of the full-data log likelihood is deterministic
        for model_id, theta in (("linreg-var", [0.5, -1.0, 1.3]),
                                ("linreg-sd", [0.5, -1.0, 1.2])):
            model = get_model(model_id, n=20)
            theta = np.array(theta)
            rng = np.random.Generator(np.random.Philox(4))
            raw = rng.standard_normal(model.n)
            proj = model.X @ np.linalg.lstsq(model.X, raw, rcond=None)[0]
            resid = raw - proj
            sigma2 = theta[-1] if model_id == "linreg-var" else theta[-1] ** 2
            resid *= np.sqrt(model.n * sigma2) / np.linalg.norm(resid)
            y = model.X @ theta[:2] + resid
            b = model.bundle()

            def neg_scaled_hess(th, a, bb, h=1e-4):
                th = np.asarray(th, dtype=float)
                pp = th.copy(); pp[a] += h; pp[bb] += h
                pm = th.copy(); pm[a] += h; pm[bb] -= h
                mp = th.copy(); mp[a] -= h; mp[bb] += h
                mm = th.copy(); mm[a] -= h; mm[bb] -= h
                mixed = (model.log_likelihood(y, pp) - model.log_likelihood(y, pm)
                         - model.log_likelihood(y, mp) + model.log_likelihood(y, mm))
                return -mixed / (4.0 * h * h) / model.n

            H = b.eval_H(theta)
            for a in range(3):
                for c in range(3):
                    assert neg_scaled_hess(theta, a, c) == pytest.approx(
                        H[a, c], rel=2e-5, abs=2e-5)
