import numpy as np
import pytest

from conftest import jet_from_grid
from picpde.baselines import (THETA_NAMES, ThetaLibrary, build_theta, ic_score,
                              lasso, lasso_alpha_max, noise_metrics, stridge,
                              _stridge_iterate)
from picpde.canonical import generate_dataset
from picpde.grids import GridField
from picpde.numerics import svd_lstsq
from picpde.training import FieldJet, MetaGrid


def constant_jet(c=2.0, n=12):
    meta = MetaGrid((0.0, 1.0), (0.0, 1.0), n, n)
    z = np.zeros(n * n)
    return FieldJet(meta=meta, u=np.full(n * n, c), u_x=z, u_xx=z.copy(),
                    u_xxx=z.copy(), u_t=z.copy(), u_tt=z.copy())


@pytest.fixture(scope="module")
def burgers_jet():
    field = generate_dataset("burgers")
    return jet_from_grid(field, x_stride=2, t_stride=2)


class TestTheta:
    def test_constant_field_columns(self):
        theta = build_theta(constant_jet(2.0))
        cols = theta.columns
        assert np.allclose(cols[:, 0], 2.0)
        assert np.allclose(cols[:, 1:], 0.0)

    def test_structural_identity_uu_x(self, burgers_jet):
        theta = build_theta(burgers_jet)
        prod = theta.columns[:, 0] * theta.columns[:, 1]
        assert np.array_equal(theta.columns[:, 4], prod)

    def test_column_order_golden(self):
        assert THETA_NAMES == ("u", "u_x", "u_xx", "u_xxx", "u*u_x", "u*u_xx",
                               "u*u_xxx", "u^2*u_x", "u^2*u_xx", "u^2*u_xxx")

    def test_deterministic(self, burgers_jet):
        a = build_theta(burgers_jet).columns
        b = build_theta(burgers_jet).columns
        assert np.array_equal(a, b)

    def test_wrong_width_rejected(self):
        with pytest.raises(ValueError):
            ThetaLibrary(np.zeros((5, 9)))


class TestLasso:
    def setup_system(self, seed=0, n=400):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, 6)) * rng.uniform(0.1, 10, 6)
        w = np.array([1.5, 0.0, -2.0, 0.0, 0.5, 0.0])
        y = x @ w + 0.01 * rng.standard_normal(n)
        return x, y

    def test_alpha_zero_matches_least_squares(self):
        x, y = self.setup_system()
        res = lasso(x, y, alpha=0.0)
        # affine least squares oracle (intercept column appended)
        aug = np.column_stack([np.ones(len(y)), x])
        ref = svd_lstsq(aug, y)
        assert abs(res.intercept - ref[0]) < 1e-6 * max(1, abs(ref[0]))
        # relative to the coefficient scale (zero-coefficient entries carry
        # only convergence-tolerance noise)
        rel = np.abs(res.coefficients - ref[1:]).max() / np.abs(ref[1:]).max()
        assert rel < 1e-6

    def test_alpha_max_zeroes_everything(self):
        x, y = self.setup_system(seed=1)
        a_max = lasso_alpha_max(x, y)
        res = lasso(x, y, alpha=a_max * 1.0001)
        assert np.all(res.coefficients == 0.0)
        res_under = lasso(x, y, alpha=a_max * 0.99)
        assert np.any(res_under.coefficients != 0.0)

    def test_kkt_conditions_at_convergence(self):
        x, y = self.setup_system(seed=2)
        alpha = 0.05
        res = lasso(x, y, alpha=alpha)
        mean, std = x.mean(0), x.std(0, ddof=0)
        xs = (x - mean) / std
        yc = y - y.mean()
        beta = res.coefficients * std
        grad = -xs.T @ (yc - xs @ beta) / len(y)
        for k in range(x.shape[1]):
            if beta[k] == 0.0:
                assert abs(grad[k]) <= alpha + 1e-6
            else:
                assert grad[k] + np.sign(beta[k]) * alpha == pytest.approx(0, abs=1e-6)

    def test_negative_alpha_rejected(self):
        x, y = self.setup_system()
        with pytest.raises(ValueError):
            lasso(x, y, alpha=-1.0)

    def test_clean_burgers_unpenalized_fit(self, burgers_jet):
        theta = build_theta(burgers_jet)
        res = lasso(theta, burgers_jet.u_t, alpha=0.0)
        # least squares on Theta recovers the dominant Burgers terms
        assert abs(res.coefficients[4] + 1.0) < 0.05
        assert abs(res.coefficients[2] - 0.1) < 0.01


class TestStridge:
    def test_zero_threshold_zero_ridge_is_least_squares(self, burgers_jet):
        theta = build_theta(burgers_jet)
        w = _stridge_iterate(theta.columns, burgers_jet.u_t, 0.0, 0.0)
        ref = svd_lstsq(theta.columns, burgers_jet.u_t)
        assert np.max(np.abs(w - ref)) < 1e-10 * max(1, np.abs(ref).max())

    def test_support_monotone_in_threshold(self, burgers_jet):
        theta = build_theta(burgers_jet)
        norms = np.linalg.norm(theta.columns, axis=0)
        xn = theta.columns / norms
        prev = None
        for thr in (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0):
            w = _stridge_iterate(xn, burgers_jet.u_t, 1e-5, thr)
            support = set(np.nonzero(w)[0])
            if prev is not None:
                assert support <= prev
            prev = support

    def test_clean_burgers_recovers_structure(self, burgers_jet):
        theta = build_theta(burgers_jet)
        results = stridge(theta, burgers_jet.u_t,
                          l0_penalties=(1e-4, 1e-3))
        hit = [r for r in results if r.support == (2, 4)]
        assert hit, [r.support for r in results]
        w = hit[0].coefficients
        assert abs(w[4] + 1.0) < 0.05
        assert abs(w[2] - 0.1) < 0.01

    def test_penalty_extremes_bracket_structure(self, burgers_jet):
        # tiny penalty keeps redundant columns, huge penalty drops true ones
        theta = build_theta(burgers_jet)
        lo, hi = stridge(theta, burgers_jet.u_t, l0_penalties=(1e-6, 10.0))
        assert set(lo.support) > {2, 4}
        assert not set(hi.support) >= {2, 4}


class TestIcScore:
    def test_formula_arithmetic(self):
        # N = 1e4, MSE = 1e-2, k = 2: AIC = 1e4 ln(0.01) + 4
        rng = np.random.default_rng(0)
        n = 10**4
        cols = rng.standard_normal((n, 2))
        w = np.array([1.0, -2.0])
        resid = rng.standard_normal(n)
        resid -= cols @ svd_lstsq(cols, resid)      # orthogonalize
        resid *= np.sqrt(1e-2 / np.mean(resid**2))  # force MSE = 1e-2
        y = cols @ w + resid
        aic = ic_score(cols, y, "AIC")
        bic = ic_score(cols, y, "BIC")
        assert aic == pytest.approx(n * np.log(1e-2) + 4.0, rel=1e-9)
        assert bic == pytest.approx(n * np.log(1e-2) + 2.0 * np.log(n), rel=1e-9)

    def test_penalty_monotonicity(self):
        rng = np.random.default_rng(1)
        n = 500
        x3 = rng.standard_normal((n, 3))
        y = x3[:, 0] - x3[:, 1] + 0.1 * rng.standard_normal(n)
        # equal-MSE comparison: add a column orthogonal to the residual so
        # the 3-term fit cannot reduce the MSE
        resid = y - x3[:, :2] @ svd_lstsq(x3[:, :2], y)
        extra = x3[:, 2] - resid * (x3[:, 2] @ resid) / (resid @ resid)
        cols2 = x3[:, :2]
        cols3 = np.column_stack([cols2, extra])
        for kind in ("AIC", "BIC"):
            assert ic_score(cols2, y, kind) < ic_score(cols3, y, kind)

    def test_perfect_fit_sentinel(self):
        x = np.linspace(1, 2, 50)[:, None]
        assert ic_score(x, 3.0 * x[:, 0], "AIC") == float("-inf")

    def test_ranking_matches_exhaustive_oracle(self, burgers_jet):
        theta = build_theta(burgers_jet).columns[:, :5]
        target = burgers_jet.u_t
        from itertools import combinations

        rows = []
        oracle = []
        n = theta.shape[0]
        for size in (1, 2, 3):
            for sel in combinations(range(5), size):
                cols = theta[:, sel]
                rows.append((sel, ic_score(cols, target, "BIC")))
                w = svd_lstsq(cols, target)
                mse = float(np.mean((target - cols @ w) ** 2))
                oracle.append((sel, n * np.log(mse) + len(sel) * np.log(n)))
        got = [s for s, _ in sorted(rows, key=lambda r: r[1])]
        want = [s for s, _ in sorted(oracle, key=lambda r: r[1])]
        assert got == want

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ic_score(np.ones((10, 1)), np.ones(10), "DIC")


class TestNoiseMetrics:
    def test_identical_fields(self):
        f = GridField([0, 1], [0, 1], np.ones((2, 2)))
        assert noise_metrics(f, f) == (0.0, 0.0, 0.0)

    def test_hand_arithmetic(self):
        clean = GridField([0, 1], [0, 1], np.full((2, 2), 2.0))
        noisy = GridField([0, 1], [0, 1], np.full((2, 2), 3.0))
        mse, mae, e = noise_metrics(clean, noisy)
        assert (mse, mae, e) == (1.0, 1.0, 50.0)

    def test_gaussian_large_sample(self):
        rng = np.random.default_rng(3)
        xs, ts = np.linspace(0, 1, 400), np.linspace(0, 1, 250)
        vals = rng.standard_normal((400, 250)) * 0.8 + 0.3
        clean = GridField(xs, ts, vals)
        from picpde.grids import NoiseSpec, add_noise

        noisy = add_noise(clean, NoiseSpec(1.0, "gaussian", 4))
        _, _, e = noise_metrics(clean, noisy)
        expected = 100.0 * vals.std(ddof=0) / np.sqrt(np.mean(vals**2))
        assert abs(e - expected) / expected < 0.03

    def test_grid_mismatch(self):
        a = GridField([0, 1], [0, 1], np.ones((2, 2)))
        b = GridField([0, 0.5, 1], [0, 1], np.ones((3, 2)))
        with pytest.raises(ValueError, match="match"):
            noise_metrics(a, b)

    def test_independent_implementation_exact(self):
        # SI-style metrics recomputed with plain loops, 1e-12 agreement
        rng = np.random.default_rng(9)
        xs, ts = np.linspace(0, 1, 8), np.linspace(0, 2, 6)
        u = rng.standard_normal((8, 6))
        v = u + rng.standard_normal((8, 6)) * 0.1
        mse, mae, e = noise_metrics(GridField(xs, ts, u), GridField(xs, ts, v))
        acc_sq = acc_abs = acc_u2 = 0.0
        for i in range(8):
            for j in range(6):
                d = u[i, j] - v[i, j]
                acc_sq += d * d
                acc_abs += abs(d)
                acc_u2 += u[i, j] ** 2
        assert abs(mse - acc_sq / 48) < 1e-12
        assert abs(mae - acc_abs / 48) < 1e-12
        assert abs(e - 100.0 * np.sqrt(acc_sq / acc_u2)) < 1e-12
