import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emforecast.errors import DivergenceError
from emforecast.multivariate import (
    KINDS,
    FittedFFNN,
    FittedSVR,
    MultivariateSpec,
    default_specs,
    fit_forest,
    fit_model,
    fit_penalized,
    fit_svr,
    fit_tree,
    grid_search,
    model_from_dict,
    predict_step,
    predict_svr,
)
from emforecast.multivariate.ffnn import forward, init_weights, loss_and_grad
from emforecast.multivariate.linear import fit_bvar, fit_dfm, fit_var, fit_vecm
from emforecast.multivariate.svr import dual_objective, kernel_matrix, solve_dual
from emforecast.numerics import RngStream, ols_solve
from emforecast.series import Dataset, SupervisedMatrix, build_lag_matrix

from conftest import random_dataset


def sm_from(X, y):
    X = np.asarray(X, dtype=float)
    return SupervisedMatrix(X, np.asarray(y, dtype=float), np.arange(len(y)), tuple(f"x{i}" for i in range(X.shape[1])), 1)


def random_sm(seed, n=40, p=4):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, p))
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1] + 0.1 * gen.normal(size=n)
    return sm_from(X, y)


class TestSpec:
    def test_defaults_and_validation(self):
        s = MultivariateSpec("rfr")
        assert s.params["n_trees"] == 200 and s.params["m"] is None
        for kind, params in [("rfr", {"n_trees": 0}), ("svr", {"C": 0}), ("svr", {"epsilon": -1}),
                             ("ffnn", {"hidden": 0}), ("rfr", {"bogus": 1})]:
            with pytest.raises(ValueError):
                MultivariateSpec(kind, params)

    def test_m_bounds(self):
        with pytest.raises(ValueError):
            fit_forest(MultivariateSpec("rfr", {"m": 9, "n_trees": 1}), random_sm(0))


class TestLinearSystems:
    def test_var_recovery(self):
        A = np.array([[0.5, 0.2], [-0.1, 0.3]])
        gen = RngStream(11, "var").generator()
        y = np.zeros((500, 2))
        for t in range(1, 500):
            y[t] = A @ y[t - 1] + gen.normal(size=2)
        model = fit_var(Dataset.from_matrix(("a", "b"), 1, y), p=1)
        assert np.max(np.abs(model.lag_matrices[0] - A)) < 0.1

    def test_var_predict_matches_equation(self):
        ds = random_dataset(1)
        model = fit_model(MultivariateSpec("var"), ds, lags=3)
        sm = build_lag_matrix(ds, 3)
        A = model.lag_matrices  # (p, k, k)
        m = ds.matrix()
        t = 10
        manual = model.coef[0, 0] + sum(A[l, 0] @ m[t - l - 1] for l in range(3))
        assert predict_step(model, sm.X[t - 3]) == pytest.approx(manual, abs=1e-12)

    def test_bvar_prior_limit(self):
        model = fit_bvar(random_dataset(2), p=2, shrinkage=1e9)
        A = model.lag_matrices
        np.testing.assert_allclose(A[0], np.eye(4), atol=1e-2)
        np.testing.assert_allclose(A[1], 0, atol=1e-2)

    def test_bvar_zero_shrinkage_is_var(self):
        ds = random_dataset(3)
        np.testing.assert_allclose(fit_bvar(ds, 2, 0.0).coef, fit_var(ds, 2).coef, atol=1e-8)

    def test_dfm_tracks_common_factor(self):
        gen = np.random.default_rng(4)
        f = np.cumsum(gen.normal(size=80)) * 0.2 + gen.normal(size=80)
        feats = np.column_stack([f + 0.05 * gen.normal(size=80) for _ in range(3)])
        ds = Dataset.from_matrix(("y", "a", "b", "c"), 1900, np.column_stack([gen.normal(size=80), feats]))
        model = fit_dfm(ds, 1, 3)
        factor = model.factors_of(feats)[:, 0]
        assert abs(np.corrcoef(factor, f)[0, 1]) > 0.95

    def test_vecm_on_cointegrated_levels(self):
        gen = np.random.default_rng(5)
        x = np.cumsum(gen.normal(size=200))
        y = 2.0 + 0.8 * x + gen.normal(size=200) * 0.3
        levels = Dataset.from_matrix(("y", "x"), 1800, np.column_stack([y, x]))
        model = fit_vecm(levels, 1)
        assert model.beta[1] == pytest.approx(0.8, abs=0.05)
        assert model.gamma[1] < 0  # error correction pulls back toward equilibrium
        years = [1990, 1995]
        pred = model.predict_levels(levels, years)
        assert pred.shape == (2,) and np.all(np.isfinite(pred))


class TestPenalized:
    def test_zero_penalty_is_ols(self):
        sm = random_sm(1)
        fit = fit_penalized(MultivariateSpec("elastic_net", {"l1": 0.0, "l2": 0.0}), sm)
        np.testing.assert_allclose([fit.intercept, *fit.coef], ols_solve(sm.X, sm.y, intercept=True), atol=1e-6)

    def test_huge_l2_shrinks(self):
        fit = fit_penalized(MultivariateSpec("ridge", {"l2": 1e12}), random_sm(2))
        assert np.max(np.abs(fit.coef)) < 1e-9

    def test_ridge_closed_form_on_standardized_scale(self):
        sm = random_sm(3)
        fit = fit_penalized(MultivariateSpec("ridge", {"l2": 2.5}), sm)
        Z = (sm.X - sm.X.mean(0)) / sm.X.std(0)
        g = np.linalg.solve(Z.T @ Z + 2.5 * np.eye(4), Z.T @ (sm.y - sm.y.mean()))
        np.testing.assert_allclose(fit.coef * sm.X.std(0), g, atol=1e-6)

    def test_predict_step_is_affine(self):
        sm = random_sm(4)
        fit = fit_penalized(MultivariateSpec("ridge"), sm)
        x = sm.X[3]
        assert predict_step(fit, x) == pytest.approx(fit.intercept + x @ fit.coef, abs=1e-12)


class TestTree:
    def test_constant_target(self):
        t = fit_tree(MultivariateSpec("decision_tree"), sm_from(np.random.default_rng(0).normal(size=(20, 2)), np.full(20, 3.0)))
        assert t.n_leaves == 1 and predict_step(t, [0.0, 0.0]) == 3.0

    def test_step_function(self):
        X = np.arange(10.0)[:, None]
        y = (X[:, 0] >= 5).astype(float)
        t = fit_tree(MultivariateSpec("decision_tree", {"max_depth": 1, "min_leaf": 1}), sm_from(X, y))
        assert 4 < t.threshold[0] <= 5
        np.testing.assert_array_equal(t.predict(X), y)

    def test_depth_zero_is_mean(self):
        sm = random_sm(5)
        t = fit_tree(MultivariateSpec("decision_tree", {"max_depth": 0}), sm)
        assert t.n_leaves == 1 and predict_step(t, sm.X[0]) == pytest.approx(sm.y.mean())

    def test_best_split_matches_brute_force(self):
        gen = np.random.default_rng(6)
        X = gen.normal(size=(15, 3))
        y = gen.normal(size=15)
        t = fit_tree(MultivariateSpec("decision_tree", {"max_depth": 1, "min_leaf": 1}), sm_from(X, y))
        best = math.inf
        for j in range(3):
            xs = np.unique(X[:, j])
            for a, b in zip(xs[:-1], xs[1:]):
                left = X[:, j] <= (a + b) / 2
                sse = np.sum((y[left] - y[left].mean()) ** 2) + np.sum((y[~left] - y[~left].mean()) ** 2)
                best = min(best, sse)
        pred = t.predict(X)
        assert np.sum((y - pred) ** 2) == pytest.approx(best, rel=1e-12)


class TestForest:
    def test_single_tree_degeneracy(self):
        sm = random_sm(7)
        forest = fit_forest(MultivariateSpec("rfr", {"n_trees": 1, "m": 4, "bootstrap": False}), sm)
        tree = fit_tree(MultivariateSpec("decision_tree", {"max_depth": None, "min_leaf": 2}), sm)
        Q = np.random.default_rng(0).normal(size=(50, 4))
        np.testing.assert_array_equal(forest.predict(Q), tree.predict(Q))

    @given(st.integers(0, 1000))
    def test_mean_identity(self, seed):
        forest = fit_forest(MultivariateSpec("rfr", {"n_trees": 7}, seed), random_sm(seed % 5, n=25))
        Q = np.random.default_rng(seed).normal(size=(20, 4))
        assert np.max(np.abs(forest.predict(Q) - forest.tree_predictions(Q).mean(axis=0))) <= 1e-12

    def test_deterministic_per_seed(self):
        sm = random_sm(8)
        a = fit_forest(MultivariateSpec("rfr", {"n_trees": 10}, 42), sm)
        b = fit_forest(MultivariateSpec("rfr", {"n_trees": 10}, 42), sm)
        c = fit_forest(MultivariateSpec("rfr", {"n_trees": 10}, 43), sm)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
        assert json.dumps(a.to_dict()) != json.dumps(c.to_dict())

    @pytest.mark.slow
    def test_more_trees_less_variance(self):
        sm = random_sm(9, n=60)
        Q = np.random.default_rng(1).normal(size=(30, 4))
        spread = {}
        for B in (10, 200):
            preds = np.stack([fit_forest(MultivariateSpec("rfr", {"n_trees": B}, s), sm).predict(Q) for s in range(20)])
            spread[B] = preds.var(axis=0).mean()
        assert spread[200] < spread[10]


class TestSvr:
    def test_flat_tube(self):
        x = np.linspace(0, 1, 20)[:, None]
        y = 0.01 * x[:, 0]
        m = fit_svr(MultivariateSpec("svr", {"kernel": "linear", "epsilon": 0.5}), sm_from(x, y))
        assert np.all(np.abs(m.dual_coef) < 1e-12)
        assert np.all(np.abs(m.predict(x) - y) <= 0.5)

    @given(st.integers(0, 10_000), st.sampled_from(["rbf", "linear"]), st.floats(0.1, 20), st.floats(0.0, 0.3))
    def test_box_and_balance(self, seed, kernel, C, eps):
        m = fit_svr(MultivariateSpec("svr", {"kernel": kernel, "C": C, "epsilon": eps}), random_sm(seed, n=25), keep_all=True)
        assert np.all(np.abs(m.dual_coef) <= C + 1e-8)
        assert abs(m.dual_coef.sum()) < 1e-6

    @pytest.mark.parametrize("seed", range(10))
    def test_qp_oracle(self, seed):
        cp = pytest.importorskip("cvxpy")
        gen = np.random.default_rng(seed)
        X = gen.normal(size=(6, 2))
        y = gen.normal(size=6)
        C, eps = 1.0, 0.1
        K = kernel_matrix(X, X, "linear", 1.0)
        beta, _, _, conv = solve_dual(K, y, C, eps, tol=1e-10)
        b = cp.Variable(6)
        L = np.linalg.cholesky(K + 1e-12 * np.eye(6))
        prob = cp.Problem(cp.Maximize(y @ b - 0.5 * cp.sum_squares(L.T @ b) - eps * cp.norm1(b)),
                          [b <= C, b >= -C, cp.sum(b) == 0])
        prob.solve()
        assert conv
        assert abs(dual_objective(beta, K, y, eps) - prob.value) < 1e-4

    def test_zero_coefficients_predict_bias(self):
        m = FittedSVR(MultivariateSpec("svr").params, [0, 0], [1, 1], np.zeros((0, 2)), [], 1.25, 0.5)
        assert predict_svr(m, [3.0, -1.0]) == 1.25

    def test_free_support_vector_within_tube(self):
        sm = random_sm(10, n=30)
        m = fit_svr(MultivariateSpec("svr", {"C": 1.0, "epsilon": 0.05}), sm, keep_all=True)
        free = (np.abs(m.dual_coef) > 1e-6) & (np.abs(m.dual_coef) < m.C - 1e-6)
        assert free.any()
        err = np.abs(m.predict(sm.X[free]) - sm.y[free])
        assert np.all(err <= m.epsilon + 1e-3)

    def test_formula_reevaluation(self):
        sm = random_sm(11)
        m = fit_svr(MultivariateSpec("svr"), sm)
        x = np.random.default_rng(3).normal(size=4)
        z = (x - m.x_mean) / m.x_std
        total = m.bias
        for coef, sv in zip(m.dual_coef, m.support):
            total += coef * math.exp(-m.gamma * float(np.sum((sv - z) ** 2)))
        assert predict_svr(m, x) == pytest.approx(total, abs=1e-12)

    def test_width_mismatch(self):
        m = fit_svr(MultivariateSpec("svr"), random_sm(12))
        with pytest.raises(ValueError):
            predict_svr(m, [1.0, 2.0])


class TestFfnn:
    def test_zero_epochs_is_initial_network(self):
        sm = random_sm(13)
        a = fit_model_ffnn(sm, epochs=0, seed=5)
        b = fit_model_ffnn(sm, epochs=0, seed=5)
        w = init_weights(4, 8, RngStream(5, "ffnn/init"))
        Z = (sm.X - sm.X.mean(0)) / sm.X.std(0)
        expected = forward(w, Z)[0]
        np.testing.assert_allclose(a.predict_standardized(sm.X), expected, atol=1e-12)
        np.testing.assert_array_equal(a.predict(sm.X), b.predict(sm.X))

    @given(st.integers(0, 10_000), st.sampled_from(["tanh", "logistic"]))
    def test_gradient_matches_finite_differences(self, seed, activation):
        assert max_fd_error(seed, activation) < 1e-4

    def test_xor(self):
        gen = np.random.default_rng(3)
        corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
        idx = gen.integers(0, 4, 100)
        X = corners[idx] + gen.normal(scale=0.1, size=(100, 2))
        y = np.array([0, 1, 1, 0.0])[idx]
        net = fit_model_ffnn(sm_from(X, y), epochs=2000, lr=0.1)
        b = ols_solve(X, y, intercept=True)
        assert np.mean((net.predict(X) - y) ** 2) < 0.05
        assert np.mean((b[0] + X @ b[1:] - y) ** 2) > 0.2

    def test_hand_computed_221(self):
        w = {"W1": [[0.5, -1.0], [2.0, 0.25]], "b1": [0.1, -0.2], "W2": [1.5, -0.5], "b2": 0.3}
        net = FittedFFNN(MultivariateSpec("ffnn").params, w, [0, 0], [1, 1], 0.0, 1.0, [], [])
        x1, x2 = 0.4, -0.7
        h1 = math.tanh(0.5 * x1 + 2.0 * x2 + 0.1)
        h2 = math.tanh(-1.0 * x1 + 0.25 * x2 - 0.2)
        assert predict_step(net, [x1, x2]) == pytest.approx(1.5 * h1 - 0.5 * h2 + 0.3, abs=1e-15)

    def test_training_predictions_reproduce(self):
        sm = random_sm(14)
        net = fit_model_ffnn(sm, epochs=300)
        assert np.max(np.abs(net.predict(sm.X) - net.train_predictions)) <= 1e-9
        assert net.loss_trace[-1] < net.loss_trace[0]

    def test_divergence_names_epoch(self):
        with pytest.raises(DivergenceError) as exc:
            fit_model_ffnn(random_sm(15), epochs=500, lr=1e6, activation="relu")
        assert exc.value.epoch is not None and "epoch" in str(exc.value)


def fit_model_ffnn(sm, epochs=2000, lr=0.01, seed=0, activation="tanh"):
    from emforecast.multivariate import fit_ffnn

    return fit_ffnn(MultivariateSpec("ffnn", {"epochs": epochs, "learning_rate": lr, "activation": activation}, seed), sm)


def max_fd_error(seed, activation="tanh", h=1e-5):
    gen = np.random.default_rng(seed)
    n_in, hidden = int(gen.integers(1, 5)), int(gen.integers(1, 6))
    w = init_weights(n_in, hidden, RngStream(seed, "fd"))
    w["b1"] = gen.normal(scale=0.3, size=hidden)
    w["b2"] = float(gen.normal())
    X = gen.normal(size=(5, n_in))
    y = gen.normal(size=5)
    _, g = loss_and_grad(w, X, y, activation)
    worst = 0.0
    for name in ("W1", "b1", "W2", "b2"):
        base = np.atleast_1d(np.asarray(w[name], dtype=float))
        for i in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[i] += h
            minus[i] -= h
            wp, wm = dict(w), dict(w)
            wp[name] = plus.reshape(np.shape(w[name])) if np.ndim(w[name]) else float(plus[0])
            wm[name] = minus.reshape(np.shape(w[name])) if np.ndim(w[name]) else float(minus[0])
            fd = (loss_and_grad(wp, X, y, activation)[0] - loss_and_grad(wm, X, y, activation)[0]) / (2 * h)
            an = float(np.atleast_1d(g[name])[i])
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-7))
    return worst


class TestZoo:
    def test_every_kind_round_trips_through_json(self):
        ds = random_dataset(20)
        levels = Dataset.from_matrix(ds.column_names, ds.start_year, np.cumsum(ds.matrix(), axis=0))
        sm = build_lag_matrix(ds, 3)
        for spec in default_specs(seed=3, overrides={"rfr": {"n_trees": 5}, "ffnn": {"epochs": 50}}):
            model = fit_model(spec, ds, 3, levels=levels)
            back = model_from_dict(json.loads(json.dumps(model.to_dict())))
            X = sm.X[:5] if spec.kind != "vecm" else np.random.default_rng(0).normal(size=(5, model.width))
            assert np.array_equal(model.predict(X), back.predict(X)), spec.kind
        assert len(KINDS) == 10

    def test_width_mismatch_everywhere(self):
        ds = random_dataset(21)
        for spec in default_specs(overrides={"rfr": {"n_trees": 2}, "ffnn": {"epochs": 5}}):
            if spec.kind == "vecm":
                continue
            with pytest.raises(ValueError):
                predict_step(fit_model(spec, ds, 3), np.zeros(5))

    def test_determinism_of_stochastic_models(self):
        ds = random_dataset(22)
        for kind in ("rfr", "ffnn", "svr"):
            params = {"n_trees": 5} if kind == "rfr" else {}
            a = fit_model(MultivariateSpec(kind, params, 9), ds, 3).to_dict()
            b = fit_model(MultivariateSpec(kind, params, 9), ds, 3).to_dict()
            assert json.dumps(a) == json.dumps(b)

    def test_grid_search_uses_rows_given(self):
        sm = build_lag_matrix(random_dataset(23), 3)
        best, scores = grid_search("ridge", {"l2": [0.01, 1.0, 100.0]}, sm, min_train=30)
        assert best["l2"] in (0.01, 1.0, 100.0) and len(scores) == 3
        assert min(s["mse"] for s in scores) == next(s["mse"] for s in scores if s["params"] == best)
