import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docosim.losses import (
    Domain,
    LossStream,
    default_lipschitz,
    generate_stream,
    global_loss_series,
    global_losses,
    grad,
    load_stream_csv,
    loss_value,
    offline_optimum,
    own_gradients,
    project,
    regret_curve,
    save_stream_csv,
)

BALL = Domain(10, "ball", 2.0)


def tiny_stream(horizon=6, agents=2, dim=3, seed=0, regularized=False):
    gen = np.random.default_rng(seed)
    feats = gen.uniform(-1, 1, size=(horizon, agents, dim))
    labels = gen.normal(size=(horizon, agents))
    return LossStream(feats, labels, regularized, "quadratic", 2.0,
                      1.0 if regularized else 0.0)


def fd_gradient(stream, t, v, x, h=1e-6):
    """Central finite-difference oracle."""
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (loss_value(stream, t, v, x + e) - loss_value(stream, t, v, x - e)) / (2 * h)
    return out


class TestGenerateStream:
    def test_deterministic(self):
        a = generate_stream(6, 20, 4, seed=3)
        b = generate_stream(6, 20, 4, seed=3)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_rejects_odd_agents(self):
        with pytest.raises(ValueError):
            generate_stream(5, 10, 3, seed=0)

    def test_feature_range(self):
        s = generate_stream(8, 50, 10, seed=1)
        assert s.features.min() >= -1.0 and s.features.max() <= 1.0

    def test_label_rule_split(self):
        s = generate_stream(8, 400, 10, seed=2)
        # first half: labels are clipped noise; second half: <w, 1> + noise
        assert np.all(np.abs(s.labels[:, :4]) <= 1.0)
        resid = s.labels[:, 4:] - s.features[:, 4:, :].sum(axis=2)
        assert np.all(np.abs(resid) <= 1.0)
        assert np.abs(s.labels[:, 4:]).max() > 1.0  # signal actually present

    def test_regimes(self):
        c = generate_stream(4, 10, 3, seed=0, regime="convex")
        sc = generate_stream(4, 10, 3, seed=0, regime="strongly_convex")
        assert not c.regularized and c.alpha == 0.0
        assert sc.regularized and sc.alpha == 1.0
        assert np.array_equal(c.features, sc.features)


class TestValuesAndGradients:
    def test_value_at_origin(self):
        s = tiny_stream()
        x0 = np.zeros(3)
        for t in range(1, 7):
            for v in (1, 2):
                assert loss_value(s, t, v, x0) == pytest.approx(
                    0.5 * s.labels[t - 1, v - 1] ** 2)

    def test_gradient_at_origin(self):
        s = tiny_stream()
        g = grad(s, 2, 1, np.zeros(3))
        assert np.allclose(g, -s.labels[1, 0] * s.features[1, 0], atol=0)

    def test_zero_feature_zero_gradient(self):
        feats = np.zeros((2, 2, 3))
        s = LossStream(feats, np.ones((2, 2)), False, "quadratic", 1.0)
        assert not grad(s, 1, 1, np.array([0.3, -0.2, 0.1])).any()

    @pytest.mark.parametrize("regularized", [False, True])
    def test_gradient_matches_finite_differences(self, regularized):
        s = tiny_stream(regularized=regularized, seed=5)
        gen = np.random.default_rng(6)
        for _ in range(100):
            t = int(gen.integers(1, 7))
            v = int(gen.integers(1, 3))
            x = gen.uniform(-1, 1, size=3)
            g = grad(s, t, v, x)
            fd = fd_gradient(s, t, v, x)
            denom = max(np.linalg.norm(fd), 1.0)
            assert np.linalg.norm(g - fd) / denom <= 1e-6

    def test_strong_convexity_inequality(self):
        s = tiny_stream(regularized=True, seed=7)
        gen = np.random.default_rng(8)
        for _ in range(200):
            t, v = int(gen.integers(1, 7)), int(gen.integers(1, 3))
            x = gen.uniform(-2, 2, size=3)
            y = gen.uniform(-2, 2, size=3)
            lhs = loss_value(s, t, v, y)
            rhs = (loss_value(s, t, v, x) + grad(s, t, v, x) @ (y - x)
                   + 0.5 * np.sum((y - x) ** 2))
            assert lhs >= rhs - 1e-9

    def test_empirical_lipschitz_within_default(self):
        s = generate_stream(6, 60, 10, seed=9, regime="strongly_convex")
        bound = default_lipschitz(10, 2.0)
        gen = np.random.default_rng(10)
        worst = 0.0
        for _ in range(300):
            t, v = int(gen.integers(1, 61)), int(gen.integers(1, 7))
            x = gen.normal(size=10)
            x = x / np.linalg.norm(x) * gen.uniform(0, 2.0)
            worst = max(worst, float(np.linalg.norm(grad(s, t, v, x))))
        assert worst <= bound

    def test_vectorized_helpers_agree_with_scalar(self):
        s = tiny_stream(regularized=True, seed=11)
        gen = np.random.default_rng(12)
        plays = gen.uniform(-1, 1, size=(2, 3))
        g = own_gradients(s, 3, plays)
        for v in (1, 2):
            assert np.allclose(g[v - 1], grad(s, 3, v, plays[v - 1]), atol=1e-15)
        pts = gen.uniform(-1, 1, size=(4, 3))
        vals = global_losses(s, 3, pts)
        for k in range(4):
            direct = sum(loss_value(s, 3, v, pts[k]) for v in (1, 2))
            assert vals[k] == pytest.approx(direct, abs=1e-12)
        series = global_loss_series(s, pts[0])
        direct = [sum(loss_value(s, t, v, pts[0]) for v in (1, 2)) for t in range(1, 7)]
        assert np.allclose(series, direct, atol=1e-12)


class TestProject:
    def test_interior_identity(self):
        x = np.array([0.5, -0.5, 1.0])
        assert np.array_equal(project(Domain(3, "ball", 2.0), x), x)

    def test_ball_radial_scaling(self):
        x = np.zeros(4)
        x[0] = 4.0
        out = project(Domain(4, "ball", 2.0), x)
        assert np.allclose(out, [2.0, 0, 0, 0], atol=1e-15)

    def test_box_clip(self):
        dom = Domain(3, "box", lo=np.zeros(3), hi=np.ones(3))
        out = project(dom, np.array([-1.0, 2.0, 0.5]))
        assert np.array_equal(out, [0.0, 1.0, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=3))
    def test_idempotent(self, vals):
        dom = Domain(3, "ball", 1.5)
        once = project(dom, np.array(vals))
        assert np.allclose(project(dom, once), once, atol=1e-12)

    def test_box_must_contain_origin(self):
        with pytest.raises(ValueError):
            Domain(2, "box", lo=np.array([0.5, 0.5]), hi=np.array([1.0, 1.0]))


class TestOfflineOptimum:
    def test_pure_regularizer_gives_origin(self):
        feats = np.zeros((5, 2, 3))
        s = LossStream(feats, np.zeros((5, 2)), True, "quadratic", 1.0, 1.0)
        assert np.allclose(offline_optimum(s, Domain(3, "ball", 2.0)), 0.0, atol=1e-12)

    def test_rank_one_least_norm(self):
        # single quadratic 0.5*(<w,x>-y)^2 feasible minimizer: y*w/||w||^2
        w = np.array([[[1.0, 2.0, -1.0]]])
        y = np.array([[1.2]])
        s = LossStream(w, y, False, "quadratic", 1.0)
        x = offline_optimum(s, Domain(3, "ball", 2.0))
        expected = 1.2 * w[0, 0] / np.sum(w[0, 0] ** 2)
        assert np.linalg.norm(x - expected) <= 1e-8

    @pytest.mark.parametrize("regime", ["convex", "strongly_convex"])
    def test_matches_normal_equations_oracle(self, regime):
        s = generate_stream(6, 80, 5, seed=13, regime=regime)
        dom = Domain(5, "ball", 2.0)
        x = offline_optimum(s, dom)
        w = s.features.reshape(-1, 5)
        y = s.labels.reshape(-1)
        hess = w.T @ w
        if s.regularized:
            hess = hess + 80 * 6 * np.eye(5)
        solved = np.linalg.solve(hess, w.T @ y)
        if np.linalg.norm(solved) <= 2.0:
            assert np.linalg.norm(x - solved) <= 1e-8
        # stationarity of the returned point
        lam = float(np.linalg.eigvalsh(hess)[-1])
        step = project(dom, x - (hess @ x - w.T @ y) / lam)
        assert np.linalg.norm(step - x) <= 1e-9

    def test_linear_family_closed_form(self):
        feats = np.tile(np.array([1.0, 0.0]), (4, 2, 1))
        s = LossStream(feats, np.zeros((4, 2)), False, "linear", 1.0)
        x = offline_optimum(s, Domain(2, "ball", 2.0))
        assert np.allclose(x, [-2.0, 0.0], atol=1e-12)


class TestRegretCurve:
    def test_optimal_trajectory_zero_regret(self):
        s = generate_stream(4, 30, 3, seed=14)
        dom = Domain(3, "ball", 2.0)
        x_star = offline_optimum(s, dom)
        traj = np.tile(x_star, (30, 4, 1))
        rep = regret_curve(traj, s, x_star)
        assert np.allclose(rep.curves, 0.0, atol=1e-10)
        assert rep.reg_final == pytest.approx(0.0, abs=1e-10)

    def test_single_term_hand_value(self):
        w = np.array([[[2.0, 0.0]]])
        y = np.array([[1.0]])
        s = LossStream(w, y, False, "quadratic", 1.0)
        x_star = np.array([0.5, 0.0])  # residual 0
        traj = np.array([[[1.0, 1.0]]])  # residual 2*1 - 1 = 1 -> loss 0.5
        rep = regret_curve(traj, s, x_star)
        assert rep.curves[0, 0] == pytest.approx(0.5)

    def test_final_regret_nonnegative_at_optimum(self):
        s = generate_stream(4, 40, 3, seed=15, regime="strongly_convex")
        dom = Domain(3, "ball", 2.0)
        x_star = offline_optimum(s, dom)
        gen = np.random.default_rng(16)
        traj = project(dom, gen.normal(size=(40, 4, 3)))
        rep = regret_curve(traj, s, x_star)
        assert np.all(rep.final_per_agent >= -1e-6)

    def test_max_curve_and_metadata(self):
        s = generate_stream(2, 5, 2, seed=17)
        traj = np.zeros((5, 2, 2))
        rep = regret_curve(traj, s, np.zeros(2), metadata={"trial": 3})
        assert rep.metadata["trial"] == 3
        assert np.array_equal(rep.max_curve, rep.curves.max(axis=1))


def test_stream_csv_round_trip(tmp_path):
    s = generate_stream(2, 7, 3, seed=18)
    path = tmp_path / "stream.csv"
    save_stream_csv(s, path)
    s2 = load_stream_csv(path)
    assert np.array_equal(s.features, s2.features)
    assert np.array_equal(s.labels, s2.labels)
