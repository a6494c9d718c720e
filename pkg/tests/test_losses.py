import math

import numpy as np
import pytest

from trunkline import (
    BezierCurve,
    DomainError,
    LossWeights,
    WingParams,
    combined_loss,
    endpoint_loss,
    endpoint_loss_grad,
    sample,
    sampling_loss,
    sampling_loss_grad,
    uniform_params,
    wing,
)

WING = WingParams(w=10.0, epsilon=2.0)


def random_quartic(rng, lo=0.0, hi=512.0):
    return BezierCurve(rng.uniform(lo, hi, size=(5, 2)))


def sampling_loss_oracle(pred, gt, count=50):
    """Brute-force mean L1 over samples using math.comb, independent path."""
    total = 0.0
    for k in range(count):
        t = k / (count - 1)
        p = np.zeros(2)
        g = np.zeros(2)
        for i in range(5):
            b = math.comb(4, i) * t**i * (1 - t) ** (4 - i)
            p += b * pred.control_points[i]
            g += b * gt.control_points[i]
        total += abs(g[0] - p[0]) + abs(g[1] - p[1])
    return total / count


def kink_avoiding_pair(rng, min_gap=1e-3):
    """Curve pair whose per-sample coordinate differences all exceed min_gap."""
    params = uniform_params(50)
    for _ in range(200):
        gt = random_quartic(rng)
        offsets = rng.uniform(2.0, 6.0, size=(5, 2)) * rng.choice([-1.0, 1.0], size=(5, 2))
        pred = BezierCurve(gt.control_points + offsets)
        diff = sample(pred, params) - sample(gt, params)
        if np.min(np.abs(diff)) > min_gap:
            return pred, gt
    raise AssertionError("could not build a kink-avoiding pair")


def finite_difference_grad(loss_fn, pred, h=1e-6):
    grad = np.zeros_like(pred.control_points)
    for j in range(pred.control_points.shape[0]):
        for axis in range(2):
            bump = np.zeros_like(grad)
            bump[j, axis] = h
            hi = loss_fn(BezierCurve(pred.control_points + bump))
            lo = loss_fn(BezierCurve(pred.control_points - bump))
            grad[j, axis] = (hi - lo) / (2 * h)
    return grad


def rel_err(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return np.max(np.abs(a - b) / scale)


class TestSamplingLoss:
    def test_identity(self):
        c = random_quartic(np.random.default_rng(0))
        assert sampling_loss(c, c) == 0.0

    def test_translation(self):
        c = random_quartic(np.random.default_rng(1))
        assert sampling_loss(c.translated((3, 4)), c) == pytest.approx(7.0, abs=1e-10)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            pred, gt = random_quartic(rng), random_quartic(rng)
            assert sampling_loss(pred, gt) == pytest.approx(
                sampling_loss_oracle(pred, gt), abs=1e-9
            )

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        pred, gt = random_quartic(rng), random_quartic(rng)
        assert sampling_loss(pred, gt) == sampling_loss(gt, pred)

    def test_translation_law_many_counts(self):
        rng = np.random.default_rng(4)
        c = random_quartic(rng)
        for count in (2, 5, 50, 173):
            params = uniform_params(count)
            for dx, dy in ((1.5, -2.25), (-0.125, 0.5), (10.0, 0.0)):
                got = sampling_loss(c.translated((dx, dy)), c, params)
                assert got == pytest.approx(abs(dx) + abs(dy), abs=1e-10)

    def test_triangle_bound(self):
        rng = np.random.default_rng(5)
        a, b, c = (random_quartic(rng) for _ in range(3))
        assert sampling_loss(a, c) <= sampling_loss(a, b) + sampling_loss(b, c) + 1e-10

    def test_degree_elevation_invariance(self):
        # the same geometric segment as a line and as its elevated quartic
        rng = np.random.default_rng(14)
        p0, p1 = rng.uniform(0, 512, (2, 2))
        line = BezierCurve([p0, p1])
        lam = np.linspace(0, 1, 5)[:, None]
        elevated = BezierCurve(p0 * (1 - lam) + p1 * lam)
        assert sampling_loss(elevated, line) < 1e-10

    def test_short_paramset_rejected(self):
        from trunkline import ParamSet

        c = random_quartic(np.random.default_rng(15))
        with pytest.raises(DomainError):
            sampling_loss(c, c, ParamSet([0.5]))


class TestSamplingGrad:
    def test_zero_at_identity(self):
        c = random_quartic(np.random.default_rng(6))
        assert np.all(sampling_loss_grad(c, c) == 0.0)

    def test_translated_gradient_is_basis_means(self):
        c = random_quartic(np.random.default_rng(7))
        params = uniform_params(50)
        grad = sampling_loss_grad(c.translated((3, 4)), c, params)
        from trunkline import bernstein_basis

        means = bernstein_basis(params, 4).mean(axis=0)
        assert np.allclose(grad, np.stack([means, means], axis=1), atol=1e-12)
        assert np.allclose(grad.sum(axis=0), [1.0, 1.0], atol=1e-12)

    def test_finite_differences(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            pred, gt = kink_avoiding_pair(rng)
            analytic = sampling_loss_grad(pred, gt)
            fd = finite_difference_grad(lambda p: sampling_loss(p, gt), pred)
            assert rel_err(analytic, fd) < 1e-4


class TestWing:
    def test_zero(self):
        assert wing(0.0, WING) == 0.0

    def test_log_branch(self):
        assert wing(2.0, WING) == pytest.approx(10 * math.log(2), abs=1e-9)

    def test_linear_branch(self):
        assert wing(15.0, WING) == pytest.approx(5 + 10 * math.log(6), abs=1e-9)

    def test_even(self):
        xs = np.array([0.5, 3.0, 9.0, 12.0, 40.0])
        assert np.array_equal(wing(xs, WING), wing(-xs, WING))

    def test_continuity_at_w(self):
        inner = WING.w * math.log1p(WING.w / WING.epsilon)
        outer = WING.w - WING.linear_offset
        assert abs(inner - outer) < 1e-12
        eps = 1e-9
        assert abs(wing(WING.w - eps, WING) - wing(WING.w + eps, WING)) < 1e-7

    def test_monotone_grid(self):
        xs = np.linspace(0, 30, 400)
        vals = wing(xs, WING)
        assert np.all(np.diff(vals) >= 0)

    def test_param_validation(self):
        with pytest.raises(DomainError):
            WingParams(w=0.0)
        with pytest.raises(DomainError):
            WingParams(epsilon=-1.0)


class TestEndpointLoss:
    def test_identity(self):
        c = random_quartic(np.random.default_rng(9))
        assert endpoint_loss(c, c, WING) == 0.0

    def test_one_endpoint_displaced(self):
        c = BezierCurve([[0, 0], [1, 1], [2, 2], [3, 3], [4, 4]])
        moved = np.array(c.control_points)
        moved[0] += [0.0, 2.0]  # Euclidean distance 2
        assert endpoint_loss(BezierCurve(moved), c, WING) == pytest.approx(
            10 * math.log(2), abs=1e-9
        )

    def test_both_endpoints_displaced(self):
        c = BezierCurve([[0, 0], [1, 1], [2, 2], [3, 3], [4, 4]])
        moved = np.array(c.control_points)
        moved[0] += [9.0, 12.0]  # distance 15
        moved[-1] += [15.0, 0.0]
        assert endpoint_loss(BezierCurve(moved), c, WING) == pytest.approx(
            2 * (5 + 10 * math.log(6)), abs=1e-9
        )

    def test_intermediate_points_do_not_matter(self):
        rng = np.random.default_rng(10)
        c = random_quartic(rng)
        moved = np.array(c.control_points)
        moved[1:4] += rng.uniform(-50, 50, size=(3, 2))
        assert endpoint_loss(BezierCurve(moved), c, WING) == 0.0

    def test_degree_mismatch(self):
        with pytest.raises(DomainError):
            endpoint_loss(BezierCurve([[0, 0], [1, 1]]), random_quartic(np.random.default_rng(0)))


class TestEndpointGrad:
    def test_zero_at_identity(self):
        c = random_quartic(np.random.default_rng(11))
        assert np.all(endpoint_loss_grad(c, c, WING) == 0.0)

    def test_interior_rows_zero(self):
        rng = np.random.default_rng(12)
        gt = random_quartic(rng)
        pred = BezierCurve(gt.control_points + rng.uniform(1, 5, size=(5, 2)))
        grad = endpoint_loss_grad(pred, gt, WING)
        assert np.all(grad[1:4] == 0.0)

    def test_finite_differences(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            gt = random_quartic(rng)
            # displacements keep distances off zero and away from the w kink
            offsets = np.zeros((5, 2))
            for row in (0, -1):
                while True:
                    cand = rng.uniform(-15, 15, size=2)
                    d = np.linalg.norm(cand)
                    if d > 1e-2 and abs(d - WING.w) > 1e-2:
                        offsets[row] = cand
                        break
            pred = BezierCurve(gt.control_points + offsets)
            analytic = endpoint_loss_grad(pred, gt, WING)
            fd = finite_difference_grad(lambda p: endpoint_loss(p, gt, WING), pred)
            assert rel_err(analytic, fd) < 1e-4


class TestCombinedLoss:
    def test_zero(self):
        assert combined_loss(0.0, 0.0, 0.0).total == 0.0

    def test_default_weight_combination(self):
        bd = combined_loss(0.5, 2.0, 3.0, LossWeights(1.0, 1.0, 0.1))
        assert bd.total == pytest.approx(2.8, abs=1e-15)

    def test_projection(self):
        bd = combined_loss(0.7, 2.0, 3.0, LossWeights(1.0, 0.0, 0.0))
        assert bd.total == 0.7

    def test_linearity(self):
        w = LossWeights(1.0, 1.0, 0.1)
        base = combined_loss(0.3, 1.5, 2.0, w).total
        doubled = combined_loss(0.3, 3.0, 2.0, w).total
        assert doubled - base == pytest.approx(w.lambda_tsl * 1.5, abs=1e-12)

    def test_negative_component_rejected(self):
        with pytest.raises(DomainError):
            combined_loss(0.0, -1.0, 0.0)
        with pytest.raises(DomainError):
            combined_loss(0.0, 0.0, -0.5)

    def test_weight_validation(self):
        with pytest.raises(DomainError):
            LossWeights(-1.0, 1.0, 1.0)
