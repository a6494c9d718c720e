import numpy as np
import pytest

from trunkline import (
    AnnotationPolyline,
    BezierCurve,
    DegenerateInputError,
    DomainError,
    UnderdeterminedError,
    chord_length_params,
    design_matrix,
    fit_curve,
    sample,
    sampling_loss,
    uniform_params,
)


def random_quartic(rng, lo=0.0, hi=512.0):
    return BezierCurve(rng.uniform(lo, hi, size=(5, 2)))


class TestDesignMatrix:
    def test_degree_one_endpoints_identity(self):
        mat = design_matrix(uniform_params(2), 1)
        assert np.allclose(mat, np.eye(2), atol=0)

    def test_rows_sum_to_one(self):
        mat = design_matrix(uniform_params(9), 4)
        assert np.allclose(mat.sum(axis=1), 1.0, atol=1e-12)

    def test_center_entry(self):
        mat = design_matrix(uniform_params(5), 4)
        assert mat[2, 2] == pytest.approx(0.375, abs=1e-15)

    def test_underdetermined(self):
        with pytest.raises(UnderdeterminedError):
            design_matrix(uniform_params(4), 4)


class TestFitCurve:
    def test_collinear_points(self):
        pts = np.stack([np.linspace(0, 8, 5), np.linspace(0, 4, 5)], axis=1)
        result = fit_curve(AnnotationPolyline(pts), degree=4)
        ctrl = result.curve.control_points
        assert result.residual_rms < 1e-9
        assert np.allclose(ctrl[0], pts[0], atol=1e-9)
        assert np.allclose(ctrl[-1], pts[-1], atol=1e-9)
        # collinearity of the recovered control points
        d = pts[-1] - pts[0]
        normal = np.array([-d[1], d[0]]) / np.linalg.norm(d)
        assert np.max(np.abs((ctrl - pts[0]) @ normal)) < 1e-9

    def test_square_system_round_trip(self):
        rng = np.random.default_rng(41)
        for _ in range(20):
            original = random_quartic(rng)
            pts = sample(original, uniform_params(5))
            result = fit_curve(AnnotationPolyline(pts), degree=4)
            assert np.max(np.abs(result.curve.control_points - original.control_points)) < 1e-6

    def test_overdetermined_round_trip(self):
        rng = np.random.default_rng(43)
        for _ in range(20):
            original = random_quartic(rng)
            pts = sample(original, uniform_params(9))
            result = fit_curve(AnnotationPolyline(pts), degree=4)
            assert result.residual_rms < 1e-9

    def test_sampling_loss_round_trip(self):
        rng = np.random.default_rng(47)
        original = random_quartic(rng)
        pts = sample(original, uniform_params(7))
        refit = fit_curve(AnnotationPolyline(pts), degree=4).curve
        assert sampling_loss(original, refit) < 1e-6

    def test_interpolation_at_parameters(self):
        rng = np.random.default_rng(53)
        pts = rng.uniform(0, 512, size=(5, 2))
        result = fit_curve(AnnotationPolyline(pts), degree=4)
        on_curve = sample(result.curve, uniform_params(5))
        assert np.max(np.linalg.norm(on_curve - pts, axis=1)) < 1e-6

    def test_affine_equivariance(self):
        rng = np.random.default_rng(59)
        pts = rng.uniform(0, 512, size=(7, 2))
        A = rng.uniform(-1.5, 1.5, size=(2, 2))
        b = rng.uniform(-50, 50, size=2)
        direct = fit_curve(AnnotationPolyline(pts @ A.T + b), degree=4).curve
        mapped = fit_curve(AnnotationPolyline(pts), degree=4).curve.control_points @ A.T + b
        assert np.max(np.abs(direct.control_points - mapped)) < 1e-6

    def test_residual_non_increasing_in_degree(self):
        rng = np.random.default_rng(61)
        pts = rng.uniform(0, 512, size=(9, 2))
        residuals = [
            fit_curve(AnnotationPolyline(pts), degree=d).residual_rms for d in range(2, 7)
        ]
        for lower, higher in zip(residuals, residuals[1:]):
            assert higher <= lower + 1e-9

    def test_underdetermined(self):
        with pytest.raises(UnderdeterminedError):
            fit_curve(AnnotationPolyline([[0, 0], [1, 1], [2, 2]]), degree=4)

    def test_chord_length_option(self):
        # unevenly spaced samples of a line: chord-length reproduces the segment
        ts = np.array([0.0, 0.05, 0.2, 0.6, 1.0])
        pts = np.stack([10 * ts, 5 * ts], axis=1)
        result = fit_curve(AnnotationPolyline(pts), degree=4, parameterization="chord")
        assert result.parameterization == "chord"
        assert result.residual_rms < 1e-9

    def test_coincident_points_uniform_ok_chord_rejected(self):
        pts = np.array([[0, 0], [1, 1], [1, 1], [3, 3], [4, 4]], dtype=float)
        fit_curve(AnnotationPolyline(pts), degree=4, parameterization="uniform")
        with pytest.raises(DegenerateInputError):
            fit_curve(AnnotationPolyline(pts), degree=4, parameterization="chord")

    def test_unknown_parameterization(self):
        with pytest.raises(DomainError):
            fit_curve(AnnotationPolyline(np.zeros((5, 2)) + np.arange(5)[:, None]), 4, "arc")


class TestChordParams:
    def test_normalization(self):
        params = chord_length_params(np.array([[0, 0], [3, 0], [3, 1]], dtype=float))
        assert params.values[0] == 0.0
        assert params.values[-1] == 1.0
        assert np.allclose(params.values, [0.0, 0.75, 1.0], atol=1e-12)

    def test_polyline_validation(self):
        with pytest.raises(DomainError):
            AnnotationPolyline([[0, 0]])
        with pytest.raises(DomainError):
            AnnotationPolyline([[0, 0], [np.inf, 1]])
