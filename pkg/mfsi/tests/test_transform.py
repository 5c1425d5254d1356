import unittest

import numpy as np

from mfsi.errors import SmallnessViolationError
from mfsi.solver.transform import (
    Cutoff,
    build_diffeo,
    check_smallness,
    cutoff_eval,
    forward_map,
    invert_vertical,
    inverse_map,
    shear_fields,
    transform_estimates,
)
from mfsi.tests.helpers import small_grid


def _plate(grid, fraction, mode=1):
    cutoff = Cutoff(grid.alpha)
    shape = np.sin(mode * np.pi * grid.s_nodes / grid.L) ** 2
    return fraction * cutoff.delta0 * shape / shape.max()


def _sine_jets(amp, k, y1):
    return (
        amp * np.sin(k * y1),
        amp * k * np.cos(k * y1),
        -amp * k**2 * np.sin(k * y1),
        -amp * k**3 * np.cos(k * y1),
    )


class TestCutoff(unittest.TestCase):
    """カットオフ関数 ψ と δ₀ を確認するテスト。"""

    def test_plateau_and_support(self):
        """|z| ≤ α/2 で 1、|z| ≥ α で 0 になることを検証する。"""
        cutoff = Cutoff(0.25)
        psi, d1, d2, _ = cutoff.derivatives(np.array([-0.1, 0.0, 0.125, 0.25, -0.3]))
        self.assertTrue(np.allclose(psi, [1.0, 1.0, 1.0, 0.0, 0.0]))
        self.assertTrue(np.allclose(d1, 0.0))
        self.assertTrue(np.allclose(d2, 0.0))

    def test_delta0(self):
        """δ₀ = 2α/15 かつ δ₀·max|ψ'| = 1/2 を検証する。"""
        cutoff = Cutoff(0.3)
        self.assertAlmostEqual(cutoff.delta0, 2.0 * 0.3 / 15.0)
        z = np.linspace(-0.3, 0.3, 20001)
        slope = np.abs(cutoff.derivatives(z)[1]).max()
        self.assertAlmostEqual(slope * cutoff.delta0, 0.5, places=5)

    def test_derivative_matches_finite_difference(self):
        """ψ' と ψ'' が差分近似と一致することを検証する。"""
        cutoff = Cutoff(0.25)
        z = np.array([-0.2, -0.17, 0.16, 0.21])
        eps = 1e-6
        psi_p = cutoff.derivatives(z + eps)
        psi_m = cutoff.derivatives(z - eps)
        _, d1, d2, _ = cutoff.derivatives(z)
        self.assertTrue(np.allclose((psi_p[0] - psi_m[0]) / (2 * eps), d1, atol=1e-6))
        self.assertTrue(np.allclose((psi_p[1] - psi_m[1]) / (2 * eps), d2, atol=1e-4))

    def test_cutoff_eval_is_even(self):
        """cutoff_eval が偶関数 ψ とその導関数を返すことを検証する。"""
        z = np.linspace(0.0, 0.3, 31)
        psi, d1, d2 = cutoff_eval(z, 0.25)
        psi_m, d1_m, d2_m = cutoff_eval(-z, 0.25)
        self.assertTrue(np.array_equal(psi, psi_m))
        self.assertTrue(np.array_equal(d1, -d1_m))
        self.assertTrue(np.array_equal(d2, d2_m))
        self.assertTrue(np.array_equal(d1, Cutoff(0.25).derivatives(z)[1]))


class TestSmallness(unittest.TestCase):
    """小ささ条件の判定を確認するテスト。"""

    def test_threshold(self):
        """0.9δ₀ は許容、1.1δ₀ は違反となることを検証する。"""
        self.assertTrue(check_smallness(np.array([0.9, -0.5]), 1.0).ok)
        check = check_smallness(np.array([0.2, -1.1]), 1.0)
        self.assertFalse(check.ok)
        self.assertAlmostEqual(check.margin, 1.1)
        with self.assertRaises(SmallnessViolationError) as ctx:
            check.raise_if_violated(sample=3)
        self.assertEqual(ctx.exception.sample, 3)
        self.assertEqual(ctx.exception.reason, "smallness-violation")

    def test_build_diffeo_rejects_large_plate(self):
        """δ₀ を超える板変位で変換の構築が拒否されることを検証する。"""
        grid = small_grid()
        with self.assertRaises(SmallnessViolationError):
            build_diffeo(_plate(grid, 1.1), np.zeros(grid.n_w), grid)


class TestShearFields(unittest.TestCase):
    """せん断変換の係数場を確認するテスト。"""

    def test_identity_for_flat_plate(self):
        """η = 0 で恒等変換に帰着することを検証する。"""
        grid = small_grid()
        zeros = np.zeros(grid.n_w)
        fields = build_diffeo(zeros, zeros, grid)
        eye = np.eye(2)[:, :, None, None]
        self.assertTrue(np.array_equal(fields.detJ, np.ones(fields.shape)))
        self.assertTrue(np.allclose(fields.b, eye))
        self.assertTrue(np.allclose(fields.aX, eye))
        self.assertTrue(np.allclose(fields.Yx, eye))
        self.assertEqual(np.abs(fields.dA).max(), 0.0)
        self.assertEqual(np.abs(fields.dtY).max(), 0.0)

    def test_unit_determinant_in_strip(self):
        """|y₃| < α/2 の帯で det ∇X = 1 となることを検証する。"""
        grid = small_grid()
        for fraction in (0.1, 0.3, 0.5, 0.7, 0.9):
            eta = _plate(grid, fraction, mode=2)
            fields = build_diffeo(eta, eta, grid)
            strip = np.abs(fields.y3) < 0.5 * grid.alpha
            self.assertTrue(strip.any())
            self.assertLessEqual(np.abs(fields.detJ[strip] - 1.0).max(), 1e-13)

    def test_algebraic_identities(self):
        """b·a(X) = I、a(X)·det = ∇X、Yx·∇X = I を検証する。"""
        grid = small_grid()
        eta = _plate(grid, 0.8)
        fields = build_diffeo(eta, 0.3 * eta, grid)
        eye = np.eye(2)[:, :, None, None]
        self.assertTrue(np.allclose(np.einsum("ij...,jk...->ik...", fields.b, fields.aX), eye, atol=1e-14))
        self.assertTrue(np.allclose(fields.aX * fields.detJ, fields.gradX, atol=1e-14))
        self.assertTrue(np.allclose(np.einsum("ij...,jk...->ik...", fields.Yx, fields.gradX), eye, atol=1e-14))
        self.assertGreaterEqual(fields.detJ.min(), 0.5)
        self.assertLessEqual(fields.detJ.max(), 1.5)

    def test_coefficient_derivative_matches_finite_difference(self):
        """∂a/∂x_j(X) が y 方向の差分と連鎖律の組み合わせに一致することを検証する。"""
        cutoff = Cutoff(0.25)
        amp, k = 0.5 * cutoff.delta0, np.pi
        y1 = np.array([0.2, 0.45, 0.7])
        y3 = np.array([-0.16, -0.2, -0.19])
        rate = (np.zeros(3), np.zeros(3))
        base = shear_fields(cutoff, y1, y3, _sine_jets(amp, k, y1), rate)
        eps = 1e-6
        dA_y = []
        for axis in range(2):
            shift = (eps, 0.0) if axis == 0 else (0.0, eps)
            plus = shear_fields(cutoff, y1 + shift[0], y3 + shift[1], _sine_jets(amp, k, y1 + shift[0]), rate)
            minus = shear_fields(cutoff, y1 - shift[0], y3 - shift[1], _sine_jets(amp, k, y1 - shift[0]), rate)
            dA_y.append((plus.aX - minus.aX) / (2 * eps))
        numeric = np.einsum("lik...,lj...->jik...", np.array(dA_y), base.Yx)
        self.assertTrue(np.allclose(numeric, base.dA, atol=1e-7))


class TestTimeDerivatives(unittest.TestCase):
    """∂tX, ∂tY と (∂t a)(X) を時間差分と比較するテスト。"""

    def setUp(self):
        self.cutoff = Cutoff(0.25)
        self.amp, self.k, self.t0 = 0.6 * self.cutoff.delta0, np.pi, 0.7
        self.y1 = np.array([0.2, 0.45, 0.7, 0.3])
        self.y3 = np.array([-0.16, -0.2, -0.19, -0.05])

    def _fields(self, t, y3):
        jets = _sine_jets(self.amp * np.sin(t), self.k, self.y1)
        rate = _sine_jets(self.amp * np.cos(t), self.k, self.y1)[:2]
        return shear_fields(self.cutoff, self.y1, y3, jets, rate)

    def test_rates_match_time_differences(self):
        """参照点固定の ∂tX と、物理点固定の ∂tY, (∂t a)(X) が中心差分と一致することを検証する。"""
        eps = 1e-4
        base = self._fields(self.t0, self.y3)
        plus = self._fields(self.t0 + eps, self.y3)
        minus = self._fields(self.t0 - eps, self.y3)
        self.assertTrue(np.allclose((plus.X3 - minus.X3) / (2 * eps), base.dtX[1], atol=1e-8))
        self.assertEqual(np.abs(base.dtX[0]).max(), 0.0)

        # follow the physical point x = X(t0, y) backwards in time
        moved = []
        for t in (self.t0 + eps, self.t0 - eps):
            eta = _sine_jets(self.amp * np.sin(t), self.k, self.y1)[0]
            y3 = invert_vertical(self.cutoff, eta, base.X3)
            moved.append((y3, self._fields(t, y3)))
        (y_plus, f_plus), (y_minus, f_minus) = moved
        self.assertTrue(np.allclose((y_plus - y_minus) / (2 * eps), base.dtY[1], atol=1e-7))
        self.assertTrue(np.allclose((f_plus.aX - f_minus.aX) / (2 * eps), base.dta, atol=1e-6))
        self.assertGreater(np.abs(base.dta).max(), 1e-3)


class TestInverseMap(unittest.TestCase):
    """逆写像 Y の精度を確認するテスト。"""

    def test_round_trip(self):
        """X(Y(x)) = x が 1e-10 以内で成り立つことを検証する。"""
        grid = small_grid()
        rng = np.random.default_rng(1)
        for fraction in (0.2, 0.5, 0.9):
            eta = _plate(grid, fraction)
            x1 = rng.uniform(0.0, grid.L, 200)
            x3 = rng.uniform(-grid.H_f, 0.2, 200)
            y1, y3 = inverse_map(grid, eta, x1, x3)
            back1, back3 = forward_map(grid, eta, y1, y3)
            self.assertLessEqual(np.abs(back1 - x1).max(), 1e-10)
            self.assertLessEqual(np.abs(back3 - x3).max(), 1e-10)


class TestTransformEstimates(unittest.TestCase):
    """変換の恒等写像からのずれの見積もりを確認するテスト。"""

    def test_flat_plate(self):
        """η = 0 ではすべてのずれがゼロになることを検証する。"""
        grid = small_grid()
        est = transform_estimates(grid, np.zeros(grid.n_w))
        self.assertEqual(est["det"], 0.0)
        self.assertEqual(est["det_min"], 1.0)

    def test_linear_in_plate_size(self):
        """ずれを ||η||_{C¹} で割った値が有界で、det が [1/2, 3/2] に収まることを検証する。"""
        grid = small_grid()
        est = transform_estimates(grid, _plate(grid, 0.9))
        self.assertGreater(est["c1_norm"], 0.0)
        self.assertLess(est["det"], 10.0 / grid.alpha)
        self.assertGreaterEqual(est["det_min"], 0.5)
        self.assertLessEqual(est["det_max"], 1.5)


if __name__ == "__main__":
    unittest.main()
