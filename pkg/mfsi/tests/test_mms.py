import math
import unittest

import numpy as np

from mfsi.config.run_config import PhysicsConfig
from mfsi.errors import CompatibilityError, InvalidInputError, SmallnessViolationError
from mfsi.solver.grid import build_operators
from mfsi.solver.harmonic_solver import HarmonicSolver
from mfsi.solver.mms import (
    CATALOGUE,
    Recipe,
    amplitude_for_margin,
    fitted_order,
    get_recipe,
    mms_errors,
    mms_generate,
    observed_orders,
    plate_primitive,
    plate_shape,
)
from mfsi.solver.nonlinear import nonlinear_rhs_harmonics
from mfsi.tests.helpers import small_grid

PHYSICS = PhysicsConfig()


class TestPlateShape(unittest.TestCase):
    """板のモード形状を確認するテスト。"""

    def test_clamped_and_mean_free(self):
        """端で値と傾きがゼロ、積分がゼロとなることを検証する。"""
        s = np.linspace(0.0, 2.0, 20001)
        for mode in (1, 2, 3):
            chi = plate_shape(mode, 2.0, s)
            self.assertAlmostEqual(chi[0], 0.0, places=14)
            self.assertAlmostEqual(chi[-1], 0.0, places=14)
            self.assertAlmostEqual(plate_shape(mode, 2.0, np.array([2.0]), 1)[0], 0.0, places=12)
            self.assertAlmostEqual(plate_primitive(mode, 2.0, np.array([2.0]))[0], 0.0, places=14)

    def test_closed_form(self):
        """正弦級数が sin(2ma) sin²(a) に一致し、導関数が差分と一致することを検証する。"""
        s = np.linspace(0.1, 0.9, 9)
        a = np.pi * s
        self.assertTrue(np.allclose(plate_shape(2, 1.0, s), np.sin(4.0 * a) * np.sin(a) ** 2, atol=1e-14))
        eps = 1e-6
        numeric = (plate_primitive(2, 1.0, s + eps) - plate_primitive(2, 1.0, s - eps)) / (2 * eps)
        self.assertTrue(np.allclose(numeric, plate_shape(2, 1.0, s), atol=1e-8))


class TestRecipes(unittest.TestCase):
    """製造解のレシピと入力検証を確認するテスト。"""

    def setUp(self):
        self.grid = small_grid()

    def test_catalogue(self):
        self.assertEqual(set(CATALOGUE), {"rest", "standing-wave", "sloshing", "curved-layer"})
        self.assertIs(get_recipe(CATALOGUE["rest"]), CATALOGUE["rest"])
        with self.assertRaises(InvalidInputError):
            get_recipe("tsunami")

    def test_rest_is_zero(self):
        """静止レシピで状態と外力がゼロとなることを検証する。"""
        exact, forcing, info = mms_generate("rest", self.grid, PHYSICS, K=2, amplitude=1e-3)
        self.assertEqual(exact.max_abs(), 0.0)
        self.assertEqual(forcing.max_abs(), 0.0)
        self.assertEqual(info["amplitude"], 0.0)

    def test_first_harmonic_only(self):
        """第 1 調和だけが非ゼロで、共役対称であることを検証する。"""
        exact, forcing, info = mms_generate("sloshing", self.grid, PHYSICS, K=2, amplitude=1e-3)
        self.assertEqual(np.abs(exact.u[[0, 2, 4]]).max(), 0.0)
        self.assertGreater(np.abs(exact.u[3]).max(), 0.0)
        self.assertEqual(exact.conjugate_defect(), 0.0)
        self.assertEqual(forcing.conjugate_defect(), 0.0)
        self.assertEqual(info["pressure_offset"].shape, (5,))
        self.assertEqual(info["pressure_offset"][3], 0.25e-3)

    def test_plate_motion(self):
        """η₁(t) = amplitude·sin(ω₀t)·χ となることを検証する。"""
        g = self.grid
        exact, _, _ = mms_generate("standing-wave", g, PHYSICS, K=1, amplitude=1e-3)
        samples = exact.samples(4, ("eta1",))["eta1"]
        chi = plate_shape(1, g.L, g.s_nodes)
        self.assertTrue(np.allclose(samples[1], 1e-3 * chi, atol=1e-15))
        self.assertTrue(np.allclose(samples[0], 0.0, atol=1e-15))

    def test_curved_solid_profile(self):
        """curved-layer の固体鉛直変位が界面で板に一致し、外壁で消え、z について線形でないことを検証する。"""
        g = self.grid
        exact, _, _ = mms_generate("curved-layer", g, PHYSICS, K=1, amplitude=1e-3)
        _, dz = g.split_solid(exact.d1[2])
        eta1 = exact.eta1[2]
        column = np.argmax(np.abs(eta1))
        z = np.concatenate([[0.0], g.z_solid, [g.H_s]])
        profile = np.concatenate([[eta1[column]], dz[column], [0.0]]) / eta1[column]
        q = np.cos(0.5 * np.pi * z / g.H_s) + 0.5 * np.sin(np.pi * z / g.H_s)
        self.assertTrue(np.allclose(profile, q, atol=1e-12))
        linear = 1.0 - z / g.H_s
        self.assertGreater(np.abs(profile - linear).max(), 0.3)

    def test_smallness_threshold(self):
        """0.9δ₀ の振幅は受理され、1.1δ₀ は拒否されることを検証する。"""
        g = self.grid
        ok = amplitude_for_margin(g, "standing-wave", 0.9)
        _, _, info = mms_generate("standing-wave", g, PHYSICS, K=1, amplitude=ok)
        self.assertAlmostEqual(info["smallness_margin"], 0.9)
        with self.assertRaises(SmallnessViolationError):
            mms_generate("standing-wave", g, PHYSICS, K=1, amplitude=amplitude_for_margin(g, "standing-wave", 1.1))

    def test_incompatible_mode(self):
        """半整数モードは壁での流束条件を満たさず拒否されることを検証する。"""
        with self.assertRaises(CompatibilityError):
            mms_generate(Recipe("half", 1.5), self.grid, PHYSICS, K=1, amplitude=1e-4)

    def test_needs_first_harmonic(self):
        with self.assertRaises(InvalidInputError):
            mms_generate("standing-wave", self.grid, PHYSICS, K=0, amplitude=1e-4)


class TestErrors(unittest.TestCase):
    """誤差と収束次数の計算を確認するテスト。"""

    def test_observed_orders(self):
        rates = observed_orders([0.2, 0.1, 0.05], [4e-2, 1e-2, 0.0])
        self.assertTrue(math.isnan(rates[0]))
        self.assertAlmostEqual(rates[1], 2.0)
        self.assertTrue(math.isnan(rates[2]))

    def test_fitted_order(self):
        """log-log の最小二乗傾きが 2 次の誤差列で 2 となり、ゼロ誤差では NaN となることを検証する。"""
        h = [0.1, 0.05, 0.025]
        self.assertAlmostEqual(fitted_order(h, [3.0 * x**2 for x in h]), 2.0)
        self.assertTrue(math.isnan(fitted_order(h, [1e-3, 0.0, 1e-5])))

    def test_errors_vanish_for_exact_state(self):
        exact, _, _ = mms_generate("sloshing", small_grid(), PHYSICS, K=1, amplitude=1e-3)
        errors = mms_errors(exact, exact, PHYSICS.delta)
        self.assertEqual(set(errors), {"error_u", "error_eta1", "error_d"})
        self.assertEqual(max(errors.values()), 0.0)


class TestConvergence(unittest.TestCase):
    """格子細分による製造解の収束を確認するテスト。"""

    def _errors(self, **mesh):
        grid = small_grid(**mesh)
        solver = HarmonicSolver(build_operators(grid, PHYSICS.mu_s, PHYSICS.lambda_s), PHYSICS.delta, PHYSICS.T)
        exact, forcing, _ = mms_generate("standing-wave", grid, PHYSICS, K=1, amplitude=1e-3)
        return mms_errors(solver.solve(forcing), exact, PHYSICS.delta)

    def test_refinement_reduces_errors(self):
        """(8, 8, 6) → (16, 16, 12) で各誤差が 0.7 倍未満に減ることを検証する。"""
        coarse = self._errors()
        fine = self._errors(n_h=16, n_zf=16, n_zs=12)
        for name in ("error_u", "error_eta1", "error_d"):
            self.assertLess(fine[name], 0.7 * coarse[name], name)

    def test_nonlinear_forcing_subtracts_terms_of_exact_state(self):
        """非線形モードの外力が線形モードの外力から厳密解の非線形項を引いたものになることを検証する。"""
        grid = small_grid()
        _, linear, _ = mms_generate("standing-wave", grid, PHYSICS, K=1, amplitude=1e-3)
        exact, full, info = mms_generate("standing-wave", grid, PHYSICS, K=1, amplitude=1e-3, nonlinear=True)
        self.assertTrue(info["nonlinear"])
        terms = nonlinear_rhs_harmonics(exact, grid)
        self.assertGreater(terms.max_abs(), 0.0)
        difference = full.combine(linear, -1.0).combine(terms)
        self.assertLessEqual(difference.max_abs(), 1e-12 * linear.max_abs())


if __name__ == "__main__":
    unittest.main()
