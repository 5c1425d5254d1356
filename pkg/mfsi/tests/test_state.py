import math
import unittest

import numpy as np

from mfsi.errors import InvalidInputError
from mfsi.solver.state import (
    HarmonicForcing,
    PeriodicState,
    conjugate_defect,
    from_samples,
    sample_times,
    symmetrize,
    to_samples,
)
from mfsi.tests.helpers import small_grid


def _random_coeffs(K, n, seed=0):
    rng = np.random.default_rng(seed)
    return symmetrize(rng.standard_normal((2 * K + 1, n)) + 1j * rng.standard_normal((2 * K + 1, n)))


class TestSampling(unittest.TestCase):
    """時間標本と調和係数の変換を確認するテスト。"""

    def test_cosine_coefficients(self):
        """cos(ω₀t) の係数が k = ±1 で 1/2 となることを検証する。"""
        T, M = 2.0, 16
        t = sample_times(T, M)
        coeffs = from_samples(np.cos(2.0 * math.pi * t / T)[:, None], K=3)
        self.assertAlmostEqual(coeffs[4, 0].real, 0.5)
        self.assertAlmostEqual(coeffs[2, 0].real, 0.5)
        self.assertLess(np.abs(np.delete(coeffs[:, 0], [2, 4])).max(), 1e-14)

    def test_round_trip(self):
        """係数 → 標本 → 係数で元に戻ることを検証する。"""
        coeffs = _random_coeffs(K=4, n=5)
        values = to_samples(coeffs, M=12)
        self.assertEqual(values.shape, (12, 5))
        self.assertTrue(np.allclose(from_samples(values, K=4), coeffs, atol=1e-12))

    def test_too_few_samples(self):
        """M < 2K+1 のとき InvalidInputError になることを検証する。"""
        coeffs = _random_coeffs(K=3, n=2)
        with self.assertRaises(InvalidInputError):
            to_samples(coeffs, M=6)
        with self.assertRaises(InvalidInputError):
            from_samples(np.zeros((6, 2)), K=3)


class TestSymmetrize(unittest.TestCase):
    """共役対称化を確認するテスト。"""

    def test_conjugate_symmetry(self):
        """負の調和が正の調和の共役となり、k = 0 が実数になることを検証する。"""
        rng = np.random.default_rng(2)
        raw = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        self.assertGreater(conjugate_defect(raw), 0.0)
        sym = symmetrize(raw)
        self.assertEqual(conjugate_defect(sym), 0.0)
        self.assertTrue(np.array_equal(sym[3:], raw[3:]))
        self.assertEqual(np.abs(sym[2].imag).max(), 0.0)


class TestContainers(unittest.TestCase):
    """調和係数のコンテナを確認するテスト。"""

    def setUp(self):
        self.grid = small_grid()

    def test_zeros_shapes(self):
        """ゼロ状態の各配列が (2K+1, n) の形状を持つことを検証する。"""
        g = self.grid
        state = PeriodicState.zeros(g, T=1.0, K=2)
        self.assertEqual(state.u.shape, (5, g.n_u))
        self.assertEqual(state.p.shape, (5, g.n_p))
        self.assertEqual(state.eta1.shape, (5, g.n_w))
        self.assertEqual(state.d2.shape, (5, g.n_d))
        self.assertEqual(state.g.shape, (5, g.n_h))
        self.assertAlmostEqual(state.omega0, 2.0 * math.pi)
        self.assertEqual(list(state.ks), [-2, -1, 0, 1, 2])

    def test_harmonic_out_of_range(self):
        """|k| > K の調和を要求すると InvalidInputError になることを検証する。"""
        state = PeriodicState.zeros(self.grid, T=1.0, K=1)
        self.assertIn("u", state.harmonic(-1))
        with self.assertRaises(InvalidInputError):
            state.harmonic(2)

    def test_only_keeps_interface_parts_with_parent(self):
        """only が界面成分を親成分と一緒に残すことを検証する。"""
        forcing = HarmonicForcing.zeros(self.grid, K=1).map(lambda v: v + 1.0)
        kept = forcing.only(["f"])
        self.assertEqual(np.abs(kept.f_gamma).min(), 1.0)
        self.assertEqual(np.abs(kept.g).max(), 0.0)
        self.assertEqual(np.abs(kept.h_gamma).max(), 0.0)

    def test_combine_and_scale(self):
        """combine と scaled が補助未知数も含めて線形に作用することを検証する。"""
        base = PeriodicState.zeros(self.grid, T=1.0, K=1).map(lambda v: v + 1.0)
        out = base.combine(base.scaled(2.0), -1.0)
        self.assertEqual(out.max_abs(), 1.0)
        self.assertTrue(np.allclose(out.p_gamma, -1.0))
        self.assertTrue(np.allclose(out.c, -1.0))

    def test_samples_round_trip(self):
        """状態の時間標本から係数を復元できることを検証する。"""
        g = self.grid
        state = PeriodicState.zeros(g, T=0.5, K=2)
        fields = {name: _random_coeffs(2, value.shape[1], seed=i) for i, (name, value) in enumerate(state.items())}
        state = PeriodicState(T=0.5, K=2, **fields)
        back = PeriodicState.from_samples(state.samples(8), T=0.5, K=2)
        for name, value in state.items():
            self.assertTrue(np.allclose(getattr(back, name), value, atol=1e-12), name)


if __name__ == "__main__":
    unittest.main()
