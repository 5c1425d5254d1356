import unittest

import numpy as np

from mfsi.config.run_config import PhysicsConfig
from mfsi.errors import InvalidInputError, SingularSystemError, UnstableSpectrumError
from mfsi.solver.liftings import LiftingSolvers
from mfsi.solver.mfs_operator import MfsOperator, assemble_amfs_dense, build_block_operators
from mfsi.solver.spectral import (
    block_spectra,
    compute_spectrum,
    distance_to_spectrum,
    energy_gram,
    energy_identity_residual,
    energy_weight,
    resolvent_norm,
    resolvent_scan,
    resolvent_trend,
    spectrum_match_defect,
)
from mfsi.tests.helpers import small_operators


class TestSmallMatrices(unittest.TestCase):
    """小さな既知行列でスペクトル計算を確認するテスト。"""

    def test_sorted_by_real_part(self):
        """固有値が実部の降順に並び、不安定な固有値が検出されることを検証する。"""
        report = compute_spectrum(np.diag([-1.0, 0.5, -3.0]))
        self.assertTrue(np.allclose(report.eigenvalues, [0.5, -1.0, -3.0]))
        self.assertAlmostEqual(report.spectral_bound, 0.5)
        self.assertEqual(list(report.unstable), [0])
        self.assertLess(report.max_residual, 1e-14)
        self.assertIsNone(report.max_energy_residual)
        self.assertEqual(report.to_dict()["unstable_count"], 1)

    def test_resolvent_of_diagonal(self):
        """対角行列の解像作用素ノルムが 1/dist となることを検証する。"""
        A = np.diag([-1.0, -2.0])
        rows = resolvent_scan(A, omega0=1.0, K=2, workers=2)
        self.assertEqual([row["k"] for row in rows], [-2, -1, 0, 1, 2])
        self.assertAlmostEqual(rows[2]["norm"], 1.0)
        self.assertAlmostEqual(rows[4]["norm"], 1.0 / np.sqrt(5.0))
        self.assertAlmostEqual(rows[4]["k_times_norm"], 2.0 / np.sqrt(5.0))
        self.assertEqual(rows[0]["norm"], rows[4]["norm"])

    def test_singular_shift(self):
        """固有値上のシフトで SingularSystemError になることを検証する。"""
        with self.assertRaises(SingularSystemError):
            resolvent_norm(np.zeros((3, 3)), 0.0)

    def test_unstable_operator_refused(self):
        """スペクトル上界が負でない行列の走査が UnstableSpectrumError になることを検証する。"""
        with self.assertRaises(UnstableSpectrumError) as ctx:
            resolvent_scan(np.diag([0.5, -1.0]), omega0=1.0, K=2, workers=1)
        self.assertAlmostEqual(ctx.exception.bound, 0.5)
        self.assertEqual(ctx.exception.reason, "singular-system")
        with self.assertRaises(UnstableSpectrumError):
            resolvent_scan(np.diag([0.0, -1.0]), omega0=1.0, K=1, workers=1)

    def test_weighted_norm(self):
        """重み W = diag(1, 10) のもとでノルムが W R W^-1 のものになることを検証する。"""
        A = np.array([[-1.0, 1.0], [0.0, -2.0]])
        W = np.diag([1.0, 10.0])
        rows = resolvent_scan(A, omega0=1.0, K=1, workers=1, weight=W)
        expected = np.linalg.norm(W @ np.linalg.inv(-A) @ np.linalg.inv(W), 2)
        self.assertAlmostEqual(rows[1]["norm"], expected)

    def test_trend_summary(self):
        """上限の位置、末尾の減衰、単調性の判定を検証する。"""
        norms = {0: 1.0, 1: 2.0, 2: 0.5, 3: 0.3, 4: 0.35, 5: 0.2}
        rows = [{"k": k, "norm": norms[abs(k)], "k_times_norm": abs(k) * norms[abs(k)]} for k in range(-5, 6)]
        trend = resolvent_trend(rows, decay_from=2)
        self.assertEqual(trend["sup_k"], 1)
        self.assertEqual(trend["sup_norm"], 2.0)
        self.assertTrue(trend["tail_decay"])
        self.assertFalse(trend["monotone"])
        self.assertAlmostEqual(trend["max_k_times_norm"], 2.0)
        self.assertFalse(resolvent_trend(rows, decay_from=3)["tail_decay"])

    def test_distance_to_spectrum(self):
        self.assertAlmostEqual(distance_to_spectrum(np.array([-1.0 + 1.0j, -2.0]), 1.0j), 1.0)


class TestOperatorSpectrum(unittest.TestCase):
    """小さな格子上の A_mfs のスペクトルを確認するテスト。"""

    @classmethod
    def setUpClass(cls):
        grid, ops = small_operators()
        cls.lift = LiftingSolvers(ops, delta=0.1)
        cls.blocks = build_block_operators(cls.lift, workers=2)
        cls.report = compute_spectrum(cls.blocks.A, blocks=cls.blocks, energy_count=10)

    def test_all_eigenvalues_in_left_half_plane(self):
        """すべての固有値の実部が負であることを検証する。"""
        self.assertLess(self.report.spectral_bound, 0.0)
        self.assertEqual(self.report.unstable.size, 0)
        self.assertGreater(self.report.decay_rate, 0.0)

    def test_eigenpair_residuals(self):
        """固有対の残差が十分小さいことを検証する。"""
        self.assertLessEqual(self.report.max_residual, 1e-8 * np.abs(self.report.eigenvalues).max())

    def test_energy_identity(self):
        """右端の固有対でエネルギー恒等式が成り立つことを検証する。"""
        energy = self.report.energy_residuals
        self.assertTrue(np.all(np.isfinite(energy[:10])))
        self.assertTrue(np.all(np.isnan(energy[10:])))
        self.assertLessEqual(self.report.max_energy_residual, 1e-6)

    def test_zero_vector_rejected(self):
        """ゼロベクトルを固有ベクトルとして渡すと InvalidInputError になることを検証する。"""
        with self.assertRaises(InvalidInputError):
            energy_identity_residual(self.blocks.operator, self.blocks.ground, -1.0, np.zeros(self.blocks.ground.size))

    def test_block_spectra(self):
        """厚い層ブロックの固有値が減衰波動のコンパニオン方程式を満たすことを検証する。"""
        spectra = block_spectra(self.blocks)
        self.assertLessEqual(spectra["companion_residual"], 1e-8)
        self.assertLess(spectra["thick_bound"], 0.0)
        self.assertAlmostEqual(spectra["coupled_bound"], self.report.spectral_bound, places=8)
        self.assertTrue(np.all(spectra["lame"] < 0.0))

    def test_resolvent_bounded_on_imaginary_axis(self):
        """虚軸上の解像作用素ノルムが有限で、共役対称であることを検証する。"""
        rows = resolvent_scan(self.blocks.A, omega0=2.0 * np.pi, K=3, workers=2)
        norms = [row["norm"] for row in rows]
        self.assertTrue(np.all(np.isfinite(norms)))
        self.assertEqual(norms[0], norms[-1])
        nearest = distance_to_spectrum(self.report.eigenvalues, 0.0)
        self.assertGreaterEqual(norms[3] * nearest, 1.0 - 1e-8)

    def test_energy_gram(self):
        """エネルギー内積のグラム行列が対称正定値で、Cholesky 分解で重みが得られることを検証する。"""
        gram = energy_gram(self.blocks.operator, self.blocks.ground)
        self.assertEqual(gram.shape, (self.blocks.ground.size,) * 2)
        self.assertTrue(np.allclose(gram, gram.T))
        W = energy_weight(gram)
        self.assertTrue(np.allclose(W.T @ W, gram))
        with self.assertRaises(InvalidInputError):
            energy_weight(-gram)

    def test_energy_norm_resolvent_trend(self):
        """エネルギーノルムのリゾルベントが小さな |k| で最大となり、k ≥ 8 の末尾で減衰することを検証する。"""
        W = energy_weight(energy_gram(self.blocks.operator, self.blocks.ground))
        rows = resolvent_scan(self.blocks.A, omega0=2.0 * np.pi, K=24, workers=2, weight=W)
        norms = {row["k"]: row["norm"] for row in rows if row["k"] >= 0}
        trend = resolvent_trend(rows, decay_from=8)
        self.assertLess(trend["sup_k"], 8)
        self.assertLess(norms[24], norms[8])
        self.assertLess(max(norms[k] for k in range(16, 25)), norms[8])
        # any norm is bounded below by the inverse distance to the spectrum
        nearest = distance_to_spectrum(self.report.eigenvalues, 0.0)
        self.assertGreaterEqual(norms[0] * nearest, 1.0 - 1e-8)

    def test_uncoupled_spectrum_is_union_of_blocks(self):
        """結合を外した作用素のスペクトルが 2 つの対角ブロックのスペクトルの和集合となることを検証する。"""
        uncoupled = build_block_operators(self.lift, coupled=False, workers=2)
        parts = uncoupled.split(uncoupled.A)
        scale = np.abs(uncoupled.A).max()
        self.assertLessEqual(np.abs(parts["top_right"]).max(), 1e-12 * scale)
        self.assertLessEqual(np.abs(parts["bottom_left"]).max(), 1e-12 * scale)
        spectra = block_spectra(uncoupled)
        self.assertLessEqual(spectra["union_defect"], 1e-8)
        self.assertEqual(spectra["coupled"].size, spectra["fluid_structure"].size + spectra["thick"].size)
        # the coupling blocks move the spectrum away from the union
        self.assertGreater(block_spectra(self.blocks)["union_defect"], 1e-8)

    def test_match_defect(self):
        """最適な一対一対応での距離が並べ替えに依存しないことを検証する。"""
        first = np.array([-1.0 + 2.0j, -1.0 - 2.0j, -3.0])
        self.assertEqual(spectrum_match_defect(first, first[::-1]), 0.0)
        self.assertAlmostEqual(spectrum_match_defect(first, first + 0.3), 0.1)
        with self.assertRaises(InvalidInputError):
            spectrum_match_defect(first, first[:2])


class TestSpectralBoundRefinement(unittest.TestCase):
    """格子細分に対するスペクトル上界の安定性を確認するテスト。"""

    MESHES = ((8, 8, 6), (12, 12, 9), (16, 16, 12))

    def test_bound_settles_under_refinement(self):
        """3 つの格子でスペクトル上界が負で、細かい 2 つの格子の間の変化が 20% 以下であることを検証する。"""
        physics = PhysicsConfig()
        bounds = []
        for n_h, n_zf, n_zs in self.MESHES:
            grid, ops = small_operators(physics, n_h=n_h, n_zf=n_zf, n_zs=n_zs)
            lift = LiftingSolvers(ops, delta=physics.delta)
            A, _ = assemble_amfs_dense(MfsOperator(lift), workers=2)
            bounds.append(compute_spectrum(A, mesh={"n_h": grid.n_h}).spectral_bound)
        self.assertTrue(all(bound < 0.0 for bound in bounds))
        self.assertLessEqual(abs(bounds[-1] - bounds[-2]) / abs(bounds[-1]), 0.2)


if __name__ == "__main__":
    unittest.main()
