import json
import os
import tempfile
import unittest

from mfsi.config.run_config import Config, load_config
from mfsi.errors import ConfigValidationError


class TestRunConfig(unittest.TestCase):
    """実験設定の読み込み・上書き・検証を確認するテスト。"""

    def test_defaults_are_valid(self):
        """デフォルト設定が検証を通過し、既定値を保持することを検証する。"""
        cfg = Config().validate()
        self.assertEqual((cfg.geometry.n_h, cfg.geometry.n_zf, cfg.geometry.n_zs), (24, 24, 16))
        self.assertEqual(cfg.discretization.K, 4)
        self.assertEqual(cfg.discretization.samples, 20)
        self.assertEqual(cfg.forcing.recipe, "standing-wave")
        self.assertAlmostEqual(cfg.physics.omega0, 2.0 * 3.141592653589793)

    def test_zero_damping_is_rejected(self):
        """δ = 0 が減衰の必要性を示すメッセージで拒否されることを検証する。"""
        with self.assertRaises(ConfigValidationError) as ctx:
            Config().with_overrides(["physics.delta=0"]).validate()
        self.assertTrue(any("damping" in v for v in ctx.exception.violations))

    def test_three_dimensions_pass_validation(self):
        """dim=3 は設定としては有効で、dim=1 は拒否されることを検証する。"""
        self.assertEqual(Config().with_overrides(["geometry.dim=3"]).validate().geometry.dim, 3)
        with self.assertRaises(ConfigValidationError):
            Config().with_overrides(["geometry.dim=1"]).validate()

    def test_all_violations_reported_at_once(self):
        """複数の違反がまとめて報告されることを検証する。"""
        overrides = ["physics.mu_s=-1", "physics.T=0", "discretization.K=0", "geometry.dim=1"]
        with self.assertRaises(ConfigValidationError) as ctx:
            Config().with_overrides(overrides).validate()
        joined = " ".join(ctx.exception.violations)
        for needle in ("mu_s", "physics.T", "discretization.K", "dim=1"):
            self.assertIn(needle, joined)
        self.assertEqual(ctx.exception.reason, "config-invalid")

    def test_cutoff_must_fit_domain(self):
        """α ≥ min(H_f, H_s) が拒否されることを検証する。"""
        with self.assertRaises(ConfigValidationError) as ctx:
            Config().with_overrides(["geometry.alpha=0.5"]).validate()
        self.assertTrue(any("cutoff exceeds domain" in v for v in ctx.exception.violations))

    def test_oversampling_threshold(self):
        """M < 2(2K+1) が拒否されることを検証する。"""
        with self.assertRaises(ConfigValidationError):
            Config().with_overrides(["discretization.K=2", "discretization.M=9"]).validate()
        cfg = Config().with_overrides(["discretization.K=2", "discretization.M=10"]).validate()
        self.assertEqual(cfg.discretization.samples, 10)

    def test_override_parses_literals(self):
        """上書き値は JSON リテラルとして、失敗時は文字列として解釈されることを検証する。"""
        cfg = Config().with_overrides(["geometry.n_h=16", "forcing.recipe=sloshing", "forcing.components=[\"f\"]"])
        self.assertEqual(cfg.geometry.n_h, 16)
        self.assertEqual(cfg.forcing.recipe, "sloshing")
        self.assertEqual(cfg.forcing.components, ("f",))

    def test_unknown_keys_are_errors(self):
        """未知のキーが検証エラーになることを検証する。"""
        with self.assertRaises(ConfigValidationError):
            Config.from_dict({"geometry": {"n_x": 4}})
        with self.assertRaises(ConfigValidationError):
            Config().with_overrides(["nosuch.key=1"])
        with self.assertRaises(ConfigValidationError):
            Config().with_overrides(["geometry.n_h"])

    def test_load_config_from_file(self):
        """JSON ファイルと上書きを組み合わせて読み込めることを検証する。"""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump({"geometry": {"n_h": 8, "n_zf": 8, "n_zs": 6}, "mode": "spectrum"}, handle)
            cfg = load_config(path, ["physics.delta=0.25"])
        self.assertEqual(cfg.geometry.n_h, 8)
        self.assertEqual(cfg.mode, "spectrum")
        self.assertEqual(cfg.physics.delta, 0.25)

    def test_load_config_unreadable(self):
        """読めないファイルは設定エラーになることを検証する。"""
        with self.assertRaises(ConfigValidationError):
            load_config("/nonexistent/run.json")

    def test_round_trip_through_dict(self):
        """to_dict と from_dict で同じ設定が得られることを検証する。"""
        cfg = Config().with_overrides(["forcing.amplitude=0.002"])
        self.assertEqual(Config.from_dict(cfg.to_dict()), cfg)


if __name__ == "__main__":
    unittest.main()
