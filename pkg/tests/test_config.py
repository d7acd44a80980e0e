"""
Unit tests for run configuration loading
"""

import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from pydantic import ValidationError

from src.config import (
    CONFIG_ENV_VAR, NOISE_PRESETS, NoiseConfig, PatchSpec, RunConfig, config_self_test, load_run_config,
)


class TestRunConfig(unittest.TestCase):
    """Defaults, config files and flag overrides"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.env_file = Path(self.tmp.name) / "pidforge.env"
        self.env_file.write_text(
            "PATCH_STRIDE=500\n"
            "GEN_DELTA=45.5\n"
            "FOLDS_SEEDS=4,5\n"
            "NOISE_TP_CONF=0.7,0.95\n"
            "DEDUP_LAYOUT_AWARE=false\n"
            "JOBS=3\n"
            "MYSTERY_KNOB=1\n",
            encoding="utf-8",
        )

    def tearDown(self):
        self.tmp.cleanup()

    def test_defaults_pass_self_test(self):
        self.assertEqual(config_self_test(), [])

    def test_self_test_reports_drift(self):
        config = RunConfig(patch=PatchSpec(patch_size=1000, stride=500))
        failures = config_self_test(config)
        self.assertEqual(len(failures), 2)

    def test_file_values_override_defaults(self):
        with self.assertLogs("src.config", level="WARNING"):
            config = load_run_config(str(self.env_file))
        self.assertEqual(config.patch.stride, 500)
        self.assertEqual(config.patch.patch_size, 1500)
        self.assertEqual(config.gen.delta, 45.5)
        self.assertEqual(config.folds.seeds, [4, 5])
        self.assertEqual(config.noise.tp_conf, (0.7, 0.95))
        self.assertFalse(config.dedup.layout_aware)
        self.assertEqual(config.jobs, 3)

    def test_flags_override_file(self):
        overrides = {"patch": {"stride": 300, "margin": None}, "jobs": 2}
        config = load_run_config(str(self.env_file), overrides)
        self.assertEqual(config.patch.stride, 300)
        self.assertEqual(config.patch.margin, 100.0)
        self.assertEqual(config.jobs, 2)

    def test_environment_names_the_config_file(self):
        with patch.dict(os.environ, {CONFIG_ENV_VAR: str(self.env_file)}):
            self.assertEqual(load_run_config().patch.stride, 500)

    def test_stride_beyond_patch_rejected(self):
        with self.assertRaises(ValidationError):
            load_run_config(overrides={"patch": {"stride": 2000}})

    def test_noise_presets_scale_every_knob(self):
        self.assertEqual(NOISE_PRESETS, {"low": 0.1, "med": 0.2, "high": 0.3})
        noise = NoiseConfig.from_level(NOISE_PRESETS["high"], rng_seed=5)
        self.assertAlmostEqual(noise.box_sigma, 6.0)
        self.assertAlmostEqual(noise.fp_rate, 3.0)
        self.assertEqual((noise.p_drop, noise.p_eflip, noise.rng_seed), (0.3, 0.3, 5))
        self.assertEqual(NoiseConfig.from_level(0.0), NoiseConfig())


if __name__ == "__main__":
    unittest.main()
