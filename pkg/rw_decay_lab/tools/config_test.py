"""Tests for experiment configuration parsing"""

import os
import shutil
import tempfile
import unittest

from rw_decay_lab.tools.config import ConfigError, ExperimentConfig, config_schema, load_config, parse_config

VERIFY = """
kind = "verify"

[geometry]
mass = 1.0
sigma = 1

[mode]
ell = 0

[grid]

[evolution]

[fit]
"""


class TestParseConfig(unittest.TestCase):

    def test_defaults(self):
        config = parse_config(VERIFY)
        self.assertEqual(config.kind, "verify")
        self.assertEqual(config.mode.values, [0])
        self.assertEqual((config.grid.x_min, config.grid.x_max, config.grid.points), (-400.0, 400.0, 8000))
        self.assertEqual((config.fit.t_lo, config.fit.t_hi, config.fit.x_obs), (100.0, 300.0, 10.0))
        self.assertEqual(config.evolution.weight_sup, -4.0)
        self.assertEqual(config.evolution.weight_l2, -4.6)
        self.assertEqual(config.tolerances.tail_exponent, 0.3)
        self.assertEqual(config.run_id, "verify")

    def test_bad_sigma_names_field(self):
        with self.assertRaises(ConfigError) as context:
            parse_config(VERIFY.replace("sigma = 1", "sigma = 2"))
        self.assertIn("geometry.sigma", str(context.exception))

    def test_missing_blocks(self):
        with self.assertRaises(ConfigError) as context:
            parse_config('kind = "mourre"\n[geometry]\n')
        self.assertIn("mode", str(context.exception))
        self.assertIn("mourre", str(context.exception))

    def test_range_checks(self):
        for bad in ('[band]\nepsilon = 0.7', '[fit]\nt_lo = 300.0\nt_hi = 100.0', '[grid]\npoints = 4'):
            with self.subTest(bad=bad):
                with self.assertRaises(ConfigError):
                    parse_config('kind = "spectrum"\n[geometry]\n[mode]\nell = 2\n' + bad)
        with self.assertRaises(ConfigError):
            parse_config({"kind": "spectrum", "geometry": {}, "mode": {}, "band": {}})

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ConfigError) as context:
            parse_config(VERIFY + "\n[output]\nfolder = 'x'\n")
        self.assertIn("output.folder", str(context.exception))

    def test_malformed_toml(self):
        with self.assertRaises(ConfigError) as context:
            parse_config("kind = ")
        self.assertIn("Failed to parse config", str(context.exception))

    def test_schema(self):
        schema = config_schema()
        self.assertIn("kind", schema["properties"])
        self.assertEqual(schema, ExperimentConfig.model_json_schema())


class TestLoadConfig(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_load(self):
        path = os.path.join(self.temp_dir, "verify.toml")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(VERIFY)
        self.assertEqual(load_config(path).kind, "verify")

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as context:
            load_config(os.path.join(self.temp_dir, "absent.toml"))
        self.assertIn("Failed to read config", str(context.exception))


if __name__ == '__main__':
    unittest.main(verbosity=2)
