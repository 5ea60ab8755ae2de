"""Tests for the MCP server wiring"""

import asyncio
import unittest

from rw_decay_lab.server.app import create_mcp_server


class TestServer(unittest.TestCase):

    def setUp(self):
        self.server = create_mcp_server()
        self.tools = {tool.name: tool for tool in asyncio.run(self.server.list_tools())}

    def test_registered_tools(self):
        self.assertEqual(set(self.tools),
                         {"tortoise", "radius_of_tortoise", "normalize_mode", "config_schema", "run_experiment"})

    def test_parameters(self):
        self.assertIn("config_toml", self.tools["run_experiment"].inputSchema["properties"])
        self.assertEqual(self.tools["run_experiment"].inputSchema.get("required"), ["config_toml"])
        self.assertEqual(set(self.tools["normalize_mode"].inputSchema["properties"]), {"ell", "sigma", "mass"})


if __name__ == '__main__':
    unittest.main(verbosity=2)
