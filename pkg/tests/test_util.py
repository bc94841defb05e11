# -*- coding: utf-8 -*-
"""
Tests for pyroomnav
"""
import os
import unittest

from roomnav.util import ansi_code, format_seconds, get_option, str_to_bool


# ===============================================================================
# UtilTest
# ===============================================================================
class UtilTest(unittest.TestCase):
    ENV_NAME = "PYROOMNAV_UTIL_TEST_OPTION"

    def tearDown(self):
        os.environ.pop(self.ENV_NAME, None)

    def test_str_to_bool(self):
        for val in ("1", "true", "On", " YES ", 1, True):
            assert str_to_bool(val) is True, val
        for val in ("0", "false", "OFF", "no", 0, False):
            assert str_to_bool(val) is False, val
        for val in ("", "2", "maybe", None):
            with self.assertRaisesRegex(ValueError, "Invalid value"):
                str_to_bool(val)

    def test_get_option(self):
        assert get_option(self.ENV_NAME, "no_such_section", "opt") is None
        assert get_option(self.ENV_NAME, "no_such_section", "opt", "fallback") == "fallback"
        os.environ[self.ENV_NAME] = "from-env"
        assert get_option(self.ENV_NAME, "no_such_section", "opt", "fallback") == "from-env"

    def test_format_seconds(self):
        assert format_seconds(None) == "n.a."
        assert format_seconds(1.234) == "1.23 sec"

    def test_ansi_code(self):
        assert ansi_code("Fore.NO_SUCH_COLOR") == ""
        assert ansi_code("Style.RESET_ALL") in ("", "\x1b[0m")


# ===============================================================================
# Main
# ===============================================================================
if __name__ == "__main__":
    unittest.main()
