"""Run the acceptance suite and print one PASS/FAIL line per criterion."""

import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parents[1] / "tests"

if __name__ == "__main__":
    sys.exit(pytest.main([str(TESTS / "test_acceptance.py"), "-q", "-s", *sys.argv[1:]]))
