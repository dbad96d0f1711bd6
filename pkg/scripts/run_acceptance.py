#!/usr/bin/env python3
"""Run the acceptance suite with per-criterion pass/fail lines."""

import subprocess
import sys
from pathlib import Path

root = Path(__file__).resolve().parent.parent
raise SystemExit(
    subprocess.call(
        [sys.executable, "-m", "pytest", str(root / "tests" / "test_acceptance.py"), "-v", "-s"],
        cwd=root,
    )
)
