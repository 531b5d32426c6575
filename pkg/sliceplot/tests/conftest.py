"""Shared fixtures: one real simulator run whose traces feed every test.

The run goes through the simulator's own command line so these tests see
exactly the files a user would point sliceplot at.
"""

import subprocess
import sys

import pytest

GOLDEN_SEED = 3
GOLDEN_TTIS = 2600


@pytest.fixture(scope="session")
def golden_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("golden_run")
    cmd = [sys.executable, "-m", "slicesteer.cli", "run",
           "--config", "default", "--seed", str(GOLDEN_SEED),
           "--ttis", str(GOLDEN_TTIS), "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def intra_trace(golden_dir):
    return golden_dir / "intra_windows.csv"


@pytest.fixture(scope="session")
def inter_trace(golden_dir):
    return golden_dir / "inter_windows.csv"


@pytest.fixture(scope="session")
def tti_trace(golden_dir):
    return golden_dir / "tti_trace.csv"
