import os
import shutil
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from bridge_helpers import run_cli


@pytest.fixture(scope="session")
def cliplab_bin():
    """The primary package's CLI; the bridge talks to it only through files."""
    exe = shutil.which("cliplab")
    assert exe, "cliplab console script not installed"
    return exe


@pytest.fixture(scope="session")
def small_dataset(cliplab_bin, tmp_path_factory):
    """4 classes on a coarse 30-degree y-grid, 64px wireframes."""
    root = tmp_path_factory.mktemp("small")
    geo = str(root / "geo")
    ds = str(root / "ds")
    run_cli(cliplab_bin, "gen", "--seed", "0", "--classes", "4", "--out", geo)
    run_cli(cliplab_bin, "render", "--geometry", geo, "--axes", "y",
            "--stride", "30", "--repr", "wireframe", "--image-size", "64",
            "--train-views", "y:0,90,180,270", "--out", ds)
    return ds
