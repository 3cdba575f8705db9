"""Shared fixture handling: gzipped artifacts are decompressed once per
session into a temporary directory and served from there."""

import gzip
import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """Directory containing every fixture, with .gz entries decompressed."""
    out = tmp_path_factory.mktemp("artifacts")
    for path in FIXTURES.iterdir():
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as src, (out / path.stem).open("wb") as dst:
                shutil.copyfileobj(src, dst)
        else:
            shutil.copy(path, out / path.name)
    return out
