import os
from pathlib import Path

import pytest

import shotsearch

DATA = Path(os.environ.get("SHOTSEARCH_TEST_DATA", Path(__file__).resolve().parents[2] / "tests" / "data"))


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("archive") / "bundle"
    shotsearch.ingest(
        DATA / "manifest.tsv",
        out,
        semantic_features=DATA / "features_semantic.tsv",
        semantic_seed=42,
        low_level_features=DATA / "features_low_level.tsv",
        low_level_seed=43,
        dimension=8,
        annotations=DATA / "annotations.tsv",
        text=DATA / "text.tsv",
    )
    shotsearch.build(out, seed=3)
    return out


@pytest.fixture(scope="session")
def archive(bundle_dir):
    return shotsearch.Archive(bundle_dir)
