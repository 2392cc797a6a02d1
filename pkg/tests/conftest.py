import numpy as np
import pytest

from rotorvib.features import WindowFeatureExtractor
from rotorvib.ingest import assemble_corpus, read_manifest, stack_pairs
from rotorvib.pipeline import Dataset
from rotorvib.synth import generate_paper_shaped_corpus

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def build_corpus(out_dir, seed=0, **kwargs):
    """synth -> ingest -> features; returns ``(dataset, windows, manifest)``."""
    manifest = generate_paper_shaped_corpus(out_dir, seed=seed, **kwargs)
    windows, labels, ids = stack_pairs(assemble_corpus(read_manifest(manifest)))
    ext = WindowFeatureExtractor().fit(windows)
    return Dataset(ext.transform(windows), labels, ids, ext.schema_), windows, manifest


@pytest.fixture(scope="session")
def paper_corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("paper_corpus"), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
