import threading

import numpy as np
import pytest

from rasterqa.calib import AnnotationStore
from rasterqa.fixtures import build_fixture_corpus, build_showcase_store, showcase_record
from rasterqa.service import make_server
from rasterqa.store import BackendStore


def random_mask(rng: np.random.RandomState, h: int, w: int, density: float) -> np.ndarray:
    return rng.rand(h, w) < density


@pytest.fixture(scope="session")
def corpus_store(tmp_path_factory) -> BackendStore:
    """The synthetic 56-image corpus, built once per session."""
    root = tmp_path_factory.mktemp("corpus")
    build_fixture_corpus(root, n_images=56, seed=20240811)
    return BackendStore(root)


@pytest.fixture(scope="session")
def showcase_store(tmp_path_factory) -> BackendStore:
    root = tmp_path_factory.mktemp("showcase")
    build_showcase_store(root)
    return BackendStore(root)


@pytest.fixture(scope="session")
def showcase_question():
    return showcase_record()


@pytest.fixture()
def annotation_store(tmp_path) -> AnnotationStore:
    return AnnotationStore(tmp_path / "annotations.jsonl")


@pytest.fixture()
def running_service(showcase_store, showcase_question, tmp_path):
    """The HTTP service on an ephemeral port, torn down after the test."""
    store = AnnotationStore(tmp_path / "annotations.jsonl")
    server = make_server(showcase_store, store, [showcase_question])
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    try:
        yield f"http://{host}:{port}"
    finally:
        server.shutdown()
        server.server_close()
        thread.join(timeout=5)
