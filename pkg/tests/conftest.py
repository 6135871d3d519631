import pytest

from multihot.graph import generate_sbm
from multihot.sgns import SkipGramEmbedding


@pytest.fixture(scope="session")
def sbm_bundle():
    """A 4-block SBM with block labels and a quickly pretrained table."""
    graph, labels = generate_sbm([50] * 4, 0.3, 0.02, seed=11)
    table = SkipGramEmbedding(
        dim=32, epochs=2, walks_per_node=4, walk_length=20, seed=11
    ).fit_transform(graph)
    return graph, labels, table
