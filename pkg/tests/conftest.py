import numpy as np
import pytest

from fusenet.embeddings import EmbeddingTable


@pytest.fixture
def tiny_table():
    """Three words, d=3, rows equal to distinct unit-ish vectors."""
    matrix = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.5, 0.5, 0.0],
    ])
    return EmbeddingTable(vocab={"apple": 0, "banana": 1, "pear": 2}, matrix=matrix, dim=3)
