import numpy as np
import pytest

from acltree import Alphabet, FeatureSet, Sequence, SuffixIndex

PAPER_Y = "ABACDCBEDEDE"
PAPER_X = "AABDADAD"
PAPER_FEATURES = ("A", "BA", "C", "CD")


@pytest.fixture(scope="session")
def alphabet():
    return Alphabet("ABCDE")


@pytest.fixture(scope="session")
def seq_y(alphabet):
    return Sequence.from_text(PAPER_Y, alphabet, name="Y")


@pytest.fixture(scope="session")
def seq_x(alphabet):
    return Sequence.from_text(PAPER_X, alphabet, name="X")


@pytest.fixture(scope="session")
def feature_set(alphabet):
    return FeatureSet(PAPER_FEATURES, alphabet)


@pytest.fixture(scope="session")
def index_y(seq_y):
    return SuffixIndex.build(seq_y, l_max=3)


@pytest.fixture(scope="session")
def index_y8(seq_y):
    return SuffixIndex.build(seq_y, l_max=8)


def random_sequence(rng: np.random.Generator, n: int, a: int,
                    name: str | None = None) -> Sequence:
    alphabet = Alphabet("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"[:a])
    return Sequence(rng.integers(0, a, n, dtype=np.uint8), alphabet, name)
