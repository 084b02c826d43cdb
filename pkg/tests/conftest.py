from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"

LN99 = float(np.log(99.0))

# rock-paper-scissors with 0.99 / 0.01 win rates, in logits
RPS = 4.6 * np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])

# RPS with the third player cloned
RPS_DUP = 4.6 * np.array(
    [
        [0.0, 1.0, -1.0, -1.0],
        [-1.0, 0.0, 1.0, 1.0],
        [1.0, -1.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 0.0],
    ]
)

CYCLE = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
TRANS = np.array([[0.0, 1.0, 2.0], [-1.0, 0.0, 1.0], [-2.0, -1.0, 0.0]])

ELO_3X3 = np.array([[0.5, 0.9, 0.1], [0.1, 0.5, 0.9], [0.9, 0.1, 0.5]])
ELO_4X4 = np.array(
    [
        [0.5, 0.9, 0.1, 0.1],
        [0.1, 0.5, 0.9, 0.9],
        [0.9, 0.1, 0.5, 0.5],
        [0.9, 0.1, 0.5, 0.5],
    ]
)

GO = np.array([[0.5, 0.7, 0.4], [0.3, 0.5, 1.0], [0.6, 0.0, 0.5]])

SUITE = np.array([[89.0, 93.0, 76.0], [85.0, 85.0, 85.0], [79.0, 74.0, 99.0]])
SUITE_DUP = np.array([[89.0, 93.0, 76.0, 77.0], [85.0, 85.0, 85.0, 84.0], [79.0, 74.0, 99.0, 98.0]])


def random_antisym(rng, n, low=-5.0, high=5.0):
    x = rng.uniform(low, high, size=(n, n))
    return np.triu(x, 1) - np.triu(x, 1).T


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
