import numpy as np
import pytest

from krein_invariant.krein import BlockOperator


@pytest.fixture
def anchor():
    """A = [[2i, 0], [1, -i]]: eigenvalues 2i and -i, invariant graph K = -i/3."""
    return BlockOperator.from_blocks([[2j]], [[0]], [[1]], [[-1j]])


@pytest.fixture
def coupled():
    """A = [[0, 1], [1, -i]] used for the scalar transfer-function checks."""
    return BlockOperator.from_blocks([[0]], [[1]], [[1]], [[-1j]])


def decoupled(A11, A22) -> BlockOperator:
    A11 = np.atleast_2d(A11)
    A22 = np.atleast_2d(A22)
    return BlockOperator.from_blocks(
        A11, np.zeros((A11.shape[0], A22.shape[0])), np.zeros((A22.shape[0], A11.shape[0])), A22
    )
