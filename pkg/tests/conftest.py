import numpy as np
import pytest

from gptcca.tensor import CPDecomposition, DenseTensor

# Example tensor with a known generating polynomial; slices F[:, :, i3]
# are listed with rows indexed by i1 and columns by i2.
EXAMPLE_SLICES = [
    [[-10, 48, 70], [-10, -64, -50], [-5, 10, 20]],
    [[22, -16, -58], [-42, 0, 78], [3, -6, -12]],
    [[-1, 44, 49], [-29, -68, -19], [-4, 8, 16]],
]


@pytest.fixture
def example_tensor():
    return DenseTensor(np.stack(EXAMPLE_SLICES, axis=2).astype(float))


def random_cp(shape, rank, seed, weights=None):
    rng = np.random.default_rng(seed)
    return CPDecomposition([rng.standard_normal((n, rank)) for n in shape], weights)


def brute_force_cp(cp):
    """Entry-by-entry evaluation of sum_s w_s prod_j U_j[i_j, s]."""
    out = np.zeros(cp.shape)
    for idx in np.ndindex(*cp.shape):
        total = 0.0
        for s in range(cp.rank):
            term = cp.weights[s]
            for j, i in enumerate(idx):
                term *= cp.factors[j][i, s]
            total += term
        out[idx] = total
    return out
