"""Shared fixtures: published scanblue fit values and synthetic data builders."""
import numpy as np
import pytest

from eprb import (CountTable, FilterParams, predict_model2, quantum_probs,
                  scan_series, singlet_state)

# Best-fit density matrix for the simplest filter model on the scanblue data.
REFERENCE_RHO_MODEL1 = np.array([
    [0.0153, -0.0418 + 0.0003j, 0.0317 - 0.0j, -0.0026 - 0.0j],
    [-0.0418 - 0.0003j, 0.4798, -0.4341 + 0.0j, -0.0388 - 0.0j],
    [0.0317 + 0.0j, -0.4341 - 0.0j, 0.4867, 0.0395 - 0.0003j],
    [-0.0026 + 0.0j, -0.0388 + 0.0j, 0.0395 + 0.0003j, 0.0176],
])

REFERENCE_RHO_MODEL3 = np.array([
    [0.0117, -0.0384 - 0.0074j, 0.0324 - 0.0055j, 0.0032 - 0.0010j],
    [-0.0384 + 0.0074j, 0.4851, -0.4525 + 0.0823j, -0.0399 + 0.0176j],
    [0.0324 + 0.0055j, -0.4525 - 0.0823j, 0.4926, 0.0486 - 0.0121j],
    [0.0032 + 0.0010j, -0.0399 - 0.0176j, 0.0486 + 0.0121j, 0.0106],
])

# Model 1 scanblue fit: pairs per quadrant and per-setting probabilities.
MODEL1_N = 963_382.0
MODEL1_PA = np.array([0.05110, 0.05393])
MODEL1_PB = np.array([0.03657, 0.03566])

# Model 2 scanblue fit.
MODEL2_N = 964_212.0
MODEL2_PA = np.array([[0.04855, 0.05344], [0.05126, 0.05638]])
MODEL2_PB = np.array([[0.03627, 0.03681], [0.03655, 0.03473]])

# Model 3 scanblue fit: products N*pa_ij, N*pb_kl, N*pc_ijkl.
MODEL3_NPA = np.array([[46_812.68, 51_521.92], [49_416.17, 54_362.87]])
MODEL3_NPB = np.array([[35_078.74, 35_369.69], [35_272.19, 33_454.38]])
MODEL3_NPC = np.array([
    [[[1448.14, 1701.85], [1540.10, 1759.54]],
     [[1730.72, 2005.93], [1867.75, 2071.06]]],
    [[[1621.77, 1840.52], [1704.22, 1960.79]],
     [[1622.16, 1858.88], [1721.61, 1957.92]]],
])

# Published scanblue statistics: (X, DF, Z) per model.
REFERENCE_STATS = {1: (22_054.07, 964, 480.31), 2: (3035.37, 960, 47.36),
                   3: (1689.95, 945, 17.14)}


@pytest.fixture(scope="session")
def series():
    return scan_series()


@pytest.fixture(scope="session")
def geometries(series):
    return [e.geometry() for e in series]


@pytest.fixture(scope="session")
def model2_truth():
    rho = 0.95 * singlet_state() + 0.05 * np.eye(4) / 4.0
    params = FilterParams(model_id=2, n_pairs=MODEL2_N, pa=MODEL2_PA, pb=MODEL2_PB)
    return rho, params


def poisson_counts_from(predictions, rng):
    """Observed tables with independent Poisson noise per chi-square channel."""
    out = []
    for pred in predictions:
        c = rng.poisson(np.maximum(pred.c, 0.0)).astype(float)
        ua = rng.poisson(np.maximum(pred.ua, 0.0)).astype(float)
        ub = rng.poisson(np.maximum(pred.ub, 0.0)).astype(float)
        out.append(CountTable(a=ua + c.sum(axis=(2, 3)),
                              b=ub + c.sum(axis=(0, 1)), c=c))
    return out


@pytest.fixture(scope="session")
def model2_predictions(geometries, model2_truth):
    rho, params = model2_truth
    return [predict_model2(params, quantum_probs(rho, g)) for g in geometries]
