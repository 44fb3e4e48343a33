import numpy as np
import pytest

from aupriors import generate_ner, get_model
from aupriors.models.ner import NerModel
from aupriors.tensors import TensorTolerance


@pytest.fixture(scope="session")
def tol():
    return TensorTolerance()


@pytest.fixture(scope="session")
def bundles():
    """Catalog bundles with deterministic default designs."""
    return {
        "binomial": get_model("binomial").bundle(),
        "normal-meanvar": get_model("normal-meanvar").bundle(),
        "normal-locscale": get_model("normal-locscale").bundle(),
        "gamma": get_model("gamma").bundle(),
        "linreg-var": get_model("linreg-var", n=20).bundle(),
        "linreg-sd": get_model("linreg-sd", n=20).bundle(),
        "ner-balanced": get_model("ner-balanced", m=10, n=5).bundle(),
        "ner": get_model("ner", m=7, n=4).bundle(),
    }


def interior_points(model_id: str, count: int, seed: int = 5150):
    """Deterministic interior points, comfortably away from boundaries so
    finite-difference oracles stay accurate."""
    rng = np.random.Generator(np.random.Philox(seed))
    pts = []
    for _ in range(count):
        if model_id == "binomial":
            pts.append(np.array([rng.uniform(0.15, 0.85)]))
        elif model_id in ("normal-meanvar", "normal-locscale"):
            pts.append(np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.5, 3.0)]))
        elif model_id == "gamma":
            pts.append(np.array([rng.uniform(0.6, 4.0), rng.uniform(0.5, 3.0)]))
        elif model_id in ("linreg-var", "linreg-sd"):
            pts.append(np.concatenate([rng.uniform(-2.0, 2.0, 2),
                                       [rng.uniform(0.5, 3.0)]]))
        elif model_id in ("ner", "ner-balanced"):
            pts.append(np.concatenate([rng.uniform(-2.0, 2.0, 2),
                                       rng.uniform(0.5, 3.0, 2)]))
        else:
            raise KeyError(model_id)
    return pts


TINY_SEED = 20240817


@pytest.fixture(scope="session")
def tiny_instance():
    """Fixed m=3, n=2, p=1 grouped dataset for sampler-vs-quadrature checks."""
    rng = np.random.Generator(np.random.Philox(TINY_SEED))
    model = NerModel.from_unit_counts([2, 2, 2], p=1, rng=rng)
    data = generate_ner(model, [1.0, 1.0, 1.0], rng)
    return model, data


@pytest.fixture(scope="session")
def small_balanced_data():
    """A modest balanced dataset shared by sampler unit tests."""
    model = NerModel.balanced_design(8, 5, p=2, seed=3)
    rng = np.random.Generator(np.random.Philox(99))
    return generate_ner(model, [1.0, 1.0, 1.0, 1.0], rng)
