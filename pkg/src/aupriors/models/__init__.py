"""Concrete model catalog: derivative bundles, closed-form priors and
posterior means, data generators, and grouped-data structures."""

from __future__ import annotations

from ..errors import UnknownModel
from .binomial import BinomialModel
from .gamma import GammaModel
from .linreg import LinRegModel, default_design
from .normal import NormalLocScaleModel, NormalMeanVarModel
from .ner import (NerDataset, NerModel, ProprietyReport,
                  check_propriety_conditions, generate_ner, ner_g)

MODEL_IDS = ("binomial", "normal-meanvar", "normal-locscale", "gamma",
             "linreg-var", "linreg-sd", "ner", "ner-balanced")


def get_model(model_id: str, *, n: int | None = None, m: int | None = None,
              design_seed: int = 0, n_units=None):
    """Instantiate a catalog model by id with a deterministic default design.

    ``n`` is the row count for regression designs and units-per-area for the
    grouped models; ``m`` the area count; ``n_units`` an explicit per-area
    unit list for the unbalanced grouped model.
    """
    if model_id == "binomial":
        return BinomialModel()
    if model_id == "normal-meanvar":
        return NormalMeanVarModel()
    if model_id == "normal-locscale":
        return NormalLocScaleModel()
    if model_id == "gamma":
        return GammaModel()
    if model_id == "linreg-var":
        return LinRegModel(default_design(n or 20, seed=design_seed), "variance")
    if model_id == "linreg-sd":
        return LinRegModel(default_design(n or 20, seed=design_seed), "stddev")
    if model_id == "ner-balanced":
        return NerModel.balanced_design(m or 10, n or 5, seed=design_seed)
    if model_id == "ner":
        if n_units is None:
            base = n or 5
            n_units = [base + (i % 3) for i in range(m or 10)]
        return NerModel.from_unit_counts(n_units, seed=design_seed)
    raise UnknownModel(model_id)


def catalog_prior(model, theta) -> float:
    """Closed-form unnormalized log prior of a catalog model instance or id."""
    if isinstance(model, str):
        model = get_model(model)
    fn = getattr(model, "catalog_log_prior", None)
    if fn is None:
        raise UnknownModel(
            f"no closed-form prior in the catalog for '{type(model).__name__}'"
        )
    return float(fn(theta))


def closed_posterior_mean(model, data):
    """Exact posterior mean under the catalog prior, dispatched on the model."""
    if isinstance(model, str):
        model = get_model(model)
    fn = getattr(model, "posterior_mean", None)
    if fn is None:
        raise UnknownModel(
            f"no closed-form posterior mean for '{type(model).__name__}'"
        )
    return fn(data)


__all__ = [
    "BinomialModel", "GammaModel", "LinRegModel", "NormalLocScaleModel",
    "NormalMeanVarModel", "NerDataset", "NerModel", "ProprietyReport",
    "MODEL_IDS", "catalog_prior", "check_propriety_conditions",
    "closed_posterior_mean", "default_design", "generate_ner", "get_model",
    "ner_g",
]
