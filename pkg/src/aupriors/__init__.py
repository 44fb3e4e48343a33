"""Bias-cancelling objective priors: fields, existence, construction, and
frequentist validation on grouped-data models."""

from .engine import (IntegrabilityReport, LogPrior, PhiField,
                     construct_log_prior, diagonal_integrability_check,
                     firth_decomposition_check, integrability_check,
                     make_phi_field, phi_general, phi_hi, phi_iid)
from .errors import (AupriorsError, DegenerateSample, DomainViolation,
                     HNotEqualI, MassUnderflow, NonFiniteDraw, NonIntegrable,
                     NotDiagonal, ProprietyViolation, QuadratureFailure,
                     RunAborted, SingularCurvature, UnknownModel)
from .gibbs import (Chain, ChainSummary, GibbsConfig, effective_sample_size,
                    gibbs_ner, sample_inverse_gamma, sample_truncated_gamma01,
                    summarize)
from .harness import (ExperimentConfig, MetricsRecord, emit_csv, parse_csv,
                      reproduce_figure, run_experiment)
from .models import (BinomialModel, GammaModel, LinRegModel, NerDataset,
                     NerModel, NormalLocScaleModel, NormalMeanVarModel,
                     ProprietyReport, catalog_prior,
                     check_propriety_conditions, closed_posterior_mean,
                     generate_ner, get_model, ner_g)
from .tensors import (DerivativeBundle, RectDomain, TensorTolerance,
                      check_spd, fd_gradient, fd_jacobian,
                      verify_information_identity)

__version__ = "0.1.0"
