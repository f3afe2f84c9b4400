"""Learned neural-network basis functions over Hilbert spaces, with
inner-product and least-squares coefficient solvers, transfer-type
geometry, deterministic benchmark task generators, and a CLI."""

from .hilbert import (EUCLIDEAN, FunctionDataset, HilbertSpace,
                      label_to_logits, logit_inner_product, logit_space,
                      logit_to_probability, mc_inner_product, norm,
                      probability_to_logit, simplex_add, simplex_scale)
from .encoder import (EncoderConfig, FunctionEncoderModel, basis_gram,
                      coefficients_ip, coefficients_ls, load_model, new_model,
                      predict, residual_coefficients, save_model,
                      solve_coefficients, train, training_step)
from .geometry import (HullReport, SpanReport, TransferReport,
                       classify_transfer, hull_projection, span_projection)
from .tasks import (ClassificationTaskSpec, PolynomialTaskSpec, TaskSample,
                    sample_classification_task, sample_linear_combination_task,
                    sample_type1_polynomial, sample_type2_polynomial,
                    sample_type3_cubic)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
