"""Numerical workbench for quasi-analytic weights on R^n."""

from .approx import best_poly_approx, best_trig_approx, density_experiment, plateau_flag
from .classifier import (CONVERGES, DIVERGES, INCONCLUSIVE, NOT_QA, QA, UNDETERMINED,
                         ContradictionError, EvidenceRecord, Verdict, classify, decay_class,
                         hall_test, line_restriction_test, log_integral_test, series_test)
from .determinacy import (MeasureSpec, carleman_test, integral_criterion, moments_of_measure,
                          parse_measure)
from .moments import (MomentSequence, is_log_convex, log_convex_envelope, log_moments, moment,
                      moment_sequence, mu_sequence)
from .ostrowski import (convex_regularization, smooth_majorant_rho, support_interval,
                        weight_from_sequence)
from .pathology import (SequenceProfile, generate_blocks, sum_counterexample,
                        tangentialize_sequences, unique_basis_weight)
from .spec_io import dumps, load_json, parse_basis, parse_spec, serialize
from .weights import (AffineMap, AffinePullback, BasisSpec, ExpDecay, Gaussian, Indicator,
                      PointwiseMin, Radial, RepLog, RhoForm, Sampled, Scale, Sum, Table, Tensor,
                      evaluate, power, pullback, radial)

__version__ = "0.1.0"
