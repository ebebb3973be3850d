"""Monte Carlo and exact-arithmetic experiments on the smallest singular
value of randomly perturbed matrices: tail curves, arithmetic structure of
near-kernel vectors, sparse-noise counterexample ensembles, and the lattice
geometry behind level-set nets."""

from svsmooth.arithmetic import (CompressibilityParams, LCDParams, LCDResult,
                                 VectorClass, classify_vector, lcd,
                                 levy_concentration_empirical,
                                 levy_concentration_exact,
                                 level_set_membership,
                                 restricted_level_set_membership,
                                 sparsity_distance)
from svsmooth.counterexample import (CounterexampleConfig,
                                     CounterexampleOutcome, ReductionWitness,
                                     build_shift_example11, build_shift_thm13,
                                     counterexample_tail_experiment,
                                     counterexample_tail_sweep,
                                     direct_quadratic_form,
                                     event_E_frequency,
                                     exact_event_probability, hs_tail_bound,
                                     hs_tail_norm, neumann_quadratic_form,
                                     pick_gate_constant, predicted_floor,
                                     reduction_witness_check, split_blocks)
from svsmooth.ensembles import (EnsembleSpec, ScalarDistribution, ShiftMatrix,
                                derive_substream, parse_distribution,
                                sample_matrix, sample_vector,
                                substream_generator, trial_generator)
from svsmooth.errors import BudgetExceededError, DivergenceError
from svsmooth.lattice_geometry import (Ellipsoid, NetResult, Parallelepiped,
                                       SandwichReport, build_sd_net,
                                       count_lattice_points, cover_audit,
                                       cover_ellipsoid, lattice_direction_net,
                                       net_size_bound, sandwich_check)
from svsmooth.spectra import (DegenerateGapWarning, ProjectionOperator,
                              SingularSpectrum, bottom_singular_projection,
                              interlacing_check, is_numerically_singular,
                              k_rank, operator_norm, row_minor,
                              singular_values, smallest_singular_value)
from svsmooth.tail_lab import (AnticoncentrationResult, DistanceCheckResult,
                               Frequency, NoFittableRowsError, PowerLawFit,
                               TailCurve, TailRow, anticoncentration_vs_lcd,
                               clopper_pearson, estimate_tail_probability,
                               fit_power_law, image_norm_samples,
                               invertibility_distance_check, opnorm_quantile,
                               single_vector_image_experiment,
                               smallest_sv_samples, sweep_tail_curve)

__version__ = "0.1.0"
