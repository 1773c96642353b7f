"""EPRB count modeling: simulation, coincidence matching, filter models, tomography."""

from .counts import (CountTable, FilterParams, Prediction, fair_sampling_ratios,
                     predict, predict_model1, predict_model2, predict_model3,
                     predict_model4, read_count_tables, unpaired_singles,
                     write_count_tables)
from .errors import (ConfigError, DataInconsistencyError, DegenerateInputError,
                     EprbError, InvalidInputError)
from .eventsim import (CoincidenceSet, EventLog, GroundTruth, SimConfig,
                       bin_histogram, coincidence_bin_matrix, drift_offset_scan,
                       joint_detection_ratio, match_coincidences,
                       reconcile_zero_times, simulate_experiment,
                       tabulate_counts)
from .fitting import (FitProblem, FitResult, OptimizerConfig, evaluate_model4,
                      fit, objective, pack_parameters)
from .quantum import (ExperimentGeometry, QuantumProbs, decode_density,
                      encode_density, geometry_for_experiment,
                      measurement_operators, quantum_probs, singlet_state,
                      trace_distance)
from .scan import ScanExperiment, scan_series
from .stats import (CompoundCountSpec, FitStatistics, chi_square_X,
                    chi_square_Xrev, compound_variance,
                    compound_variance_mc_oracle, degrees_of_freedom, z_score)

__version__ = "0.1.0"
