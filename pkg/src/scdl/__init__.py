"""Sparse and spectral-contextual dictionary learning for hyperspectral images.

The main entry points are re-exported here; see the submodules for the rest.
"""
from .context import (GroupPartition, Moments, all_centers, partition_into_patches,
                      singleton_partition, window_moments)
from .data import (CodeMatrix, HsiCube, LabelMap, load_codes, load_cube, load_dictionary,
                   load_labels, save_codes, save_cube, save_dictionary, save_labels,
                   split_labels)
from .errors import ConfigError, DataError, NumericalError, ScdlError
from .learning import (LearnConfig, LearnReport, Mode, RegSchedule, compute_gamma,
                       encode, init_dictionary, learn, update_dictionary)
from .msi import BandBinner, Coverage, apply_binner, code_msi, make_binner
from .solvers import (BCD, MFOCUSS, SolverConfig, code_groups, code_samples, lasso_cd,
                      mfocuss, mmv_bcd)
from .svm import (EvalReport, OvoSvmModel, cross_validate, evaluate, predict,
                  predict_batch, train_binary, train_ovo)

__version__ = "0.1.0"
