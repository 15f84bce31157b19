"""Bayesian optimisation of classifier hyperparameters."""
from .bo import (BoResult, Dimension, Evaluation, HyperSpace, SpaceError, acquire_ucb,
                 ann_space, bo_run, cnn_space, maximize_ucb, space_from_dict, ucb)
from .gp import DegenerateDataError, GpModel, gp_fit, se_kernel
from .sobol import MAX_DIM, SobolDimensionError, sobol_points
