"""Memory-sublinear feature selection with count-sketched optimizers.

Weights live in a count sketch instead of a dense array, a capacity-k heap
tracks the heavy hitters, and updates are either raw stochastic gradients
(first-order) or limited-memory BFGS directions built from sketch
read-backs (second-order). Dense SGD/oLBFGS references and a
feature-hashing baseline share the same gradient code paths.
"""

from ._kernels import BACKEND
from .lbfgs import CurvatureHistory, CurvaturePair, direction
from .loss import Minibatch, grad_logistic, grad_mse, grad_softmax
from .optim import (StepSchedule, StopRule, TrainerConfig, active_set,
                    fh_predict, fh_train, load_checkpoint, make_trainer,
                    predict, run_training, save_checkpoint, select_features)
from .sketch import CountSketchTable
from .svec import SparseVec, axpy, dot, restrict
from .topk import TopKHeap

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CountSketchTable", "CurvatureHistory", "CurvaturePair",
    "Minibatch", "SparseVec", "StepSchedule", "StopRule", "TopKHeap",
    "TrainerConfig", "active_set", "axpy", "direction", "dot", "fh_predict",
    "fh_train", "grad_logistic", "grad_mse", "grad_softmax",
    "load_checkpoint", "make_trainer", "predict", "restrict",
    "run_training", "save_checkpoint", "select_features",
]
