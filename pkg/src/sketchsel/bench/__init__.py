from .experiments import (DataError, ExperimentConfig, GramTrial,
                          TrialResult, run_classify_vs_cf, run_experiment,
                          run_gram_check, run_phase_transition,
                          run_stepsize_sweep, run_topk_sweep, sketch_matrix,
                          sketch_width, trial_seeds)
from .metrics import accuracy, auc, l2_error, success_metric

__all__ = [
    "DataError", "ExperimentConfig", "GramTrial", "TrialResult",
    "run_classify_vs_cf", "run_experiment", "run_gram_check",
    "run_phase_transition", "run_stepsize_sweep", "run_topk_sweep",
    "sketch_matrix", "sketch_width", "trial_seeds",
    "accuracy", "auc", "l2_error", "success_metric",
]
