"""Stage-wise multi-class boosting that maximizes the multi-class margin.

The booster adds one decision stump per round and solves only for that
stump's ``k`` class coefficients, keeping earlier rows fixed. Reference
solvers in :mod:`swboost.oracles` check it against closed-form binary
AdaBoost, a fully-corrective re-fit and l1-constrained solutions.
"""

__version__ = "0.1.0"

from .booster import BoostModel, TrainConfig, load_model, predict, save_model, train
from .boxsolver import SolverSettings, minimize_box
from .dataio import Dataset, SplitSpec, load_dataset, stratified_split
from .stumps import DecisionStump

__all__ = [
    "BoostModel", "Dataset", "DecisionStump", "SolverSettings", "SplitSpec", "TrainConfig",
    "load_dataset", "load_model", "minimize_box", "predict", "save_model",
    "stratified_split", "train", "__version__",
]
