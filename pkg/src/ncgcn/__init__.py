"""Neighborhood-confusion guided separated GCN training on sparse graphs."""

from .config import TrainConfig, load_config
from .data import Dataset, MixedSbmSpec, SbmSpec, gen_mixed_sbm, gen_sbm, load_bundle, save_bundle
from .errors import (ConfigError, DataError, InputError, InternalError, NcgcnError, SchemaError,
                     TrainingError)
from .graph import CsrMatrix, KHopIndex, build_csr, khop_index, spmm, symmetric_normalize
from .metrics import (build_masks, entropy_oracle, group_report, mask_recall, neighborhood_confusion,
                      node_homophily)
from .model import VARIANTS, build_propagation, forward, init_params
from .report import load_report, save_report
from .trainer import RunResult, Splits, aggregate, make_splits, run_seeds, train

__version__ = "0.1.0"

__all__ = [
    "TrainConfig", "load_config", "Dataset", "MixedSbmSpec", "SbmSpec", "gen_mixed_sbm", "gen_sbm",
    "load_bundle", "save_bundle", "ConfigError", "DataError", "InputError", "InternalError",
    "NcgcnError", "SchemaError", "TrainingError", "CsrMatrix", "KHopIndex", "build_csr", "khop_index",
    "spmm", "symmetric_normalize", "build_masks", "entropy_oracle", "group_report", "mask_recall",
    "neighborhood_confusion", "node_homophily", "VARIANTS", "build_propagation", "forward",
    "init_params", "load_report", "save_report", "RunResult", "Splits", "aggregate", "make_splits",
    "run_seeds", "train",
]
