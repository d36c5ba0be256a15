from .engine import BACKEND, ChainConfig, WormChain, run_chain
from .estimators import EstimatorResult, Obs, merge_results
from .tuning import TuneResult, TuningError, tune_mu
from .checkpoint import run_chain_resumable, save_checkpoint, load_checkpoint

__all__ = [
    "BACKEND", "ChainConfig", "WormChain", "run_chain",
    "EstimatorResult", "Obs", "merge_results",
    "TuneResult", "TuningError", "tune_mu",
    "run_chain_resumable", "save_checkpoint", "load_checkpoint",
]
