from .config import ConfigError, RunConfig, parse_config
from .store import ResultsStore, estimator_from_record, estimator_to_record
from .orchestrate import (StageFailure, analyze_stage, match_stage, orchestrate,
                          qmc_stage, thermo_stage, tune_stage)

__all__ = [
    "ConfigError", "RunConfig", "parse_config",
    "ResultsStore", "estimator_from_record", "estimator_to_record",
    "StageFailure", "analyze_stage", "match_stage", "orchestrate",
    "qmc_stage", "thermo_stage", "tune_stage",
]
