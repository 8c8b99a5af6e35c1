from .cycles import (
    CycleState,
    CycleStep,
    MatchQuality,
    SelectionError,
    WorstSelection,
    match_quality,
    run_cycle,
    select_worst,
)
from .loop import TrainConfig, TrainResult, TrainingAborted, train

__all__ = [
    "CycleState", "CycleStep", "MatchQuality", "SelectionError", "WorstSelection",
    "match_quality", "run_cycle", "select_worst",
    "TrainConfig", "TrainResult", "TrainingAborted", "train",
]
