from .horizon import LinearPlanner, PbmPlanner, WindowError, schedule_year
from .linear import InfeasibleDispatch, optimize_linear
from .objective import (
    DispatchSchedule,
    LinearRollout,
    ObjectiveConfig,
    SpmRollout,
    evaluate_objective,
    load_schedule,
    save_schedule,
)
from .pbm import SearchConfig, optimize_pbm, seed_from_linear
