"""Planning-conditioned multi-agent trajectory forecasting for highway driving."""

from .grid import GridSpec, GridTensor, cell_index, gather, scatter
from .network import PipConfig, PipNet, config_from_preset, integrate_displacements, nll_loss
from .planning import (CandidatePlan, CollisionReport, QuinticSpline, collision_check,
                       fit_quintic, generate_candidates, sample_spline)
from .scenes import (ManeuverLabel, SceneSample, TrajectorySegment, build_samples,
                     label_maneuver, to_relative_frame)
from .tracks import TrackTable, load_highd, load_ngsim, resample

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "GridTensor", "cell_index", "scatter", "gather",
    "PipConfig", "PipNet", "config_from_preset", "integrate_displacements", "nll_loss",
    "CandidatePlan", "CollisionReport", "QuinticSpline", "collision_check",
    "fit_quintic", "generate_candidates", "sample_spline",
    "ManeuverLabel", "SceneSample", "TrajectorySegment", "build_samples",
    "label_maneuver", "to_relative_frame",
    "TrackTable", "load_highd", "load_ngsim", "resample",
]
