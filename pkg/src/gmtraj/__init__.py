"""Pedestrian trajectory forecasting with dynamic guidance maps and social energy refinement.

Pipeline: ``ingest`` parses annotations into samples, ``recwin`` picks record
windows, ``gmap`` rasterizes them into guidance maps, ``model`` predicts a
preliminary path, ``social`` refines it on an energy field and
``evaluation`` scores it. ``estimator`` wraps the pieces in scikit-learn
style classes; ``cli`` drives full runs.
"""
from .estimator import BGMRegressor, LinearTrajectoryRegressor, SocialRefiner
from .evaluation import ade, fde, linear_baseline
from .ingest import HorizonConfig, Scene, TrajectorySample, build_samples, parse_annotations
from .model import BGMNetwork, NetworkConfig, TrainConfig
from .social import SocialParams

__version__ = "0.1.0"

__all__ = [
    "BGMRegressor",
    "LinearTrajectoryRegressor",
    "SocialRefiner",
    "ade",
    "fde",
    "linear_baseline",
    "HorizonConfig",
    "Scene",
    "TrajectorySample",
    "build_samples",
    "parse_annotations",
    "BGMNetwork",
    "NetworkConfig",
    "TrainConfig",
    "SocialParams",
]
