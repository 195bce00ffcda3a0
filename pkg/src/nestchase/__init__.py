"""Nested convex body chasing: selectors, chasers, adversaries and a harness."""
from .adversary import (
    CapCutting,
    Hadamard,
    HypercubeFaces,
    ProductSlab,
    RandomNested,
    ReplayStream,
    RequestStream,
    ShrinkingBalls,
)
from .chaser import (
    GreedyProjectionChaser,
    LazySteinerChaser,
    NormedSpaceChaser,
    SteinerChaser,
    TighteningChaser,
    TowardSteinerChaser,
    make_chaser,
)
from .config import ConfigError, EpisodeConfig, parse_config
from .geom import ConvexBody, HalfSpace, NormSpec, PaddedBody, contains, project, support
from .harness import Report, Trace, competitive_report, opt_cost, run_episode
from .selector import SupportCache, steiner_def2, steiner_exact_2d, steiner_mc

__version__ = "0.1.0"
