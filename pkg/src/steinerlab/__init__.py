"""steinerlab: exact Euclidean Steiner minimal trees for small instances,
with quantitative length-bound audits, a spherical-point connector, and an
iterative constructor of a full tree whose branch points accumulate at four
circle points."""

from .geometry import (
    Ball,
    EmbeddedForest,
    Segment,
    angle_at,
    clip_to_ball,
    coarea_integral,
    convex_hull_contains,
    distance,
    forest_length,
    sphere_crossings,
)
from .topology import (
    ContractedTopology,
    FullTopology,
    canonical_code,
    contract_family,
    enumerate_full,
    expand_to_full,
)
from .opt import FixedTopologyResult, minimize_topology, validate_local_minimality

__version__ = "0.1.0"
