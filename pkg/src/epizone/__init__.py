"""Spatially contiguous epidemic zoning.

Pipeline: per-unit reproduction-number estimation, pairwise dynamic time
warping distances between R(t) trends, and spanning-tree based spatially
constrained clustering, validated against synthetic renewal epidemics.
"""

__version__ = "0.1.0"

from .core import (
    Calendar,
    IncidenceSeries,
    UnitGeometry,
    UnitId,
    ValidatedDataset,
    align_to_calendar,
    validate_dataset,
)
from .dtwdist import DistanceMatrix, DtwConfig, distance_matrix, dtw_distance
from .geograph import (
    SpanningTree,
    SpatialGraph,
    build_contiguity,
    build_gabriel,
    build_knn,
    ensure_connected,
    minimum_spanning_tree,
)
from .ingest import (
    AggregationMap,
    MortalityPanel,
    aggregate,
    compute_excess,
    parse_geometry,
    parse_incidence_csv,
)
from .repro import (
    RtSeries,
    SerialInterval,
    discretize_gamma_si,
    estimate_rt,
    smooth_rt,
)
from .synth import (
    Scenario,
    adjusted_rand_index,
    make_scenario,
    simulate_renewal,
)
from .zoner import (
    Partition,
    admission_test,
    cluster_cost,
    grow_partition,
    skater_partition,
)
