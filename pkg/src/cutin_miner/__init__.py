"""Batch mining of lane-change cut-in events from 10 Hz driving scenarios.

Pipeline: interchange ingest -> eligibility filter -> eight-criterion
detection -> entry-frame safety metrics -> two-population statistics ->
report emission, plus a deterministic synthetic-corpus generator used as the
ground-truth oracle.
"""

__version__ = "0.1.0"

from .detector import (  # noqa: E402,F401
    CriteriaVerdict,
    CutInEvent,
    DetectorParams,
    classify_target,
    detect_cutins,
    evaluate_criteria,
    find_entry_frame,
)
from .interchange import (  # noqa: F401
    iter_corpus,
    load_corpus,
    parse_scenario_stream,
    write_scenario_stream,
)
from .metrics import (  # noqa: F401
    EventRow,
    SafetyMetrics,
    classify_severity,
    compute_all,
    gap_at_entry,
    lead_speed_drop,
    min_distance,
    time_to_collision,
)
from .model import (  # noqa: F401
    AgentState,
    AgentTrack,
    LaneGeometry,
    Scenario,
    lateral_offset,
    project_frame,
    scenario_eligible,
)
from .stats import (  # noqa: F401
    SampleSet,
    bonferroni,
    bootstrap_median_ci,
    chi_square_2x2,
    cliffs_delta,
    cohens_d,
    compare_metrics,
    ecdf,
    kde_1d,
    mann_whitney_u,
    shapiro_wilk,
    speed_matched_subsample,
)
from .synth import (  # noqa: F401
    CorpusConfig,
    PlantSpec,
    generate_corpus,
    plant_cutin,
    replay_twin,
)
