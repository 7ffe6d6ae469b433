"""Edge-cache hit-probability toolkit.

Simulates spatial multi-LRU caching over random station fields and evaluates
the matching working-set (characteristic time) approximations, so measured
and predicted hit probabilities can be compared on one axis.
"""

from .analysis import (
    AnalyticModelParams,
    CheSolution,
    multi_lru_all_hit,
    multi_lru_one_hit,
    single_lru_hit,
    solve_characteristic_time,
    two_cache_all_hit,
    two_cache_one_hit,
)
from .cache_core import (
    CacheState,
    LfuState,
    PolicyKind,
    RequestOutcome,
    handle_request,
)
from .geometry import (
    CoverageProfile,
    StationField,
    Window,
    closest_station,
    coverage_table,
    covering_stations,
    estimate_coverage_profile,
    estimate_union_surface,
    poisson_coverage_pmf,
    sample_station_field,
)
from .placement import (
    PlacementPlan,
    greedy_full_info_placement,
    irm_upper_bound,
    mpc_placement,
    pbp_placement,
    pbp_probabilities,
    temporal_pop_bound,
)
from .sim import (
    HitReport,
    PolicyRow,
    Scenario,
    coverage_profile_for,
    run_experiment,
    run_realization,
    run_stream_policies,
    sweep,
    write_hit_csv,
)
from .traffic import (
    Request,
    RequestStream,
    SnmContent,
    SnmLaw,
    ZipfCatalogue,
    estimate_top_objects,
    make_catalogue,
    sample_irm_stream,
    sample_snm_stream,
    zipf_pmf,
)

__version__ = "0.1.0"
