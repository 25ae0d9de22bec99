"""Stochastic metapopulation SIR simulation and source profiling for
multiregional outbreaks."""

__version__ = "0.1.0"

from .network import (
    UNREACHABLE,
    DistanceMatrix,
    MobilityMatrix,
    Network,
    generate_erdos_renyi,
    hop_distances,
    is_interchangeable,
    load_adjacency,
    mobility_matrix,
    save_adjacency,
)
from .profiler import (
    DecayKind,
    DecaySpec,
    LikelinessResult,
    decay_weight,
    decay_weights,
    hit_score,
    likeliness_scores,
)
from .simulator import (
    CompartmentState,
    Dataset,
    EpidemicParams,
    InitialCondition,
    ObservableKind,
    SimulationDiverged,
    Trajectory,
    ZeroVarianceError,
    initial_correlation,
    simulate,
    synthesize_dataset,
    write_trajectory_csv,
)
from .experiments import (
    CorrelationSamples,
    ExperimentConfig,
    HitCurve,
    SweepResult,
    compare_observables,
    hit_vs_correlation,
    rank_correlation,
    run_hit_experiment,
    sweep_decay_parameter,
)
from .data_ingest import (
    CaseReportSeries,
    RankingTimeline,
    bundled_data_path,
    daily_deltas,
    filter_regions,
    load_case_series,
    rank_timeline,
)

__all__ = [
    "__version__",
    "UNREACHABLE",
    "Network",
    "DistanceMatrix",
    "MobilityMatrix",
    "generate_erdos_renyi",
    "hop_distances",
    "mobility_matrix",
    "is_interchangeable",
    "load_adjacency",
    "save_adjacency",
    "EpidemicParams",
    "InitialCondition",
    "CompartmentState",
    "Trajectory",
    "Dataset",
    "ObservableKind",
    "SimulationDiverged",
    "ZeroVarianceError",
    "simulate",
    "synthesize_dataset",
    "initial_correlation",
    "write_trajectory_csv",
    "DecayKind",
    "DecaySpec",
    "LikelinessResult",
    "decay_weight",
    "decay_weights",
    "likeliness_scores",
    "hit_score",
    "ExperimentConfig",
    "HitCurve",
    "CorrelationSamples",
    "SweepResult",
    "run_hit_experiment",
    "hit_vs_correlation",
    "compare_observables",
    "sweep_decay_parameter",
    "rank_correlation",
    "CaseReportSeries",
    "RankingTimeline",
    "load_case_series",
    "filter_regions",
    "daily_deltas",
    "rank_timeline",
    "bundled_data_path",
]
