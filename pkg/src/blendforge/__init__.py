"""blendforge: multi-period coal blend planning, optimization, and analytics."""

from .analytics import (
    AnalyticsReport,
    build_report,
    constraint_slack,
    degradation_deadline,
    marginal_rom_value,
    price_sensitivity,
    quality_contribution,
)
from .constraints import Bound, ConstraintSet
from .errors import (
    BlendforgeError,
    CurveDomainError,
    DirectiveConflictError,
    DirectiveError,
    DocumentError,
    EmptyBlendError,
    OffSpecError,
    PlanStructureError,
    RunLogError,
    SpaceTooLargeError,
    UnknownRomError,
)
from .evaluate import (
    EvaluationReport,
    blend_quality,
    check_spec,
    compute_costs,
    degrade_quality,
    evaluate_plan,
    npv,
    price_blend,
    wash_parcel,
)
from .guided import (
    Directive,
    ExcludeRom,
    GuidedOutcome,
    PinAllotment,
    QualityDelta,
    ReserveRom,
    Session,
    TonnageDelta,
    compile_directives,
    guided_preview,
    guided_reoptimize,
    open_session,
    session_history,
)
from .optimizer import (
    OptimizeResult,
    Strategy,
    compare_strategies,
    initial_plan,
    max_throughput_plan,
    neighbors,
    optimize,
    repair,
)
from .plan import BYPASS, Allotment, BlendPlan, Rehandle
from .scenario_io import (
    RunLog,
    load_plan,
    load_scenario,
    save_plan,
    save_scenario,
)
from .space import (
    SpaceSummary,
    count_blend_space,
    count_compositions,
    enumerate_plans,
    oracle_optimum,
)
from .types import (
    Adjustment,
    AshYieldCurve,
    Attribute,
    AttributeRegistry,
    CurveKnot,
    DegradationModel,
    LogisticsConstraints,
    MarketModel,
    ProductSpec,
    QualityRange,
    QualityVector,
    RomParcel,
    Scenario,
)

__version__ = "0.1.0"
