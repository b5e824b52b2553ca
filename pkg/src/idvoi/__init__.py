"""Influence-diagram decision support.

Strong junction trees for maximum-expected-utility solving, plus myopic
value-of-information computed by several independently countable methods.
"""

from idvoi.jtree import (
    StrongJunctionTree,
    TreeError,
    build_tree,
    check_schedule,
    expand_for,
)
from idvoi.model import (
    Cpt,
    Evidence,
    EvidenceError,
    IllegalObservationError,
    InfluenceDiagram,
    ModelError,
    ModelFormatError,
    ModelValidationError,
    ObservationScenario,
    UnknownVariableError,
    UtilityNode,
    Variable,
    Violation,
    check_evidence,
    markov_blanket,
    observation_legal,
    parse_model,
    past_of,
    scenario_legal,
    serialize_model,
    validate_model,
)
from idvoi.oracle import (
    OracleError,
    OracleResult,
    oracle_meu,
    oracle_policy_value,
    oracle_posterior,
    oracle_voi,
)
from idvoi.solve import (
    Calibration,
    ImpossibleEvidenceError,
    Policy,
    PropagationMeter,
    Solution,
    SolveError,
    bn_calibrate,
    bn_posterior,
    solve_meu,
    solve_tree,
)
from idvoi.voi import (
    CandidateResult,
    CooperTransform,
    VoiError,
    VoiReport,
    cooper_transform,
    voi_cooper,
    voi_general_model,
    voi_non_intervening,
    voi_report,
    voi_table_expansion,
)

__version__ = "0.1.0"

__all__ = [
    "Calibration",
    "CandidateResult",
    "CooperTransform",
    "Cpt",
    "Evidence",
    "EvidenceError",
    "IllegalObservationError",
    "ImpossibleEvidenceError",
    "InfluenceDiagram",
    "ModelError",
    "ModelFormatError",
    "ModelValidationError",
    "ObservationScenario",
    "OracleError",
    "OracleResult",
    "Policy",
    "PropagationMeter",
    "Solution",
    "SolveError",
    "StrongJunctionTree",
    "TreeError",
    "UnknownVariableError",
    "UtilityNode",
    "Variable",
    "Violation",
    "VoiError",
    "VoiReport",
    "bn_calibrate",
    "bn_posterior",
    "build_tree",
    "check_evidence",
    "check_schedule",
    "cooper_transform",
    "expand_for",
    "markov_blanket",
    "observation_legal",
    "oracle_meu",
    "oracle_policy_value",
    "oracle_posterior",
    "oracle_voi",
    "parse_model",
    "past_of",
    "scenario_legal",
    "serialize_model",
    "solve_meu",
    "solve_tree",
    "validate_model",
    "voi_cooper",
    "voi_general_model",
    "voi_non_intervening",
    "voi_report",
    "voi_table_expansion",
    "__version__",
]
