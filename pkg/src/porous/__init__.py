"""Porous-set construction and audit toolkit.

A library for building stratified families of lifted holes over a window
ball, auditing their packing invariants, and numerically checking the
smoothing, area, and mass-budget estimates that make the family porous yet
unavoidable for nearly flat C1 graph surfaces.
"""

from .analysis import (AreaCheck, CutoffField, FlattenCheck, Mollifier,
                       SmoothedGradientCheck, SobolevCheck,
                       area_lower_bound_check, blend, boundary_cross_term,
                       bump_field, flatten_residual, make_cutoff,
                       make_mollifier, mollifier_mass, mollify,
                       smoothed_gradient_check, sobolev_ratio)
from .config import (AuditSettings, LoadedConfig, default_config_doc,
                     load_config, parse_config)
from .construction import (BuildConfig, HoleFamily, LevelFamily, PkDescriptor,
                           TruncatedP, assemble_H, assemble_Pk, build_family,
                           build_stage, choose_level_radius,
                           deserialize_family, footprint_factor, pack_level,
                           plane_for_index, plane_schedule, sample_truncated_P,
                           serialize_family, truncated_P, validate_epsilons)
from .errors import (AuditFailure, BlendPreconditionError, ConfigError,
                     ConstructionFailure, ExtractionError, NeedsMoreSamples,
                     ParseError, PorousError, PreconditionError)
from .geometry import (AffinePlane, Ball, BallIndex, MeasureEstimate,
                       PorosityWitness, ScalarField, ball_index_query,
                       complement_measure, cross_section_area, enlarge,
                       pullback_porosity_witness, union_measure,
                       unit_ball_volume)
from .sampling import SamplingBudget, substream
from .surfaces import (BumpSpec, C1Norm, CorpusEntry, GraphPatch,
                       MembershipVerdict, SurfaceC1, c1_norm, corpus_generate,
                       generate_from_spec, graph_extract, graph_measure_in,
                       load_corpus_spec, reference_distance,
                       reference_surface, sn_membership)
from .verification import (AuditReport, AuditRow, BudgetLedger,
                           HoleClassification, ResidueRegion, alpha_relaxed,
                           analysis_suite, budget, classify_holes,
                           coverage_deficit, disjointness_audit, emit_report,
                           family_invariant_audit, hole_intersection_mass,
                           ledger_rows, mode_map, porosity_witness,
                           residue_region, select_smoothing_subfamily,
                           strict_deficit_bound)

__version__ = "0.1.0"

__all__ = [
    "AffinePlane",
    "AreaCheck",
    "AuditFailure",
    "AuditReport",
    "AuditRow",
    "AuditSettings",
    "Ball",
    "BallIndex",
    "BlendPreconditionError",
    "BudgetLedger",
    "BuildConfig",
    "BumpSpec",
    "C1Norm",
    "ConfigError",
    "ConstructionFailure",
    "CorpusEntry",
    "CutoffField",
    "ExtractionError",
    "FlattenCheck",
    "GraphPatch",
    "HoleClassification",
    "HoleFamily",
    "LevelFamily",
    "LoadedConfig",
    "MeasureEstimate",
    "MembershipVerdict",
    "Mollifier",
    "NeedsMoreSamples",
    "ParseError",
    "PkDescriptor",
    "PorosityWitness",
    "PorousError",
    "PreconditionError",
    "ResidueRegion",
    "SamplingBudget",
    "ScalarField",
    "SmoothedGradientCheck",
    "SobolevCheck",
    "SurfaceC1",
    "TruncatedP",
    "alpha_relaxed",
    "analysis_suite",
    "area_lower_bound_check",
    "assemble_H",
    "assemble_Pk",
    "ball_index_query",
    "blend",
    "boundary_cross_term",
    "budget",
    "build_family",
    "build_stage",
    "bump_field",
    "c1_norm",
    "choose_level_radius",
    "classify_holes",
    "complement_measure",
    "corpus_generate",
    "coverage_deficit",
    "cross_section_area",
    "default_config_doc",
    "deserialize_family",
    "disjointness_audit",
    "emit_report",
    "enlarge",
    "family_invariant_audit",
    "flatten_residual",
    "footprint_factor",
    "generate_from_spec",
    "graph_extract",
    "graph_measure_in",
    "hole_intersection_mass",
    "ledger_rows",
    "load_config",
    "load_corpus_spec",
    "make_cutoff",
    "make_mollifier",
    "mode_map",
    "mollifier_mass",
    "mollify",
    "pack_level",
    "parse_config",
    "plane_for_index",
    "plane_schedule",
    "porosity_witness",
    "pullback_porosity_witness",
    "reference_distance",
    "reference_surface",
    "residue_region",
    "sample_truncated_P",
    "select_smoothing_subfamily",
    "serialize_family",
    "smoothed_gradient_check",
    "sn_membership",
    "sobolev_ratio",
    "strict_deficit_bound",
    "substream",
    "truncated_P",
    "union_measure",
    "unit_ball_volume",
]
