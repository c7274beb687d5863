//! Expert-elicited causal Bayesian networks for generation and balancing
//! capacity scenarios.
//!
//! The pipeline runs survey aggregation ([`elicitation`]) into a layered
//! Noisy-OR network ([`model`], [`compiler`]), exact inference
//! ([`inference`]), capacity and scenario reporting ([`scenario`]) and greedy
//! target optimization ([`optimizer`]).

pub mod compiler;
pub mod elicitation;
pub mod error;
pub mod inference;
pub mod model;
pub mod optimizer;
pub mod scenario;

pub use compiler::{compile_noisy_or, divorce, noisy_or_probability, DivorcePlan};
pub use elicitation::{
    aggregate_capacity, assemble_network, build_cpt, build_ici_params, top_factors,
    AggregationPolicy, Layout, Survey, Weighting,
};
pub use error::{Error, Result};
pub use inference::{enumerate_joint, joint_probability, posterior, Evidence, InferenceEngine, PosteriorSet};
pub use model::{
    state_value, topological_order, validate, Distribution, ExplicitCpt, Layer, Metadata, Network,
    Node, NoisyOrParams, ScenarioRoles, ValidationReport, ValueMap,
};
pub use optimizer::{optimize, plan_report, CostTable, OptimizationPlan, OptimizationStep, Target, Weights};
pub use scenario::{
    availability, bucket_sums, capacity_table, scenario_summary, AvailabilityProfile, Bucket,
    CapacityRow, ClassificationPresets, ClassificationRules,
};
