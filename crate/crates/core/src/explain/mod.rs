//! Post hoc interpretation of a trained model: Shapley attributions over its
//! surviving inputs and the depths those inputs' times correspond to.
//!
//! Attributions use the marginal value function. A coalition `S` is worth the
//! mean model output over background rows whose `S` entries are replaced by
//! the explained instance.

mod depth;
mod shapley;

pub use depth::{depth_of_time, feature_depth_report, stack_time_ns, time_of_depth, Depth, DepthInterval, DepthQuery};
pub use shapley::{
    exact_shapley, sampled_shapley, shap_summary, shapley_rows, Background, ClassProbability, SampledShapley,
    ShapSummary, ShapleyMethod, ShapleyValues, ValueModel, MAX_EXACT_FEATURES,
};
