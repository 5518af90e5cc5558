//! Feature agglomeration, permutation importance and recursive feature
//! elimination with cross-validation.

mod agglomerate;
mod cv;
mod pfi;
mod rfecv;

pub use agglomerate::{agglomerate, ClusterMap, ClusterMode, Metric};
pub use cv::{make_folds, CvKind, CvScheme, Fold, FoldSpec};
pub use pfi::{pfi, PfiResult};
pub use rfecv::{rfe_order, rfecv, CurvePoint, RfecvConfig, RfecvResult};
