//! Finite partition models, belief hierarchies and pooled-information
//! recovery. All probabilities are exact rationals.

mod lipman;
mod partition;
mod recovery;
mod types;

pub use lipman::{build_lipman, construction_constant, LipmanModels};
pub use partition::{
    load_partition_model, parse_partition_model, parse_rational, rational_to_f64, to_belief, GroundState,
    PartitionModel,
};
pub use recovery::{full_info_posterior, recover_from_hierarchy, Point, RecoveryResult, TypeBelief, TypeSpace};
pub use types::{
    agreement_depth, depth_search_bound, hierarchies_equal_up_to, kth_order_types, orders_up_to, stable_types,
    ClassId, OrderKTypes, Record, TypeInterner,
};
