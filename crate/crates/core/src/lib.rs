//! Uniform spanning trees of Z³ sampled by Wilson's algorithm, electrical
//! quantities on them, and collision counts of two killed random walks.

pub mod collision;
pub mod error;
pub mod graph;
pub mod lattice;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod treemetrics;
pub mod walk;
pub mod wilson;

pub use collision::{exact_moments, sample_z, CollisionSample, ExactMoments, KilledWalkState, MomentReport};
pub use error::{Result, UstError};
pub use graph::Graph;
pub use lattice::{LatticeBox, LatticePath, LatticePoint, Norm};
pub use network::{green_diagonal, resistance_general, resistance_profile, resistance_tree, ResistanceReport};
pub use rng::RngStream;
pub use treemetrics::{component_ur, intrinsic_ball, tree_path, IntrinsicBall, KilledRegion, TreeComponent};
pub use walk::{estimate_beta, lerw_length_sample, loop_erase, srw_until, BetaEstimate, LerwSample};
pub use wilson::{wilson_infinity_approx, wilson_wired, BoundaryMode, SpanningTree, VertexOrder, WilsonConfig};
