//! Class-conditional betweenness over personalized PageRank, with
//! shortest-path betweenness as a small-graph reference.

mod betweenness;
mod cbc;
mod correlation;

pub use betweenness::{betweenness_centrality, shortest_path_cbc, BETWEENNESS_NODE_LIMIT};
pub use cbc::{cbc_scores, CbcConfig, CbcScores, DEFAULT_EPSILON, DEFAULT_PAIR_BUDGET};
pub use correlation::{pearson, rank_correlation, ranks, Pearson};
