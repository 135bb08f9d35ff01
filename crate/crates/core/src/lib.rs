//! Analytics toolkit for studying user migration after community bans:
//! corpus labeling, per-user behavioral features, community-similarity
//! embeddings, selection-corrected regression, and hierarchical migration
//! classifiers.

pub mod boost;
pub mod corpus;
pub mod econometrics;
pub mod features;
pub mod graphsim;
pub mod textscore;
