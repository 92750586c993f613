//! Clustering quality metrics: chance-corrected label agreement (AMI, ARI),
//! NMI, silhouette, rank correlation and a weighted kNN probe.

mod contingency;
mod information;
mod knn;
mod pair_counting;
mod rank;
mod silhouette;

pub use contingency::{contingency, ContingencyTable};
pub use information::{
    ami, ami_from_table, entropy, expected_mutual_information, mutual_information, nmi,
    nmi_from_table,
};
pub use knn::{weighted_knn_accuracy, DEFAULT_KNN_TEMPERATURE};
pub use pair_counting::{ari, ari_from_table};
pub use rank::{average_ranks, pearson, spearman_rho};
pub use silhouette::{silhouette, silhouette_with, SilhouetteOptions};
