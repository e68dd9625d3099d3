//! Displacement metrics, min-of-k evaluation, baselines and class-embedding
//! analysis.

mod metrics;
mod pca;
mod report;
pub mod svg;

pub use metrics::{ade, constant_velocity, fde, fde_with, l2_error, rmse_trajectory, FdeForm, Point};
pub use pca::{embedding_distances, pca_project, symmetric_eigen, PcaProjection};
pub use report::{
    constant_velocity_baseline, constant_velocity_report, eval_min_of_k, render_table, select_min_of_k,
    write_report_csv, ClassMetrics, EvalReport, Selection, PUBLISHED_REFERENCE,
};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Class embedding rows projected to 2-D plus their pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingAnalysis {
    pub pca: PcaProjection,
    pub distances: Vec<Vec<f64>>,
}

pub fn analyze_embeddings(rows: &[Vec<f64>]) -> Result<EmbeddingAnalysis> {
    Ok(EmbeddingAnalysis {
        pca: pca_project(rows)?,
        distances: embedding_distances(rows),
    })
}
