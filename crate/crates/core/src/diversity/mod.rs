//! Workload diversity: PCA over subject operation-category profiles.

mod export;
mod matrix;
mod pca;

use std::path::PathBuf;

use thiserror::Error;

pub use export::{scatter_export, scatter_points, write_tables, ScatterPoint};
pub use matrix::{build_matrix, build_matrix_for, load_profiles, FeatureMatrix, Profile};
pub use pca::{normalize, pca, PcaResult};

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("no subjects given")]
    NoSubjects,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("profile names unknown subject {0:?}")]
    UnknownSubject(String),
    #[error("profile names unknown category {0:?}")]
    UnknownCategory(String),
    #[error("subject {0:?} has no seed profiles")]
    NoSeeds(String),
    #[error("invalid count for {subject:?}/{category:?}")]
    InvalidCount { subject: String, category: String },
    #[error("PCA needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("cannot retain {requested} components of a rank-{rank} matrix")]
    InvalidComponents { requested: usize, rank: usize },
    #[error("every category has zero variance")]
    Degenerate,
    #[error("component {component} does not exist; {available} were computed")]
    UnknownComponent { component: usize, available: usize },
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed profile {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}
