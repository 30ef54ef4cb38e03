//! Representation-geometry measurements: macro F1, k-means with V-measure,
//! exact t-SNE and stratified plot sampling.

mod cluster;
mod io;
mod metrics;
mod sample;
mod tsne;

pub use cluster::{
    clustering_report, homogeneity_completeness_v, kmeans, v_measure, ClusterReport, KMeansResult, KMEANS_RUNS,
    MAX_KMEANS_ITERATIONS,
};
pub use io::{read_embedding_dump, write_embedding_dump, ProjectedPoint, Projection2D};
pub use metrics::{macro_f1, per_class_f1};
pub use sample::{candidate_points, plot_sample, Annotation, EmbeddingSample, PointRef, QuotaRule};
pub use tsne::{conditional_affinities, kl_divergence, symmetrize, tsne, TsneConfig, TsneResult, PERPLEXITY_TOLERANCE};
