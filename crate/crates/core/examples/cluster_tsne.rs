//! Clusters three Gaussian blobs with k-means, scores the clustering by
//! V-measure, projects them with t-SNE and writes the projection as CSV.

use ndarray::Array2;
use polyprobe::analysis::{clustering_report, tsne, EmbeddingSample, Projection2D, TsneConfig};
use polyprobe::rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (per_blob, dim) = (40, 32);
    let noise = Normal::new(0.0, 1.0)?;
    let mut r = rng::stream(0, &[]);
    let mut x = Array2::zeros((3 * per_blob, dim));
    let mut blob = Vec::new();
    for (row, mut point) in x.rows_mut().into_iter().enumerate() {
        let b = row / per_blob;
        for (d, v) in point.iter_mut().enumerate() {
            *v = if d % 3 == b { 8.0 } else { 0.0 } + noise.sample(&mut r);
        }
        blob.push(b);
    }

    let high = clustering_report(x.view(), &blob, 5, 0)?;
    println!("k-means in {dim}-d: V-measure per run {:?}", high.runs);

    let settings = TsneConfig {
        perplexity: 20.0,
        ..TsneConfig::default()
    };
    let projected = tsne(x.view(), &settings)?;
    println!("t-SNE KL {:.3} -> {:.3}", projected.initial_kl, projected.final_kl);
    let low = clustering_report(projected.embedding.view(), &blob, 5, 0)?;
    println!("k-means in 2-d: mean V-measure {:.3}", low.mean);

    let sample = EmbeddingSample {
        vectors: x,
        labels: blob.iter().map(|&b| Some(b)).collect(),
        languages: vec![0; blob.len()],
        label_names: vec!["a".into(), "b".into(), "c".into()],
        language_names: vec!["xx".into()],
    };
    let path = std::env::temp_dir().join("polyprobe-blobs.csv");
    Projection2D::from_embedding(&sample, &projected.embedding, settings)?.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
