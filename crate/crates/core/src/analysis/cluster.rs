use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

pub const MAX_KMEANS_ITERATIONS: usize = 300;

/// Outcome of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after seeding and after each iteration.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.outer_iter().enumerate() {
        let d = sq_dist(point, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn sse(points: ArrayView2<f64>, centroids: &Array2<f64>, assignment: &[usize]) -> f64 {
    points
        .outer_iter()
        .zip(assignment)
        .map(|(p, &c)| sq_dist(p, centroids.row(c)))
        .sum()
}

/// k-means++ seeding: the first centroid uniformly, each further one with
/// probability proportional to its squared distance from the nearest chosen
/// centroid.
fn seed_centroids(points: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    centroids.row_mut(0).assign(&points.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = points.outer_iter().map(|p| sq_dist(p, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.row(c)));
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding, run until assignments stop
/// changing or [`MAX_KMEANS_ITERATIONS`] is reached.
///
/// A point only changes cluster when another centroid is strictly closer, and
/// a cluster left empty is re-seeded at the point farthest from its current
/// centroid, so the SSE never increases.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} points")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    let mut rng = rng::stream(seed, &[streams::KMEANS]);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.outer_iter().map(|p| nearest(p, &centroids).0).collect();
    let mut sse_trace = vec![sse(points, &centroids, &assignment)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_KMEANS_ITERATIONS {
        iterations += 1;
        // update step
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (p, &c) in points.outer_iter().zip(&assignment) {
            let mut row = sums.row_mut(c);
            row += &p;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignment[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centroids.row(assignment[a]));
                        let db = sq_dist(points.row(b), centroids.row(assignment[b]));
                        da.total_cmp(&db).then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    counts[assignment[i]] -= 1;
                    assignment[i] = c;
                    counts[c] = 1;
                    centroids.row_mut(c).assign(&points.row(i));
                }
            }
        }
        // assignment step
        let mut changed = false;
        for (i, p) in points.outer_iter().enumerate() {
            let current = sq_dist(p, centroids.row(assignment[i]));
            let (c, d) = nearest(p, &centroids);
            if c != assignment[i] && d < current {
                assignment[i] = c;
                changed = true;
            }
        }
        sse_trace.push(sse(points, &centroids, &assignment));
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(KMeansResult {
        assignment,
        centroids,
        sse_trace,
        iterations,
        converged,
    })
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity, completeness and V-measure of a clustering against classes.
pub fn homogeneity_completeness_v(classes: &[usize], clusters: &[usize]) -> Result<(f64, f64, f64)> {
    if classes.len() != clusters.len() {
        return Err(Error::Shape(format!(
            "{} classes for {} cluster ids",
            classes.len(),
            clusters.len()
        )));
    }
    if classes.is_empty() {
        return Err(Error::invalid("V-measure of an empty list"));
    }
    let n = classes.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut by_class: BTreeMap<usize, usize> = BTreeMap::new();
    let mut by_cluster: BTreeMap<usize, usize> = BTreeMap::new();
    for (&c, &k) in classes.iter().zip(clusters) {
        *joint.entry((c, k)).or_default() += 1;
        *by_class.entry(c).or_default() += 1;
        *by_cluster.entry(k).or_default() += 1;
    }
    let h_c = entropy(by_class.values().copied(), n);
    let h_k = entropy(by_cluster.values().copied(), n);
    let h_joint = entropy(joint.values().copied(), n);
    // H(C|K) = H(C,K) − H(K)
    let h_c_given_k = (h_joint - h_k).max(0.0);
    let h_k_given_c = (h_joint - h_c).max(0.0);
    let h = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let c = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v = if h + c == 0.0 { 0.0 } else { 2.0 * h * c / (h + c) };
    Ok((h, c, v))
}

/// Harmonic mean of homogeneity and completeness.
pub fn v_measure(classes: &[usize], clusters: &[usize]) -> Result<f64> {
    homogeneity_completeness_v(classes, clusters).map(|(_, _, v)| v)
}

/// V-measures of repeated k-means runs against one annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub runs: Vec<f64>,
    pub mean: f64,
    /// Only one distinct annotation value was present.
    pub degenerate: bool,
}

pub const KMEANS_RUNS: usize = 10;

/// Clusters `points` with k equal to the number of distinct annotation
/// values, `n_runs` times with seeds derived from `seed`, scoring each run by
/// V-measure against the annotation.
pub fn clustering_report(points: ArrayView2<f64>, annotation: &[usize], n_runs: usize, seed: u64) -> Result<ClusterReport> {
    if annotation.len() != points.nrows() {
        return Err(Error::Shape(format!(
            "{} annotations for {} points",
            annotation.len(),
            points.nrows()
        )));
    }
    if n_runs == 0 {
        return Err(Error::invalid("at least one k-means run is required"));
    }
    let mut distinct = annotation.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let k = distinct.len();
    if k == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let runs = (0..n_runs)
        .map(|r| {
            let km = kmeans(points, k, rng::derive_seed(seed, &[streams::KMEANS, r as u64]))?;
            v_measure(annotation, &km.assignment)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = runs.iter().sum::<f64>() / runs.len() as f64;
    Ok(ClusterReport {
        k,
        runs,
        mean,
        degenerate: k == 1,
    })
}
