//! Lloyd's k-means with seeded k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment/update step, for diagnostics.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub empty_repairs: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::param("k", "must be >= 1"));
    }
    if points.len() < k {
        return Err(Error::param(
            "k",
            format!("k = {k} exceeds number of points {}", points.len()),
        ));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Alignment("k-means points differ in dimension".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let n = points.len();
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut repairs = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let cur = assignments[i];
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            // Ties go to the lowest index, unless the current cluster is tied.
            if cur != usize::MAX && dist2(p, &centroids[cur]) == best_d {
                best = cur;
            }
            if best != cur {
                assignments[i] = best;
                changed = true;
            }
        }
        trace.push(inertia(points, &centroids, &assignments));

        // Repair empty clusters with the point farthest from its centroid.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&i, &j| {
                        dist2(&points[i], &centroids[assignments[i]])
                            .total_cmp(&dist2(&points[j], &centroids[assignments[j]]))
                            .then(j.cmp(&i))
                    });
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    assignments[i] = c;
                    counts[c] = 1;
                    centroids[c] = points[i].clone();
                    repairs += 1;
                    changed = true;
                }
            }
        }

        update_centroids(points, &assignments, &mut centroids);
        trace.push(inertia(points, &centroids, &assignments));
        if !changed {
            converged = true;
            break;
        }
    }

    Ok(KMeansResult {
        inertia: inertia(points, &centroids, &assignments),
        assignments,
        centroids,
        inertia_trace: trace,
        iterations,
        converged,
        empty_repairs: repairs,
    })
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[idx].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn update_centroids(points: &[Vec<f64>], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
        if count > 0 {
            centroids[c] = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}

fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum()
}
