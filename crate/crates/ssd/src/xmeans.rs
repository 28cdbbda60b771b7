//! X-means: k-means with the number of clusters chosen by BIC-scored splitting.
//!
//! Starting from `k_min` centres, every cluster is tentatively split in two by a
//! local 2-means run and the split is kept when the two-centre model of that
//! cluster scores a higher BIC than the one-centre model. Splitting stops when no
//! split is accepted or `k_max` is reached. The result is the structure with the
//! best BIC over the whole data set among those visited. Likelihoods use the
//! identical spherical Gaussian model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Smallest variance used in likelihoods, so duplicate points do not score infinitely.
const MIN_VARIANCE: f64 = 1e-12;
const KMEANS_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster of each point, numbered by first appearance.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub bic: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centre) in centers.iter().enumerate() {
        let d = dist2(centre, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centers<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].to_vec()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| centers.iter().map(|c| dist2(c, p)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, di) in d.iter().enumerate() {
            if target < *di {
                pick = i;
                break;
            }
            target -= di;
        }
        centers.push(points[pick].to_vec());
    }
    centers
}

/// Lloyd iterations from the given centres; empty clusters keep their centre.
fn lloyd(points: &[&[f64]], mut centers: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
    for _ in 0..KMEANS_ITERS {
        let mut sums = vec![vec![0.0; dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for (c, (s, &m)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if m > 0 {
                *c = s.iter().map(|v| v / m as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(&centers, p)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    (centers, labels)
}

/// BIC of a spherical Gaussian mixture with hard assignments and one shared
/// per-dimension variance.
fn bic(points: &[&[f64]], centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    let r = points.len() as f64;
    let k = centers.len() as f64;
    let m = points[0].len() as f64;
    let sse: f64 = points.iter().zip(labels).map(|(p, &l)| dist2(p, &centers[l])).sum();
    let variance = if r > k { (sse / (m * (r - k))).max(MIN_VARIANCE) } else { MIN_VARIANCE };
    let mut counts = vec![0usize; centers.len()];
    labels.iter().for_each(|&l| counts[l] += 1);
    let mixing: f64 = counts.iter().filter(|&&n| n > 0).map(|&n| n as f64 * (n as f64 / r).ln()).sum();
    let loglik = mixing - r * m / 2.0 * (2.0 * std::f64::consts::PI * variance).ln() - sse / (2.0 * variance);
    let params = (k - 1.0) + m * k + 1.0;
    loglik - params / 2.0 * r.ln()
}

fn relabel(labels: &[usize], centers: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map = vec![usize::MAX; centers.len()];
    let mut next = 0;
    let mut out = Vec::with_capacity(labels.len());
    let mut ordered = Vec::new();
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
            ordered.push(centers[l].clone());
        }
        out.push(map[l]);
    }
    (out, ordered)
}

/// Clusters `data` (one row per point) into between `k_min` and `k_max` groups.
/// `k_min` is lowered to the number of distinct points when there are fewer.
pub fn xmeans<R: Rng>(data: &[Vec<f64>], k_min: usize, k_max: usize, rng: &mut R) -> Clustering {
    assert!(!data.is_empty(), "no points to cluster");
    assert!(k_min >= 1 && k_min <= k_max, "need 1 <= k_min <= k_max");
    let points: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
    let mut distinct: Vec<&[f64]> = Vec::new();
    for p in &points {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(p);
        }
    }
    let k0 = k_min.min(distinct.len());
    let (mut centers, mut labels) = lloyd(&points, seed_centers(&distinct, k0, rng));
    let mut best = (bic(&points, &centers, &labels), centers.clone(), labels.clone());
    loop {
        if centers.len() >= k_max {
            break;
        }
        let mut next_centers = Vec::new();
        let mut split_any = false;
        let mut total = centers.len();
        for (c, centre) in centers.iter().enumerate() {
            let members: Vec<&[f64]> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| *p).collect();
            let can_split = members.len() >= 2 && total < k_max && members.iter().any(|p| *p != members[0]);
            if can_split {
                let (children, child_labels) = lloyd(&members, seed_centers(&members, 2, rng));
                let parent = bic(&members, std::slice::from_ref(centre), &vec![0; members.len()]);
                if children.len() == 2 && bic(&members, &children, &child_labels) > parent {
                    next_centers.extend(children);
                    split_any = true;
                    total += 1;
                    continue;
                }
            }
            next_centers.push(centre.clone());
        }
        if !split_any {
            break;
        }
        let (c, l) = lloyd(&points, next_centers);
        centers = c;
        labels = l;
        let score = bic(&points, &centers, &labels);
        if score > best.0 {
            best = (score, centers.clone(), labels.clone());
        }
    }
    let (score, centers, labels) = best;
    let (labels, centers) = relabel(&labels, centers);
    Clustering { labels, centers, bic: score }
}

/// Two groups of `size` behaviour vectors with unit-variance noise: cleaners near
/// `[2, 2 + separation]` (much cleaning, little eating) and harvesters near
/// `[2 + separation, 2]`. Points alternate between the groups; returns the data
/// and the generating group of each point.
pub fn synthetic_behaviour_groups<R: Rng>(size: usize, separation: f64, rng: &mut R) -> (Vec<Vec<f64>>, Vec<usize>) {
    let centres = [[2.0, 2.0 + separation], [2.0 + separation, 2.0]];
    let mut data = Vec::with_capacity(2 * size);
    let mut truth = Vec::with_capacity(2 * size);
    for i in 0..2 * size {
        let g = i % 2;
        data.push(centres[g].iter().map(|c| c + rng.sample::<f64, _>(StandardNormal)).collect());
        truth.push(g);
    }
    (data, truth)
}

/// Whether two labelings induce the same partition, up to renaming.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
