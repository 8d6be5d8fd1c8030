//! Lloyd k-means with k-means++ seeding, and a capacitated variant used to
//! group ONUs under remote nodes.
//!
//! The Lloyd loop keeps Hamerly-style distance bounds so most points skip
//! the full centroid scan once clusters settle. The bounds never change
//! which centroid a point ends up with, only how often it is recomputed.

use rand::Rng;

use super::{Point2D, ScenarioError};

/// Stop once no centroid moves more than this between iterations.
pub const KMEANS_TOL_KM: f64 = 1e-6;
pub const KMEANS_MAX_ITER: usize = 100;

const CAPACITATED_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Point2D>,
    /// Cluster index of every input point.
    pub labels: Vec<usize>,
    /// Number of centroid updates performed.
    pub iterations: usize,
    /// Sum of squared point-to-centroid distances after each update.
    pub inertia_trace: Vec<f64>,
}

pub fn kmeans<R: Rng + ?Sized>(
    points: &[Point2D],
    k: usize,
    rng: &mut R,
) -> Result<KMeansResult, ScenarioError> {
    if k == 0 {
        return Err(ScenarioError::InvalidArgument("k must be >= 1".into()));
    }
    if points.len() < k {
        return Err(ScenarioError::InvalidArgument(format!(
            "k-means needs at least k={k} points, got {}",
            points.len()
        )));
    }
    let mut centroids = plus_plus_seeds(points, k, rng);
    let n = points.len();

    let mut labels = vec![0usize; n];
    let mut upper = vec![0.0f64; n];
    let mut lower = vec![f64::INFINITY; n];
    for (i, p) in points.iter().enumerate() {
        let (best, d1, d2) = two_nearest(p, &centroids);
        labels[i] = best;
        upper[i] = d1;
        lower[i] = d2;
    }

    let mut inertia_trace = Vec::new();
    let mut iterations = 0;
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
    let mut drift = vec![0.0f64; k];
    let mut half_sep = vec![0.0f64; k];

    while iterations < KMEANS_MAX_ITER {
        sums.iter_mut().for_each(|s| *s = (0.0, 0.0, 0));
        for (p, &l) in points.iter().zip(&labels) {
            let s = &mut sums[l];
            s.0 += p.x;
            s.1 += p.y;
            s.2 += 1;
        }
        for j in 0..k {
            let (sx, sy, cnt) = sums[j];
            let next = if cnt == 0 {
                centroids[j]
            } else {
                Point2D::new(sx / cnt as f64, sy / cnt as f64)
            };
            drift[j] = next.distance(&centroids[j]);
            centroids[j] = next;
        }
        iterations += 1;
        inertia_trace.push(
            points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| p.distance2(&centroids[l]))
                .sum(),
        );

        let (max_j, max_drift) = drift
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |acc, (j, d)| if d > acc.1 { (j, d) } else { acc });
        if max_drift < KMEANS_TOL_KM {
            break;
        }
        let second_drift = drift
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != max_j)
            .map(|(_, &d)| d)
            .fold(0.0f64, f64::max);

        for j in 0..k {
            half_sep[j] = 0.5
                * centroids
                    .iter()
                    .enumerate()
                    .filter(|&(o, _)| o != j)
                    .map(|(_, c)| c.distance(&centroids[j]))
                    .fold(f64::INFINITY, f64::min);
        }

        for (i, p) in points.iter().enumerate() {
            let a = labels[i];
            upper[i] += drift[a];
            lower[i] -= if a == max_j { second_drift } else { max_drift };
            let bound = half_sep[a].max(lower[i]);
            if upper[i] <= bound {
                continue;
            }
            upper[i] = p.distance(&centroids[a]);
            if upper[i] <= bound {
                continue;
            }
            let (best, d1, d2) = two_nearest(p, &centroids);
            labels[i] = best;
            upper[i] = d1;
            lower[i] = d2;
        }
    }

    Ok(KMeansResult {
        centroids,
        labels,
        iterations,
        inertia_trace,
    })
}

/// Nearest centroid (lowest index on ties), its distance, and the distance
/// to the runner-up.
fn two_nearest(p: &Point2D, centroids: &[Point2D]) -> (usize, f64, f64) {
    let mut best = 0;
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = p.distance2(c);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = j;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1.sqrt(), d2.sqrt())
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &[Point2D], k: usize, rng: &mut R) -> Vec<Point2D> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.push(points[first]);
    let mut nearest: Vec<f64> = points.iter().map(|p| p.distance2(&points[first])).collect();

    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the final partial sum.
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Fewer distinct points than k: reuse an unchosen duplicate.
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[pick] = true;
        let c = points[pick];
        centroids.push(c);
        for (w, p) in nearest.iter_mut().zip(points) {
            *w = w.min(p.distance2(&c));
        }
    }
    centroids
}

/// Partitions `points` into `ceil(n / capacity)` non-empty groups of at most
/// `capacity` members. Returns the group of every point and the group
/// centroids.
///
/// Starts from unconstrained k-means centroids, then alternates a greedy
/// capacity-respecting assignment (closest pairs first) with centroid
/// updates until the assignment stops changing.
pub fn capacitated_groups<R: Rng + ?Sized>(
    points: &[Point2D],
    capacity: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Point2D>), ScenarioError> {
    if capacity == 0 {
        return Err(ScenarioError::InvalidArgument("capacity must be >= 1".into()));
    }
    if points.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let groups = points.len().div_ceil(capacity);
    let mut centroids = kmeans(points, groups, rng)?.centroids;
    let mut labels: Vec<usize> = Vec::new();

    for _ in 0..CAPACITATED_MAX_ITER {
        let next = greedy_capacitated_assign(points, &centroids, capacity);
        let settled = next == labels;
        labels = next;
        centroids = group_means(points, &labels, groups);
        if settled {
            break;
        }
    }
    Ok((labels, centroids))
}

fn greedy_capacitated_assign(points: &[Point2D], centroids: &[Point2D], capacity: usize) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(points.len() * centroids.len());
    for (i, p) in points.iter().enumerate() {
        for (j, c) in centroids.iter().enumerate() {
            pairs.push((p.distance2(c), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut labels = vec![usize::MAX; points.len()];
    let mut load = vec![0usize; centroids.len()];
    let mut left = points.len();
    for (_, i, j) in pairs {
        if left == 0 {
            break;
        }
        if labels[i] == usize::MAX && load[j] < capacity {
            labels[i] = j;
            load[j] += 1;
            left -= 1;
        }
    }
    labels
}

fn group_means(points: &[Point2D], labels: &[usize], groups: usize) -> Vec<Point2D> {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); groups];
    for (p, &l) in points.iter().zip(labels) {
        sums[l].0 += p.x;
        sums[l].1 += p.y;
        sums[l].2 += 1;
    }
    sums.into_iter()
        .map(|(x, y, n)| {
            let n = n.max(1) as f64;
            Point2D::new(x / n, y / n)
        })
        .collect()
}
