//! Euclidean helpers shared by every clusterer.

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Index and squared distance of the nearest center. Ties go to the lowest index.
///
/// Panics if `centers` is empty.
pub fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    assert!(!centers.is_empty(), "nearest() needs at least one center");
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// Nearest and second-nearest indices with their distances (not squared).
pub fn two_nearest(point: &[f64], centers: &[Vec<f64>]) -> ((usize, f64), (usize, f64)) {
    assert!(centers.len() >= 2, "two_nearest() needs at least two centers");
    let mut first = (usize::MAX, f64::INFINITY);
    let mut second = (usize::MAX, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < first.1 {
            second = first;
            first = (i, d);
        } else if d < second.1 {
            second = (i, d);
        }
    }
    ((first.0, first.1.sqrt()), (second.0, second.1.sqrt()))
}

/// Arithmetic mean of a nonempty set of rows; `None` when the set is empty.
pub fn mean<'a, I>(rows: I) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = rows.into_iter();
    let first = iter.next()?;
    let mut acc = first.to_vec();
    let mut n = 1usize;
    for row in iter {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        n += 1;
    }
    let inv = n as f64;
    acc.iter_mut().for_each(|a| *a /= inv);
    Some(acc)
}

/// Per-cluster means for an assignment over `k` clusters. Empty clusters yield `None`.
pub fn cluster_means(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Option<Vec<f64>>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(mut s, n)| {
            if n == 0 {
                None
            } else {
                s.iter_mut().for_each(|x| *x /= n as f64);
                Some(s)
            }
        })
        .collect()
}

/// Most frequent label among `labels`, ties to the smallest label.
pub fn majority(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Option<usize> {
    let mut counts = vec![0usize; n_classes.max(1)];
    let mut any = false;
    for l in labels {
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_breaks_ties_low() {
        let centers = vec![vec![-1.0], vec![1.0]];
        assert_eq!(nearest(&[0.0], &centers).0, 0);
    }

    #[test]
    fn two_nearest_orders() {
        let centers = vec![vec![5.0], vec![0.0], vec![1.0]];
        let ((a, da), (b, db)) = two_nearest(&[0.2], &centers);
        assert_eq!((a, b), (1, 2));
        assert!((da - 0.2).abs() < 1e-12 && (db - 0.8).abs() < 1e-12);
    }

    #[test]
    fn majority_ties_to_smallest() {
        assert_eq!(majority([2, 1, 2, 1], 3), Some(1));
        assert_eq!(majority(std::iter::empty(), 3), None);
    }
}
