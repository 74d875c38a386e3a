use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Partition};

/// Lloyd iterations run after seeding.
pub const LLOYD_ITERATIONS: usize = 10;

/// K-means partition with farthest-point seeding.
///
/// The first center is a data point drawn with `seed`; every further
/// center is the point farthest from the centers chosen so far.
pub fn kmeans_partition(data: &Dataset, g: usize, seed: u64) -> Partition {
    let n = data.n();
    let rows: Vec<DVector<f64>> = (0..n).map(|i| data.values().row(i).transpose()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(g);
    centers.push(rows[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = rows.iter().map(|r| (r - &centers[0]).norm_squared()).collect();
    while centers.len() < g {
        let far = argmax(&nearest);
        let c = rows[far].clone();
        for (d, r) in nearest.iter_mut().zip(&rows) {
            *d = d.min((r - &c).norm_squared());
        }
        centers.push(c);
    }

    let mut labels = assign(&rows, &centers);
    for _ in 0..LLOYD_ITERATIONS {
        let p = data.p();
        let mut sums = vec![DVector::zeros(p); g];
        let mut counts = vec![0usize; g];
        for (r, &l) in rows.iter().zip(&labels) {
            sums[l] += r;
            counts[l] += 1;
        }
        for k in 0..g {
            if counts[k] > 0 {
                centers[k] = &sums[k] / counts[k] as f64;
            }
        }
        let next = assign(&rows, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    fill_empty(&rows, &centers, &mut labels, g);
    Partition::new(labels, g).expect("labels lie in 0..g")
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn assign(rows: &[DVector<f64>], centers: &[DVector<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|r| {
            let d: Vec<f64> = centers.iter().map(|c| -(r - c).norm_squared()).collect();
            argmax(&d)
        })
        .collect()
}

/// Moves the worst-fitting points into any cluster left empty.
fn fill_empty(rows: &[DVector<f64>], centers: &[DVector<f64>], labels: &mut [usize], g: usize) {
    loop {
        let mut counts = vec![0usize; g];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let dist: Vec<f64> = rows
            .iter()
            .zip(labels.iter())
            .map(|(r, &l)| if counts[l] > 1 { (r - &centers[l]).norm_squared() } else { -1.0 })
            .collect();
        let worst = argmax(&dist);
        if dist[worst] < 0.0 {
            return;
        }
        labels[worst] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_groups() {
        let mut rows = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64 * 0.1, 0.0]);
            rows.push(vec![50.0 + i as f64 * 0.1, 0.0]);
        }
        let d = Dataset::from_rows(&rows).unwrap();
        let part = kmeans_partition(&d, 2, 3);
        let a = part.assignments();
        for i in 0..10 {
            assert_eq!(a[2 * i], a[0]);
            assert_eq!(a[2 * i + 1], a[1]);
        }
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn deterministic_and_nonempty() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i * 3 % 5) as f64]).collect();
        let d = Dataset::from_rows(&rows).unwrap();
        for g in 1..=6 {
            let a = kmeans_partition(&d, g, 42);
            assert_eq!(a, kmeans_partition(&d, g, 42));
            let mut counts = vec![0; g];
            a.assignments().iter().for_each(|&l| counts[l] += 1);
            assert!(counts.iter().all(|&c| c > 0));
        }
    }
}
