//! Initial designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::trust::Domain;

/// Latin hypercube sample of `n` points in the domain box: each coordinate's
/// range is cut into `n` equal strata and every stratum holds exactly one
/// point, placed uniformly inside it.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, dom: &Domain, rng: &mut R) -> Vec<Vec<f64>> {
    let d = dom.dim();
    let mut points = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let (lo, hi) = (dom.lower()[j], dom.upper()[j]);
        for (point, s) in points.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            point[j] = (lo + u * (hi - lo)).clamp(lo, hi);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_point_per_stratum() {
        let dom = Domain::new(vec![-4.0, 0.0, 10.0], vec![4.0, 1.0, 20.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 12;
        let pts = latin_hypercube(n, &dom, &mut rng);
        assert_eq!(pts.len(), n);
        for j in 0..3 {
            let (lo, hi) = (dom.lower()[j], dom.upper()[j]);
            let mut seen = vec![false; n];
            for p in &pts {
                assert!(p[j] >= lo && p[j] <= hi);
                let s = (((p[j] - lo) / (hi - lo)) * n as f64)
                    .floor()
                    .min(n as f64 - 1.0) as usize;
                assert!(!seen[s], "stratum {s} hit twice in coordinate {j}");
                seen[s] = true;
            }
        }
    }

    #[test]
    fn seeded_design_is_reproducible() {
        let dom = Domain::cube(0.0, 1.0, 4).unwrap();
        let a = latin_hypercube(10, &dom, &mut ChaCha8Rng::seed_from_u64(3));
        let b = latin_hypercube(10, &dom, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
