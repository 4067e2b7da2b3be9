//! Catalog of `N` ranked contents with Zipf popularity. Only ranks are
//! tracked: an update removes a uniformly chosen content and appends a new one
//! at rank `N`, so the pushed set is always the popularity head.

use crate::error::{invalid, Result};

/// Zipf popularity `f_i = i^-v / sum_j j^-v`, `i = 1..=n`.
pub fn zipf_popularity(n: usize, skew: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("catalog size", "must be >= 1"));
    }
    if !(skew >= 0.0) || !skew.is_finite() {
        return Err(invalid("zipf skew", "must be finite and >= 0"));
    }
    let weights = zipf_weights(n, skew);
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

fn zipf_weights(n: usize, skew: f64) -> Vec<f64> {
    (1..=n).map(|i| (i as f64).powf(-skew)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    size: usize,
    skew: f64,
    update_prob: f64,
    popularity: Vec<f64>,
    /// `head[c] = sum_{i <= c} f_i`, `c = 0..=N`.
    head: Vec<f64>,
    /// `tail[c] = sum_{i > c} f_i`, summed from the small end.
    tail: Vec<f64>,
}

impl Catalog {
    pub fn new(size: usize, skew: f64, update_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&update_prob) {
            return Err(invalid("update probability", "must lie in [0, 1]"));
        }
        let popularity = zipf_popularity(size, skew)?;
        let weights = zipf_weights(size, skew);
        let total: f64 = weights.iter().sum();

        let mut head = Vec::with_capacity(size + 1);
        let mut acc = 0.0;
        head.push(0.0);
        for w in &weights {
            acc += w;
            head.push(acc / total);
        }
        head[size] = 1.0;

        let mut tail = vec![0.0; size + 1];
        let mut acc = 0.0;
        for c in (0..size).rev() {
            acc += weights[c];
            tail[c] = acc / total;
        }
        tail[0] = 1.0;

        Ok(Self {
            size,
            skew,
            update_prob,
            popularity,
            head,
            tail,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    /// Per-slot probability that one content is replaced.
    pub fn update_prob(&self) -> f64 {
        self.update_prob
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    /// Popularity of rank `i` (1-based); zero beyond the catalog.
    pub fn rank_prob(&self, rank: usize) -> f64 {
        if rank == 0 || rank > self.size {
            0.0
        } else {
            self.popularity[rank - 1]
        }
    }

    /// `sum_{i=1..=count} f_i`. Panics if `count > N`; use [`head_mass`] for a checked version.
    pub fn head(&self, count: usize) -> f64 {
        self.head[count]
    }

    /// `sum_{i > count} f_i`, i.e. `1 - head(count)` without cancellation.
    pub fn tail(&self, count: usize) -> f64 {
        if count >= self.size {
            0.0
        } else {
            self.tail[count]
        }
    }

    /// `sum_j j^-v` (the Zipf normalizer).
    pub fn normalizer(&self) -> f64 {
        zipf_weights(self.size, self.skew).iter().sum()
    }
}

/// Total popularity of the `count` most popular contents.
pub fn head_mass(catalog: &Catalog, count: usize) -> Result<f64> {
    if count > catalog.size() {
        return Err(invalid(
            "head count",
            format!("{count} exceeds catalog size {}", catalog.size()),
        ));
    }
    Ok(catalog.head(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn harmonic(n: usize) -> f64 {
        (1..=n).map(|i| 1.0 / i as f64).sum()
    }

    #[test]
    fn uniform_at_zero_skew() {
        let f = zipf_popularity(4, 0.0).unwrap();
        for p in f {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn four_contents_unit_skew() {
        let f = zipf_popularity(4, 1.0).unwrap();
        for (p, e) in f.iter().zip([0.48, 0.24, 0.16, 0.12]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn twenty_contents_unit_skew() {
        let h20 = harmonic(20);
        assert!((h20 - 3.597740).abs() < 1e-6);
        let f = zipf_popularity(20, 1.0).unwrap();
        assert!((f[0] - 1.0 / h20).abs() < 1e-15);
        assert!((f[0] - 0.277953).abs() < 1e-6);
    }

    #[test]
    fn rejects_empty_catalog() {
        assert!(zipf_popularity(0, 1.0).is_err());
        assert!(Catalog::new(0, 1.0, 0.1).is_err());
        assert!(Catalog::new(5, 1.0, 1.5).is_err());
    }

    #[test]
    fn head_mass_values() {
        let cat = Catalog::new(20, 1.0, 0.2).unwrap();
        assert_eq!(head_mass(&cat, 0).unwrap(), 0.0);
        assert_eq!(head_mass(&cat, 20).unwrap(), 1.0);
        let h = head_mass(&cat, 10).unwrap();
        assert!((h - harmonic(10) / harmonic(20)).abs() < 1e-14);
        assert!((h - 0.814113).abs() < 1e-6);
        assert!(head_mass(&cat, 21).is_err());
    }

    proptest! {
        #[test]
        fn popularity_is_normalized_and_decreasing(n in 1usize..60, v in 0.0f64..3.0) {
            let f = zipf_popularity(n, v).unwrap();
            let s: f64 = f.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let norm: f64 = (1..=n).map(|j| (j as f64).powf(-v)).sum();
            for (i, p) in f.iter().enumerate() {
                prop_assert!((p - ((i + 1) as f64).powf(-v) / norm).abs() < 1e-12);
            }
            for w in f.windows(2) {
                if v > 0.0 {
                    prop_assert!(w[1] < w[0]);
                } else {
                    prop_assert!((w[1] - w[0]).abs() < 1e-15);
                }
            }
        }

        #[test]
        fn head_and_tail_are_complementary(n in 1usize..60, v in 0.0f64..3.0) {
            let cat = Catalog::new(n, v, 0.3).unwrap();
            let mut prev_inc = f64::INFINITY;
            for c in 0..=n {
                prop_assert!((cat.head(c) + cat.tail(c) - 1.0).abs() < 1e-12);
                if c > 0 {
                    let inc = cat.head(c) - cat.head(c - 1);
                    prop_assert!(inc >= -1e-15);
                    prop_assert!(inc <= prev_inc + 1e-12);
                    prev_inc = inc;
                }
            }
        }
    }
}
