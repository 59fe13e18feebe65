//! Weighted isotonic regression by pool-adjacent-violators.

/// Minimises `Σ wᵢ (xᵢ − yᵢ)²` over weakly decreasing `x`, in place.
///
/// # Panics
/// If `weights` has a different length from `values`.
pub fn decreasing_fit(values: &mut [f64], weights: &[f64]) {
    assert_eq!(values.len(), weights.len(), "one weight per value");
    // Blocks of (mean, weight, length).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        let mut cur = (y, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m >= cur.0 {
                break;
            }
            let total = bw + cur.1;
            let mean = if total > 0.0 {
                (m * bw + cur.0 * cur.1) / total
            } else {
                0.5 * (m + cur.0)
            };
            cur = (mean, total, len + cur.2);
            blocks.pop();
        }
        blocks.push(cur);
    }
    let mut i = 0;
    for (m, _, len) in blocks {
        values[i..i + len].iter_mut().for_each(|v| *v = m);
        i += len;
    }
}

/// Projection onto `{x : x₀ ≥ x₁ ≥ … , lower ≤ xᵢ ≤ upper}` in the weighted
/// norm: isotonic fit followed by clipping.
pub fn project_decreasing_box(values: &mut [f64], weights: &[f64], lower: f64, upper: f64) {
    decreasing_fit(values, weights);
    values.iter_mut().for_each(|v| *v = v.clamp(lower, upper));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pools_violators() {
        let mut v = vec![3.0, 1.0, 2.0, 0.0];
        decreasing_fit(&mut v, &[1.0; 4]);
        assert_eq!(v, vec![3.0, 1.5, 1.5, 0.0]);
        let mut w = vec![1.0, 2.0];
        decreasing_fit(&mut w, &[3.0, 1.0]);
        assert_eq!(w, vec![1.25, 1.25]);
    }

    proptest! {
        #[test]
        fn output_is_decreasing_and_optimal_against_perturbation(
            ys in prop::collection::vec(-5.0f64..5.0, 1..40),
            seed in 0u64..1000,
        ) {
            let ws: Vec<f64> = ys.iter().enumerate()
                .map(|(i, _)| 0.5 + ((i as u64 * 7919 + seed) % 13) as f64 / 6.0)
                .collect();
            let mut x = ys.clone();
            decreasing_fit(&mut x, &ws);
            for w in x.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            // Block means preserve the weighted sum.
            let a: f64 = x.iter().zip(&ws).map(|(x, w)| x * w).sum();
            let b: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum();
            prop_assert!((a - b).abs() < 1e-9);
            // Any decreasing candidate (e.g. a constant) is no closer.
            let obj = |z: &[f64]| z.iter().zip(&ys).zip(&ws).map(|((z, y), w)| w * (z - y).powi(2)).sum::<f64>();
            let c = b / ws.iter().sum::<f64>();
            prop_assert!(obj(&x) <= obj(&vec![c; ys.len()]) + 1e-9);
        }
    }
}
