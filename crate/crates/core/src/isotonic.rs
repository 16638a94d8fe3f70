//! Weighted isotonic regression by pool-adjacent-violators.

/// Least-squares non-decreasing fit of `values` under positive `weights`.
///
/// Runs the stack form of PAVA: each incoming point opens a block, and the
/// top two blocks are pooled while their means are out of order.
pub fn isotonic_fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "values and weights differ in length");
    // (weighted sum, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v * w, w, 1usize);
        while let Some(&(s, tw, n)) = blocks.last() {
            if s / tw > cur.0 / cur.1 {
                blocks.pop();
                cur = (s + cur.0, tw + cur.1, n + cur.2);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, w, n) in blocks {
        out.extend(std::iter::repeat_n(s / w, n));
    }
    out
}

/// Unweighted isotonic projection in place. Returns `true` if anything changed.
pub fn project_monotone(values: &mut [f64]) -> bool {
    if values.windows(2).all(|w| w[0] <= w[1]) {
        return false;
    }
    let fitted = isotonic_fit(values, &vec![1.0; values.len()]);
    values.copy_from_slice(&fitted);
    true
}
