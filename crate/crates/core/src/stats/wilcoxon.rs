use alloc::vec;
use alloc::vec::Vec;

/// Doubled midranks of `|d|` for the nonzero deltas, in input order. Doubling
/// keeps tied ranks integral.
pub(crate) fn doubled_midranks(nonzero: &[f64]) -> Vec<u64> {
    let n = nonzero.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| libm::fabs(nonzero[a]).total_cmp(&libm::fabs(nonzero[b])));
    let mut ranks = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && libm::fabs(nonzero[order[j]]) == libm::fabs(nonzero[order[i]]) {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j; their doubled mean is i+1+j
        for &k in &order[i..j] {
            ranks[k] = (i + 1 + j) as u64;
        }
        i = j;
    }
    ranks
}

/// Exact two-sided Wilcoxon signed-rank p-value.
///
/// Zero deltas are dropped. Tied magnitudes share midranks. The null
/// distribution of the positive rank sum is counted over all 2ⁿ sign
/// assignments, and `p = min(1, 2·min(P(W⁺ ≤ w), P(W⁺ ≥ w)))`. With no
/// nonzero delta the result is 1.
pub fn wilcoxon_exact(deltas: &[f64]) -> f64 {
    let nonzero: Vec<f64> = deltas.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return 1.0;
    }
    let ranks = doubled_midranks(&nonzero);
    let w: u64 = ranks.iter().zip(&nonzero).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total: u64 = ranks.iter().sum();
    let n = ranks.len();

    let (below, above, all) = if n <= 62 {
        let mut counts = vec![0u64; total as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let below: u64 = counts[..=w as usize].iter().sum();
        let above: u64 = counts[w as usize..].iter().sum();
        (below as f64, above as f64, (1u64 << n) as f64)
    } else {
        let mut prob = vec![0.0f64; total as usize + 1];
        prob[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                let half = 0.5 * prob[s];
                prob[s] = half;
                prob[s + r] += half;
            }
            reach += r;
        }
        let below: f64 = prob[..=w as usize].iter().sum();
        let above: f64 = prob[w as usize..].iter().sum();
        (below, above, 1.0)
    };
    (2.0 * below.min(above) / all).min(1.0)
}
