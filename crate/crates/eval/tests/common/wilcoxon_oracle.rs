//! Brute-force signed-rank p-values by enumerating every sign assignment.

/// Average ranks of `|d|` over the non-zero differences, computed by
/// counting rather than sorting.
pub fn ranks(d: &[f64]) -> Vec<(f64, bool)> {
    let nz: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    nz.iter()
        .map(|x| {
            let below = nz.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = nz.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            (below + (equal + 1.0) / 2.0, *x > 0.0)
        })
        .collect()
}

pub struct Enumerated {
    pub w_plus: f64,
    pub two_sided: f64,
    pub greater: f64,
    pub less: f64,
}

/// Enumerates all 2^n sign patterns of the ranks.
pub fn enumerate(d: &[f64]) -> Enumerated {
    let r = ranks(d);
    let n = r.len();
    let w_obs: f64 = r.iter().filter(|(_, p)| *p).map(|(x, _)| x).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i].0).sum();
        if w <= w_obs + 1e-9 {
            le += 1;
        }
        if w >= w_obs - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    let (less, greater) = (le as f64 / total, ge as f64 / total);
    Enumerated { w_plus: w_obs, two_sided: (2.0 * less.min(greater)).min(1.0), greater, less }
}
