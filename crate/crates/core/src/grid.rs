//! Checkpoint grids.

/// Distinct values `⌊base^k⌋`, `k = 0, 1, …`, not exceeding `max`.
pub fn geometric_grid(base: f64, max: u64) -> Vec<u64> {
    assert!(base > 1.0, "geometric grid needs base > 1");
    let mut out = Vec::new();
    let mut v = 1.0_f64;
    while v <= max as f64 {
        let n = v.floor() as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        v *= base;
    }
    out
}

/// Geometric grid with `0` prepended and `max` appended.
pub fn checkpoint_grid(base: f64, max: u64) -> Vec<u64> {
    let mut g = vec![0];
    g.extend(geometric_grid(base, max));
    if g.last() != Some(&max) {
        g.push(max);
    }
    g
}
