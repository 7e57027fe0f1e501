//! Binomial coefficients and the colexicographic combinatorial number
//! system.
//!
//! Combinations are 0-based, strictly increasing `c_0 < c_1 < ... < c_{k-1}`
//! with colex rank `sum_i C(c_i, i + 1)`. In colex order every combination
//! with largest element below `n` precedes every other, so the first
//! `C(n, k)` ranks are exactly the combinations of `{0, .., n-1}`.

/// `C(n, k)`, or `None` on `u128` overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc = C(n, i), and C(n, i) * (n - i) = C(n, i + 1) * (i + 1)
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

/// `C(n, k)` that panics on overflow; callers bound `n` and `k` first.
pub fn choose(n: u64, k: u64) -> u128 {
    binomial(n, k).expect("binomial coefficient overflows u128")
}

pub fn factorial(k: u64) -> Option<u128> {
    (1..=k as u128).try_fold(1u128, |acc, i| acc.checked_mul(i))
}

/// `k! * count / n^k` as a float, the normalization of an index-tuple count.
///
/// Numerator and denominator are formed exactly in `u128` when possible, so
/// equal counts always give bit-identical values.
pub fn normalized_count(count: u128, n: u64, k: u32) -> f64 {
    let exact = factorial(k as u64).and_then(|f| f.checked_mul(count)).zip((n as u128).checked_pow(k));
    match exact {
        Some((num, den)) => num as f64 / den as f64,
        None => {
            let f: f64 = (1..=k).map(f64::from).product();
            f * count as f64 / (n as f64).powi(k as i32)
        }
    }
}

/// Combination with colex rank `rank` among `k`-subsets of the naturals.
pub fn colex_unrank(mut rank: u128, k: usize) -> Vec<u64> {
    let mut out = vec![0u64; k];
    for i in (1..=k).rev() {
        // largest c with C(c, i) <= rank
        let mut lo = (i - 1) as u64;
        let mut hi = lo + 1;
        while binomial(hi, i as u64).is_some_and(|v| v <= rank) {
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if binomial(mid, i as u64).is_some_and(|v| v <= rank) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rank -= choose(lo, i as u64);
        out[i - 1] = lo;
    }
    out
}

pub fn colex_rank(c: &[u64]) -> u128 {
    c.iter().enumerate().map(|(i, &ci)| choose(ci, i as u64 + 1)).sum()
}

/// Advances `c` to its colex successor.
#[inline]
pub fn colex_next(c: &mut [u64]) {
    let k = c.len();
    let mut j = 0;
    while j + 1 < k && c[j] + 1 == c[j + 1] {
        j += 1;
    }
    c[j] += 1;
    for (i, ci) in c.iter_mut().enumerate().take(j) {
        *ci = i as u64;
    }
}
