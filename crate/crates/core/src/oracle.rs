//! Brute-force reference functions for the case studies.
//!
//! These loop over candidates directly and share no code with the
//! interpreter or the predicate evaluator.

/// Smallest `x ≥ 0` with `x² ≥ n`.
pub fn isqrt_ceil(n: u64) -> u64 {
    let mut x = 0;
    while x * x < n {
        x += 1;
    }
    x
}

/// Largest `x ≥ 0` with `x² ≤ n`.
pub fn isqrt_floor(n: u64) -> u64 {
    let mut x = 0;
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn perfect_square(n: u64) -> bool {
    (0..=n).take_while(|k| k * k <= n).any(|k| k * k == n)
}

/// Smallest `x ≤ bound` whose square exceeds `n` by a perfect square.
pub fn mu(n: u64, bound: u64) -> Option<u64> {
    (0..=bound).find(|&x| x * x >= n && perfect_square(x * x - n))
}

/// `n` is a difference of two squares `x² − y²` with `0 ≤ y ≤ x ≤ bound`.
pub fn difference_of_squares(n: u64, bound: u64) -> bool {
    (0..=bound).any(|x| x * x >= n && perfect_square(x * x - n))
}
