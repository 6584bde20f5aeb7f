//! The 64-bit linear congruential generator used for every seeded draw in
//! the toolkit (synthetic data, corruption, dataset shuffles).
//!
//! The recurrence and output function are fixed so fixtures are identical
//! across platforms and across implementations in other languages:
//! `state' = state * 6364136223846793005 + 1442695040888963407 (mod 2^64)`,
//! output is the top 32 bits of the new state.

const MULTIPLIER: u64 = 6364136223846793005;
const INCREMENT: u64 = 1442695040888963407;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg { state: seed }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        (self.state >> 32) as u32
    }

    /// Uniform in `[0, 1)` with 32 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        self.next_u32() as f64 / 4_294_967_296.0
    }

    /// Uniform integer in the inclusive range `[lo, hi]` (multiply-shift).
    pub fn range_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + ((self.next_u32() as u64 * span) >> 32) as u32
    }

    /// Uniform index in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u32() as u64 * n as u64) >> 32) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_outputs_follow_the_recurrence() {
        let mut rng = Lcg::new(0);
        // state_1 = INCREMENT, state_2 = INCREMENT * MULTIPLIER + INCREMENT
        assert_eq!(rng.next_u32(), (INCREMENT >> 32) as u32);
        let s2 = INCREMENT.wrapping_mul(MULTIPLIER).wrapping_add(INCREMENT);
        assert_eq!(rng.next_u32(), (s2 >> 32) as u32);
    }

    #[test]
    fn ranges_stay_in_bounds() {
        let mut rng = Lcg::new(42);
        for _ in 0..10_000 {
            let v = rng.range_inclusive(20, 30);
            assert!((20..=30).contains(&v));
            let f = rng.next_f64();
            assert!((0.0..1.0).contains(&f));
        }
        assert_eq!(rng.range_inclusive(5, 5), 5);
    }

    #[test]
    fn shuffle_is_a_permutation_and_deterministic() {
        let mut a: Vec<u32> = (0..50).collect();
        let mut b = a.clone();
        Lcg::new(9).shuffle(&mut a);
        Lcg::new(9).shuffle(&mut b);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }
}
