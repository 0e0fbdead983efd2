//! The randomized exploration schedule.
//!
//! `χ_i ~ Bernoulli(1/i)` independently; a success at `i` starts a burst
//! covering `[i, i + b(i)]` with `b(i) = floor(log2 i)`, and `χ̄` is the union
//! of all bursts. `ψ` supplies the uniformly random actions played during
//! bursts. Both streams are materialized lazily from one seed, on separate
//! ChaCha streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Action;

const CHI_STREAM: u64 = 0;
const PSI_STREAM: u64 = 1;

/// `b(i) = floor(log2 i)`; the burst started at `i` has `b(i) + 1` steps.
pub fn burst_length(i: u64) -> u64 {
    assert!(i >= 1, "schedule indices are 1-based");
    63 - u64::from(i.leading_zeros())
}

/// Smallest `i` with `b(i) + 1 > h`: every burst started at or after it
/// covers a whole lookahead window of `h + 1` steps.
pub fn burst_threshold(h: u64) -> u64 {
    1u64.checked_shl(h as u32).unwrap_or(u64::MAX)
}

/// `h = ceil(ln(ε/4) / ln γ)`, the fixed lookahead used with geometric
/// discounting.
pub fn geometric_lookahead(eps: f64, gamma: f64) -> u64 {
    assert!(eps > 0.0 && eps < 1.0 && gamma > 0.0 && gamma < 1.0);
    ((eps / 4.0).ln() / gamma.ln()).ceil() as u64
}

#[derive(Debug, Clone)]
pub struct ExplorationSchedule {
    seed: u64,
    actions: usize,
    chi_rng: ChaCha8Rng,
    psi_rng: ChaCha8Rng,
    // index 0 holds step 1
    chi: Vec<bool>,
    chi_bar: Vec<bool>,
    psi: Vec<Action>,
    // max of i + b(i) over materialized i with χ_i = 1
    reach: u64,
}

impl ExplorationSchedule {
    pub fn new(seed: u64, actions: usize) -> Self {
        assert!(actions >= 1 && actions <= 256, "action alphabet size");
        let mut chi_rng = ChaCha8Rng::seed_from_u64(seed);
        chi_rng.set_stream(CHI_STREAM);
        let mut psi_rng = ChaCha8Rng::seed_from_u64(seed);
        psi_rng.set_stream(PSI_STREAM);
        ExplorationSchedule {
            seed,
            actions,
            chi_rng,
            psi_rng,
            chi: Vec::new(),
            chi_bar: Vec::new(),
            psi: Vec::new(),
            reach: 0,
        }
    }

    /// A schedule with its prefix materialized through `n`.
    pub fn sample(seed: u64, actions: usize, n: u64) -> Self {
        let mut s = Self::new(seed, actions);
        s.ensure(n);
        s
    }

    /// A schedule whose first `chi.len()` bits of `χ` are forced; later
    /// bits, and all of `ψ`, are sampled from `seed`.
    pub fn with_chi_prefix(seed: u64, actions: usize, chi: &[bool]) -> Self {
        let mut s = Self::new(seed, actions);
        for &bit in chi {
            s.push(Some(bit));
        }
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> u64 {
        self.chi.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    // A forced bit still consumes its draw so later bits match the unforced
    // schedule with the same seed.
    fn push(&mut self, forced: Option<bool>) {
        let i = self.len() + 1;
        let drawn = self.chi_rng.gen_range(0..i) == 0;
        let bit = forced.unwrap_or(drawn);
        if bit {
            self.reach = self.reach.max(i + burst_length(i));
        }
        self.chi.push(bit);
        self.chi_bar.push(self.reach >= i);
        self.psi.push(Action(self.psi_rng.gen_range(0..self.actions) as u8));
    }

    /// Materializes the prefix through step `n`.
    pub fn ensure(&mut self, n: u64) {
        while self.len() < n {
            self.push(None);
        }
    }

    fn at<T: Copy>(&mut self, bits: fn(&Self) -> &Vec<T>, k: u64) -> T {
        assert!(k >= 1, "schedule indices are 1-based");
        self.ensure(k);
        bits(self)[(k - 1) as usize]
    }

    pub fn chi(&mut self, k: u64) -> bool {
        self.at(|s| &s.chi, k)
    }

    /// Whether step `k` lies inside an exploration burst.
    pub fn chi_bar(&mut self, k: u64) -> bool {
        self.at(|s| &s.chi_bar, k)
    }

    pub fn psi(&mut self, k: u64) -> Action {
        self.at(|s| &s.psi, k)
    }

    /// `χ̇^h_k`: 1 iff some step of `[k, k + h]` is inside a burst.
    pub fn dot_chi(&mut self, h: u64, k: u64) -> bool {
        assert!(k >= 1, "schedule indices are 1-based");
        self.ensure(k + h);
        self.chi_bar[(k - 1) as usize..(k + h) as usize].iter().any(|&b| b)
    }

    /// Number of `k ≤ n` with `χ̇^h_k = 1`.
    pub fn dot_chi_count(&mut self, h: u64, n: u64) -> u64 {
        self.ensure(n + h);
        let mut count = 0;
        // steps to the next burst step at or after k, scanning backwards
        let mut next: Option<u64> = None;
        for k in (1..=n + h).rev() {
            if self.chi_bar[(k - 1) as usize] {
                next = Some(k);
            }
            if k <= n && next.is_some_and(|j| j <= k + h) {
                count += 1;
            }
        }
        count
    }

    /// Number of `i ≤ n` with `χ_i = 1`.
    pub fn chi_count(&mut self, n: u64) -> u64 {
        self.ensure(n);
        self.chi[..n as usize].iter().filter(|&&b| b).count() as u64
    }
}
