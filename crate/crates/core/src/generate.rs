//! Seeded random instance families. Generation is fully deterministic: the
//! generator is xoshiro256** seeded through splitmix64, implemented here so
//! identical (seed, spec) inputs produce identical file bytes regardless of
//! external crate versions.

use crate::error::{Error, Result};
use crate::game::{GameInstance, MaxAction, MinAction, PayoffMode, StateActions};

/// splitmix64 stream, used only to expand the seed.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
}

/// xoshiro256** reference algorithm.
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64(seed);
        Xoshiro256StarStar {
            s: [sm.next(), sm.next(), sm.next(), sm.next()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in 1..=k.
    pub fn next_size(&mut self, k: usize) -> usize {
        1 + (self.next_u64() % k as u64) as usize
    }
}

/// Which hypothesis class to instantiate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    /// Discounted, every kernel row sum at most lambda (uniform contraction).
    SubstochasticCap { lambda: f64 },
    /// Discounted with state-dependent discount, some rows may sum above 1;
    /// a positive vector certifies every pair matrix has radius <= rho_cap.
    StateDependentDiscount { rho_cap: f64 },
    /// Mean payoff, every row carries mass at least p_min on the renewal
    /// column c, forcing worst-case return times <= 1/p_min.
    RenewalMean { c: usize, p_min: f64 },
}

#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub n: usize,
    pub a_max: usize,
    pub b_max: usize,
    pub seed: u64,
    pub family: FamilyKind,
}

impl GeneratorSpec {
    fn check(&self) -> Result<()> {
        if self.n == 0 || self.a_max == 0 || self.b_max == 0 {
            return Err(Error::DomainError(
                "n, a_max, b_max must be positive".into(),
            ));
        }
        match self.family {
            FamilyKind::SubstochasticCap { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::DomainError(format!(
                        "lambda = {lambda} outside (0,1)"
                    )));
                }
            }
            FamilyKind::StateDependentDiscount { rho_cap } => {
                if !(rho_cap > 0.0 && rho_cap < 1.0) {
                    return Err(Error::DomainError(format!(
                        "rho_cap = {rho_cap} outside (0,1)"
                    )));
                }
            }
            FamilyKind::RenewalMean { c, p_min } => {
                if !(p_min > 0.0 && p_min <= 1.0) {
                    return Err(Error::DomainError(format!("p_min = {p_min} outside (0,1]")));
                }
                if c >= self.n {
                    return Err(Error::DomainError(format!(
                        "renewal state {} outside 1..={}",
                        c + 1,
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

fn raw_positive_row(rng: &mut Xoshiro256StarStar, n: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
    if row.iter().all(|&x| x == 0.0) {
        row[0] = 1.0;
    }
    row
}

/// Deterministic instance construction for a generator spec.
pub fn generate(spec: &GeneratorSpec) -> Result<GameInstance> {
    spec.check()?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    let n = spec.n;
    let a_counts: Vec<usize> = (0..n).map(|_| rng.next_size(spec.a_max)).collect();
    let b_counts: Vec<usize> = (0..n).map(|_| rng.next_size(spec.b_max)).collect();

    // weights for the radius certificate of the state-dependent family
    let psi: Vec<f64> = (0..n).map(|_| 0.5 + 1.5 * rng.next_f64()).collect();

    let payoff = match spec.family {
        FamilyKind::RenewalMean { .. } => PayoffMode::MeanPayoff,
        _ => PayoffMode::Discounted,
    };

    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        let mut min_actions = Vec::with_capacity(a_counts[i]);
        for a in 0..a_counts[i] {
            let mut max_actions = Vec::with_capacity(b_counts[i]);
            for b in 0..b_counts[i] {
                let reward = 2.0 * rng.next_f64() - 1.0;
                let raw = raw_positive_row(&mut rng, n);
                let row = match spec.family {
                    FamilyKind::SubstochasticCap { lambda } => {
                        let target = lambda * (0.5 + 0.5 * rng.next_f64());
                        let sum: f64 = raw.iter().sum();
                        raw.iter().map(|x| x * target / sum).collect()
                    }
                    FamilyKind::StateDependentDiscount { rho_cap } => {
                        // scale so that row · psi = rho_cap * slack * psi_i,
                        // which bounds every pair matrix radius by rho_cap
                        let target = rho_cap * (0.7 + 0.3 * rng.next_f64()) * psi[i];
                        let weighted: f64 = raw.iter().zip(&psi).map(|(x, p)| x * p).sum();
                        raw.iter().map(|x| x * target / weighted).collect()
                    }
                    FamilyKind::RenewalMean { c, p_min } => {
                        let sum: f64 = raw.iter().sum();
                        let mut row: Vec<f64> =
                            raw.iter().map(|x| (1.0 - p_min) * x / sum).collect();
                        row[c] += p_min;
                        row
                    }
                };
                max_actions.push(MaxAction {
                    name: format!("b{}", b + 1),
                    reward,
                    row,
                });
            }
            min_actions.push(MinAction {
                name: format!("a{}", a + 1),
                max_actions,
            });
        }
        states.push(StateActions { min_actions });
    }
    Ok(GameInstance { n, payoff, states })
}
