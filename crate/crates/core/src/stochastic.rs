//! Reproducible Brownian driving paths.
//!
//! Increments come from a counter-based generator: each (seed, step) pair is
//! hashed to a uniform and mapped through the inverse normal CDF, so paths
//! are bitwise reproducible on any platform and distinct Monte Carlo samples
//! need no stream coordination. A path is always generated at its finest
//! resolution; coarser views re-sum the same fine increments, which makes
//! coupled time-refinement comparisons exact.

use std::sync::Arc;

use crate::error::{Result, SgpeError};

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic uniform in the open interval (0, 1) for a (key, counter)
/// pair.
pub fn counter_uniform(seed: u64, index: u64) -> f64 {
    let v = mix(
        seed.wrapping_mul(GOLDEN)
            .wrapping_add(mix(index.wrapping_add(GOLDEN))),
    );
    ((v >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Standard normal deviate for a (key, counter) pair via the inverse CDF.
pub fn counter_normal(seed: u64, index: u64) -> f64 {
    inverse_normal_cdf(counter_uniform(seed, index))
}

/// Derives an independent stream key, e.g. per Monte Carlo sample.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_mul(GOLDEN).wrapping_add(1)))
}

fn horner(r: f64, ascending: &[f64]) -> f64 {
    ascending.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

/// Wichura's percentage-point function for the standard normal (AS 241,
/// double precision). Accurate to about one ulp away from the extreme tails.
fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946_1e4,
        4.592_195_393_154_987_1e4,
        6.726_577_092_700_870_1e4,
        3.343_057_558_358_812_8e4,
        2.509_080_928_730_122_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091e1,
        6.871_870_074_920_579e2,
        5.394_196_021_424_751e3,
        2.121_379_430_158_659_6e4,
        3.930_789_580_009_271e4,
        2.872_908_573_572_194_3e4,
        5.226_495_278_852_854_6e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_5,
        4.630_337_846_156_546,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        2.417_807_251_774_506e-1,
        2.272_384_498_926_918_4e-2,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_9,
        1.676_384_830_183_803_8,
        6.897_673_349_851e-1,
        1.481_039_764_274_800_8e-1,
        1.519_866_656_361_645_7e-2,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_9e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
        1.242_660_947_388_078_4e-3,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_88e-1,
        1.369_298_809_227_358e-1,
        1.487_536_129_085_061_5e-2,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_8e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(r, &A) / horner(r, &B);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        horner(r, &C) / horner(r, &D)
    } else {
        let r = r - 5.0;
        horner(r, &E) / horner(r, &F)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Seeded Wiener increments over [0, T].
///
/// The fine increments are immutable after generation; coarsened views of
/// the same path share them, so `coarsen(coarsen(p, a), b)` and
/// `coarsen(p, a * b)` produce bitwise-identical increments.
#[derive(Clone, Debug)]
pub struct BrownianPath {
    seed: u64,
    t_horizon: f64,
    dt_fine: f64,
    fine: Arc<Vec<f64>>,
    factor: usize,
    increments: Vec<f64>,
}

impl BrownianPath {
    /// Draws `T / dt_fine` i.i.d. Normal(0, dt_fine) increments keyed by
    /// `seed`.
    pub fn generate(seed: u64, t_horizon: f64, dt_fine: f64) -> Result<Self> {
        if !(t_horizon > 0.0 && t_horizon.is_finite()) || !(dt_fine > 0.0 && dt_fine.is_finite()) {
            return Err(SgpeError::Config(format!(
                "path horizon T = {t_horizon} and step dt = {dt_fine} must be positive"
            )));
        }
        let ratio = t_horizon / dt_fine;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 || n < 1.0 {
            return Err(SgpeError::Config(format!(
                "T / dt_fine = {ratio} is not an integer step count"
            )));
        }
        if n > 1e9 {
            return Err(SgpeError::Config(format!(
                "step count {n} too large to materialize"
            )));
        }
        let n = n as usize;
        let scale = dt_fine.sqrt();
        let fine: Vec<f64> = (0..n)
            .map(|i| scale * counter_normal(seed, i as u64))
            .collect();
        Ok(Self {
            seed,
            t_horizon,
            dt_fine,
            increments: fine.clone(),
            fine: Arc::new(fine),
            factor: 1,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    /// Step size at the current coarsening level.
    pub fn dt(&self) -> f64 {
        self.dt_fine * self.factor as f64
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len()
    }

    /// Wiener increments at the current coarsening level.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Blocks `factor` current-level steps into one. The result is computed
    /// from the underlying fine increments so nested coarsenings associate
    /// exactly.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.increments.len() % factor != 0 {
            return Err(SgpeError::Contract(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.increments.len()
            )));
        }
        let total = self.factor * factor;
        Ok(Self {
            seed: self.seed,
            t_horizon: self.t_horizon,
            dt_fine: self.dt_fine,
            increments: block_sums(&self.fine, total),
            fine: Arc::clone(&self.fine),
            factor: total,
        })
    }

    /// Normalized increments `chi_n = dW_n / sqrt(dt)`: independent standard
    /// normal deviates at the current level.
    pub fn chi_sequence(&self) -> Vec<f64> {
        let scale = 1.0 / self.dt().sqrt();
        self.increments.iter().map(|w| w * scale).collect()
    }

    /// Total displacement over [0, T], compensated summation.
    pub fn total_increment(&self) -> f64 {
        kahan_sum(&self.increments)
    }
}

fn block_sums(fine: &[f64], factor: usize) -> Vec<f64> {
    fine.chunks_exact(factor).map(kahan_sum).collect()
}

fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &x in xs {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// First step index n in [1, N] whose increment `sqrt(dt) |chi_n|` reaches
/// `c0`, or N + 1 when none does. Integrators freeze from this step on.
pub fn stopping_index(chis: &[f64], dt: f64, c0: f64) -> usize {
    let scale = dt.sqrt();
    for (i, &chi) in chis.iter().enumerate() {
        if (scale * chi).abs() >= c0 {
            return i + 1;
        }
    }
    chis.len() + 1
}

/// Fraction of paths whose increment truncation fires before the horizon:
/// empirical estimate of P(tau < N + 1) over `n_paths` seeded paths.
pub fn truncation_event_rate(
    master_seed: u64,
    c0: f64,
    t_horizon: f64,
    n_steps: usize,
    n_paths: usize,
) -> Result<f64> {
    if c0 <= 0.0 {
        return Err(SgpeError::Config(format!(
            "truncation level c0 = {c0} must be positive"
        )));
    }
    if n_steps == 0 || n_paths == 0 {
        return Err(SgpeError::Config(
            "truncation rate needs at least one step and one path".into(),
        ));
    }
    let dt = t_horizon / n_steps as f64;
    let mut events = 0usize;
    for sample in 0..n_paths {
        let seed = derive_seed(master_seed, sample as u64);
        let path = BrownianPath::generate(seed, t_horizon, dt)?;
        if stopping_index(&path.chi_sequence(), dt, c0) <= n_steps {
            events += 1;
        }
    }
    Ok(events as f64 / n_paths as f64)
}
