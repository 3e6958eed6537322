//! Individual labor income during working life, social security after
//! retirement, and the SSI consumption floor.
//!
//! Log earnings are `g(t) + alpha + beta * t + z + eps` with
//! `t = (age - 24) / 10`, a quadratic age profile `g`, an AR(1) persistent
//! state `z` with two-normal mixture innovations, a mixture transitory shock
//! `eps`, and a logistic non-employment probability that depends on `t`
//! and `z`. Levels are scaled to 2024 dollars by one global multiplier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const START_AGE: u32 = 25;
pub const RETIREMENT_AGE: u32 = 65;
pub const WORKING_YEARS: usize = (RETIREMENT_AGE - START_AGE) as usize;

/// SSI minimum consumption for a single person, 2024 USD.
pub const SSI_INDIVIDUAL: f64 = 11_316.0;
/// Additional SSI floor for a spouse, 2024 USD.
pub const SSI_SPOUSE: f64 = 5_664.0;

const CALIBRATION_SEED: u64 = 0x1ABE1;
const CALIBRATION_DRAWS: usize = 200_000;

/// Two-component normal mixture: component 1 with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMixture {
    pub p: f64,
    pub mean: [f64; 2],
    pub std_dev: [f64; 2],
}

impl NormalMixture {
    /// Returns the draw and the component it came from (0 or 1).
    pub fn sample_with_component<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let k = if rng.random::<f64>() < self.p { 0 } else { 1 };
        let n: f64 = StandardNormal.sample(rng);
        (self.mean[k] + self.std_dev[k] * n, k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with_component(rng).0
    }

    pub fn mean(&self) -> f64 {
        self.p * self.mean[0] + (1.0 - self.p) * self.mean[1]
    }

    pub fn variance(&self) -> f64 {
        let second = self.p * (self.std_dev[0].powi(2) + self.mean[0].powi(2))
            + (1.0 - self.p) * (self.std_dev[1].powi(2) + self.mean[1].powi(2));
        second - self.mean().powi(2)
    }
}

/// Parameters of the earnings process. Defaults are the published
/// estimates; `level_scale` converts model units to 2024 dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeModel {
    /// Coefficients of `g(t) = a0 + a1 t + a2 t^2`.
    pub age_profile: [f64; 3],
    pub sigma_alpha: f64,
    pub sigma_beta: f64,
    pub rho_alpha_beta: f64,
    /// AR(1) coefficient of the persistent state.
    pub persistence: f64,
    pub sigma_z0: f64,
    pub persistent_shock: NormalMixture,
    pub transitory_shock: NormalMixture,
    /// Log unemployment duration; the duration is `min(1, exp(.))`.
    pub lambda_gamma: f64,
    /// `(a, b, c, d)` of the logistic index `a + b t + c z + d t z`.
    pub nonemployment: [f64; 4],
    pub level_scale: f64,
}

impl Default for IncomeModel {
    fn default() -> Self {
        IncomeModel {
            age_profile: [2.581, 0.812, -0.185],
            sigma_alpha: 0.3,
            sigma_beta: 0.196,
            rho_alpha_beta: 0.768,
            persistence: 0.959,
            sigma_z0: 0.714,
            persistent_shock: NormalMixture {
                p: 0.407,
                mean: [-0.085, 0.058],
                std_dev: [0.364, 0.069],
            },
            transitory_shock: NormalMixture {
                p: 0.13,
                mean: [0.271, -0.040],
                std_dev: [0.285, 0.037],
            },
            lambda_gamma: 0.0001,
            nonemployment: [-3.036, -0.917, -5.397, -4.442],
            level_scale: 1.0,
        }
    }
}

/// Ex-ante heterogeneity of one individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncomeParams {
    pub alpha: f64,
    pub beta: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IncomePath {
    /// Gross income, 2024 USD, one entry per working year (age 25 first).
    pub income: Vec<f64>,
    pub persistent: Vec<f64>,
    pub transitory: Vec<f64>,
    pub innovation: Vec<f64>,
    /// Unemployment duration as a fraction of the year.
    pub unemployment: Vec<f64>,
}

impl IncomePath {
    pub fn last_income(&self) -> f64 {
        self.income.last().copied().unwrap_or(0.0)
    }
}

/// Normalized age used by the earnings equation.
pub fn normalized_age(age: u32) -> f64 {
    (age as f64 - 24.0) / 10.0
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl IncomeModel {
    /// Model with the level multiplier set so that mean log earnings of
    /// employed 45-year-olds equal `ln(target_usd)`.
    pub fn calibrated(target_usd_at_45: f64) -> Self {
        IncomeModel::default().with_level_target(target_usd_at_45)
    }

    pub fn with_level_target(mut self, target_usd_at_45: f64) -> Self {
        self.level_scale = 1.0;
        let mean = self.employed_log_earnings(45, CALIBRATION_DRAWS);
        self.level_scale = target_usd_at_45 / mean.exp();
        self
    }

    /// Mean log earnings among those employed at `age`, estimated from a
    /// fixed-seed sample of `draws` persistent states. Employment is
    /// selected on `z`, so this sits above the unconditional mean.
    pub fn employed_log_earnings(&self, age: u32, draws: usize) -> f64 {
        let t = normalized_age(age);
        let n = Self::innovations_by(age);
        let mut rng = ChaCha8Rng::seed_from_u64(CALIBRATION_SEED);
        let (mut wsum, mut wz) = (0.0, 0.0);
        for _ in 0..draws {
            let n0: f64 = StandardNormal.sample(&mut rng);
            let mut z = self.sigma_z0 * n0;
            for _ in 0..n {
                z = self.persistence * z + self.persistent_shock.sample(&mut rng);
            }
            let w = 1.0 - self.unemployment_probability(t, z);
            wsum += w;
            wz += w * z;
        }
        self.level_scale.ln() + self.age_profile_at(t) + wz / wsum + self.transitory_shock.mean()
    }

    pub fn age_profile_at(&self, t: f64) -> f64 {
        let [a0, a1, a2] = self.age_profile;
        a0 + a1 * t + a2 * t * t
    }

    /// Analytic mean of latent log earnings at `age` (ignoring
    /// non-employment), including `ln(level_scale)`.
    pub fn expected_log_earnings(&self, age: u32) -> f64 {
        let t = normalized_age(age);
        self.level_scale.ln()
            + self.age_profile_at(t)
            + self.expected_persistent(age)
            + self.transitory_shock.mean()
    }

    /// Number of persistent innovations received by `age`: the state
    /// starts from `z0` before age 25 and updates once per working year.
    fn innovations_by(age: u32) -> i32 {
        (age as i32 - START_AGE as i32 + 1).max(0)
    }

    pub fn expected_persistent(&self, age: u32) -> f64 {
        let n = Self::innovations_by(age);
        let rho = self.persistence;
        (0..n).map(|k| rho.powi(k)).sum::<f64>() * self.persistent_shock.mean()
    }

    /// Analytic variance of the persistent state after `n` innovations.
    pub fn persistent_variance_after(&self, n: i32) -> f64 {
        let rho2 = self.persistence.powi(2);
        rho2.powi(n) * self.sigma_z0.powi(2)
            + (0..n).map(|k| rho2.powi(k)).sum::<f64>() * self.persistent_shock.variance()
    }

    pub fn unemployment_probability(&self, t: f64, z: f64) -> f64 {
        let [a, b, c, d] = self.nonemployment;
        logistic(a + b * t + c * z + d * t * z)
    }

    pub fn unemployment_duration(&self) -> f64 {
        self.lambda_gamma.exp().min(1.0)
    }

    pub fn draw_individual_params<R: Rng + ?Sized>(&self, rng: &mut R) -> IncomeParams {
        let n1: f64 = StandardNormal.sample(rng);
        let n2: f64 = StandardNormal.sample(rng);
        let n3: f64 = StandardNormal.sample(rng);
        let rho = self.rho_alpha_beta;
        IncomeParams {
            alpha: self.sigma_alpha * n1,
            beta: self.sigma_beta * (rho * n1 + (1.0 - rho * rho).sqrt() * n2),
            z0: self.sigma_z0 * n3,
        }
    }

    pub fn simulate_income_path<R: Rng + ?Sized>(
        &self,
        params: &IncomeParams,
        working_years: usize,
        rng: &mut R,
    ) -> IncomePath {
        let mut path = IncomePath {
            income: Vec::with_capacity(working_years),
            persistent: Vec::with_capacity(working_years),
            transitory: Vec::with_capacity(working_years),
            innovation: Vec::with_capacity(working_years),
            unemployment: Vec::with_capacity(working_years),
        };
        let mut z = params.z0;
        for j in 0..working_years {
            let t = normalized_age(START_AGE + j as u32);
            let nu = self.persistent_shock.sample(rng);
            z = self.persistence * z + nu;
            let eps = self.transitory_shock.sample(rng);
            let gamma = if rng.random::<f64>() < self.unemployment_probability(t, z) {
                self.unemployment_duration()
            } else {
                0.0
            };
            let log_y = self.age_profile_at(t) + params.alpha + params.beta * t + z + eps;
            path.income
                .push((1.0 - gamma) * self.level_scale * log_y.exp());
            path.persistent.push(z);
            path.transitory.push(eps);
            path.innovation.push(nu);
            path.unemployment.push(gamma);
        }
        path
    }
}

/// Retirement annuity: a constant fraction of last working-year income.
pub fn social_security(last_income: f64, replacement: f64) -> f64 {
    debug_assert!(replacement > 0.0 && replacement <= 1.0);
    replacement * last_income
}

/// Minimum consumption guaranteed to a renter household of `size` members.
pub fn minimum_consumption(household_size: u32) -> f64 {
    match household_size {
        0 => 0.0,
        n => SSI_INDIVIDUAL + SSI_SPOUSE * (n - 1) as f64,
    }
}

/// SSI transfer that lifts available resources to the consumption floor.
pub fn ssi_topup(available_resources: f64, household_size: u32) -> f64 {
    (minimum_consumption(household_size) - available_resources).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssi_examples() {
        assert_eq!(ssi_topup(5_000.0, 1), 6_316.0);
        assert_eq!(ssi_topup(20_000.0, 2), 0.0);
        assert_eq!(ssi_topup(0.0, 2), 16_980.0);
    }

    #[test]
    fn social_security_examples() {
        assert!((social_security(60_000.0, 0.45) - 27_000.0).abs() < 1e-9);
        assert_eq!(social_security(52_345.0, 1.0), 52_345.0);
        assert_eq!(social_security(0.0, 0.45), 0.0);
    }

    #[test]
    fn unemployment_spell_is_full_year() {
        assert_eq!(IncomeModel::default().unemployment_duration(), 1.0);
    }

    #[test]
    fn degenerate_heterogeneity() {
        let mut m = IncomeModel::default();
        m.sigma_alpha = 0.0;
        m.sigma_beta = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = m.draw_individual_params(&mut rng);
            assert_eq!(p.alpha, 0.0);
            assert_eq!(p.beta, 0.0);
        }
    }

    #[test]
    fn shock_free_path_follows_profile() {
        let mut m = IncomeModel::default();
        let zero = NormalMixture {
            p: 1.0,
            mean: [0.0, 0.0],
            std_dev: [0.0, 0.0],
        };
        m.persistent_shock = zero;
        m.transitory_shock = zero;
        m.nonemployment = [-1e9, 0.0, 0.0, 0.0];
        m.level_scale = 1000.0;
        let params = IncomeParams {
            alpha: 0.1,
            beta: -0.05,
            z0: 0.0,
        };
        let path = m.simulate_income_path(&params, WORKING_YEARS, &mut ChaCha8Rng::seed_from_u64(3));
        for (j, y) in path.income.iter().enumerate() {
            let t = normalized_age(25 + j as u32);
            let expected = 1000.0 * (m.age_profile_at(t) + 0.1 - 0.05 * t).exp();
            assert!((y / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn income_non_negative_and_zero_when_unemployed() {
        let m = IncomeModel::calibrated(70_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let p = m.draw_individual_params(&mut rng);
            let path = m.simulate_income_path(&p, WORKING_YEARS, &mut rng);
            for (y, g) in path.income.iter().zip(&path.unemployment) {
                assert!(*y >= 0.0);
                assert!(*g == 0.0 || (*g > 0.0 && *g <= 1.0));
                if *g == 1.0 {
                    assert_eq!(*y, 0.0);
                }
            }
        }
    }

    #[test]
    fn calibration_hits_target_log_mean() {
        let m = IncomeModel::calibrated(70_000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut sum = 0.0;
        let mut n = 0usize;
        for _ in 0..40_000 {
            let p = m.draw_individual_params(&mut rng);
            let path = m.simulate_income_path(&p, WORKING_YEARS, &mut rng);
            let y = path.income[20];
            if y > 0.0 {
                sum += y.ln();
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!((mean - 70_000f64.ln()).abs() < 0.02, "mean log {mean}");
    }

    #[test]
    fn mixture_moments() {
        let m = IncomeModel::default();
        assert!((m.persistent_shock.mean() - (-0.000201)).abs() < 1e-9);
        assert!((m.persistent_shock.variance() - 0.061684).abs() < 1e-5);
    }
}
