//! Lifespans drawn from a period life table.

use std::path::Path;

use rand::Rng;

use crate::error::{Result, SimError};

pub const ENTRY_AGE: u32 = 25;
/// Maximum lifespan; anyone alive at this age dies here.
pub const MAX_AGE: u32 = 100;
pub const TABLE_AGES: usize = 120;

const BUNDLED_TABLE: &str = include_str!("../../../data/life_table_ssa.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    fn parse(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Some(Sex::Male),
            "female" | "f" => Some(Sex::Female),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

/// One-year death probabilities by sex for ages 0..120.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeTable {
    male: Vec<f64>,
    female: Vec<f64>,
}

impl LifeTable {
    /// Table with the same death probability at every age for both sexes.
    pub fn constant(q: f64) -> Self {
        let mut t = LifeTable {
            male: vec![q; TABLE_AGES],
            female: vec![q; TABLE_AGES],
        };
        t.male[TABLE_AGES - 1] = 1.0;
        t.female[TABLE_AGES - 1] = 1.0;
        t
    }

    pub fn bundled() -> Self {
        parse_life_table(BUNDLED_TABLE, "bundled life table").expect("bundled life table is valid")
    }

    pub fn q(&self, sex: Sex, age: u32) -> f64 {
        let v = match sex {
            Sex::Male => &self.male,
            Sex::Female => &self.female,
        };
        v[(age as usize).min(TABLE_AGES - 1)]
    }

    /// Probability that the death age exceeds `age`.
    pub fn survival_through(&self, sex: Sex, age: u32) -> f64 {
        (ENTRY_AGE..=age.min(MAX_AGE))
            .map(|a| 1.0 - self.q(sex, a))
            .product()
    }

    /// Expected death age under [`simulate_lifespan`].
    pub fn expected_death_age(&self, sex: Sex) -> f64 {
        let mut alive = 1.0;
        let mut expectation = 0.0;
        for a in ENTRY_AGE..MAX_AGE {
            let q = self.q(sex, a);
            expectation += alive * q * a as f64;
            alive *= 1.0 - q;
        }
        expectation + alive * MAX_AGE as f64
    }
}

pub fn load_life_table(path: &Path) -> Result<LifeTable> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_life_table(&text, &path.display().to_string())
}

pub fn parse_life_table(text: &str, context: &str) -> Result<LifeTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| SimError::csv(context, e))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SimError::MissingColumn {
                column: name.into(),
                context: context.into(),
            })
    };
    let (c_sex, c_age, c_q) = (col("sex")?, col("age")?, col("death_probability")?);

    let mut male = vec![f64::NAN; TABLE_AGES];
    let mut female = vec![f64::NAN; TABLE_AGES];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SimError::csv(context, e))?;
        let at = || format!("{context} row {}", line + 2);
        let invalid = |field: &str, message: String| SimError::InvalidValue {
            field: field.into(),
            context: at(),
            message,
        };
        let sex = Sex::parse(&rec[c_sex])
            .ok_or_else(|| invalid("sex", format!("unknown sex `{}`", &rec[c_sex])))?;
        let age: usize = rec[c_age]
            .parse()
            .map_err(|_| invalid("age", format!("not an age: `{}`", &rec[c_age])))?;
        let q: f64 = rec[c_q]
            .parse()
            .map_err(|_| invalid("death_probability", format!("not a number: `{}`", &rec[c_q])))?;
        if !(0.0..=1.0).contains(&q) {
            return Err(invalid("death_probability", format!("{q} outside [0, 1]")));
        }
        if age >= TABLE_AGES {
            continue;
        }
        match sex {
            Sex::Male => male[age] = q,
            Sex::Female => female[age] = q,
        }
    }

    for (sex, v) in [(Sex::Male, &mut male), (Sex::Female, &mut female)] {
        for age in ENTRY_AGE..=MAX_AGE {
            if v[age as usize].is_nan() {
                return Err(SimError::MissingAge {
                    sex: sex.name().into(),
                    age,
                });
            }
        }
        // Ages outside the simulated range may be absent; fill them so that
        // lookups stay defined.
        for age in 0..TABLE_AGES {
            if v[age].is_nan() {
                v[age] = if age < ENTRY_AGE as usize { v[ENTRY_AGE as usize] } else { 1.0 };
            }
        }
        v[MAX_AGE as usize] = 1.0;
        v[TABLE_AGES - 1] = 1.0;
    }
    Ok(LifeTable { male, female })
}

/// Age at death for someone alive at the entry age. A person dies at age
/// `a` with probability `q(a)` and at the cap if they survive through 99.
pub fn simulate_lifespan<R: Rng + ?Sized>(sex: Sex, table: &LifeTable, rng: &mut R) -> u32 {
    for age in ENTRY_AGE..MAX_AGE {
        if rng.random::<f64>() < table.q(sex, age) {
            return age;
        }
    }
    MAX_AGE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifespanPair {
    pub death_age_male: u32,
    pub death_age_female: u32,
}

impl LifespanPair {
    pub fn draw<R: Rng + ?Sized, S: Rng + ?Sized>(table: &LifeTable, male_rng: &mut R, female_rng: &mut S) -> Self {
        LifespanPair {
            death_age_male: simulate_lifespan(Sex::Male, table, male_rng),
            death_age_female: simulate_lifespan(Sex::Female, table, female_rng),
        }
    }

    pub fn household_end_age(&self) -> u32 {
        self.death_age_male.max(self.death_age_female)
    }

    /// Number of simulated years; a member is alive through the year in
    /// which they die, and the last simulated age is 99.
    pub fn years(&self) -> usize {
        (self.household_end_age().min(MAX_AGE - 1) - ENTRY_AGE + 1) as usize
    }

    pub fn alive_at(&self, age: u32) -> [bool; 2] {
        [self.death_age_male >= age, self.death_age_female >= age]
    }
}

/// Alive members during year `t` (age `25 + t`).
pub fn alive_count(t: usize, pair: &LifespanPair) -> u32 {
    let age = ENTRY_AGE + t as u32;
    if age >= MAX_AGE {
        return 0;
    }
    pair.alive_at(age).iter().filter(|&&a| a).count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(simulate_lifespan(Sex::Male, &LifeTable::constant(1.0), &mut rng), 25);
        assert_eq!(simulate_lifespan(Sex::Female, &LifeTable::constant(0.0), &mut rng), 100);
    }

    #[test]
    fn bundled_table_loads_with_cap() {
        let t = LifeTable::bundled();
        assert_eq!(t.q(Sex::Male, 100), 1.0);
        assert_eq!(t.q(Sex::Female, 119), 1.0);
        assert!(t.q(Sex::Male, 80) > t.q(Sex::Female, 80));
        let e = t.expected_death_age(Sex::Male);
        assert!((70.0..85.0).contains(&e), "male expectation {e}");
    }

    #[test]
    fn missing_age_is_an_error() {
        let mut text = String::from("sex,age,death_probability\n");
        for age in 0..120 {
            if age != 50 {
                text.push_str(&format!("male,{age},0.01\nfemale,{age},0.01\n"));
            }
        }
        match parse_life_table(&text, "t") {
            Err(SimError::MissingAge { age: 50, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_death_age_matches_analytic() {
        let t = LifeTable::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 200_000;
        let sum: u64 = (0..n)
            .map(|_| simulate_lifespan(Sex::Female, &t, &mut rng) as u64)
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - t.expected_death_age(Sex::Female)).abs() < 0.2);
    }

    #[test]
    fn alive_count_cases() {
        let pair = LifespanPair {
            death_age_male: 70,
            death_age_female: 90,
        };
        assert_eq!(alive_count(0, &pair), 2);
        assert_eq!(alive_count(45, &pair), 2);
        assert_eq!(alive_count(46, &pair), 1);
        assert_eq!(alive_count(66, &pair), 0);
        assert_eq!(pair.years(), 66);
        let old = LifespanPair {
            death_age_male: 100,
            death_age_female: 30,
        };
        assert_eq!(old.years(), 75);
    }
}
