//! Stationary block bootstrap over the macro panel.
//!
//! A path is built from blocks of consecutive years taken from a single
//! country. Block lengths are geometric with mean [`MEAN_BLOCK_LENGTH`];
//! a block that runs into the end of its country's series stops there and
//! a fresh block is drawn (no wrap-around).

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::panel::{MacroPanel, MarketState};

pub const MEAN_BLOCK_LENGTH: f64 = 10.0;
pub const LIFE_HORIZON: usize = 75;

/// One bootstrapped year together with where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathYear {
    pub market: MarketState,
    pub country: u16,
    pub source_year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EconomicPath {
    pub years: Vec<PathYear>,
    /// Indices into `years` where a new block starts (always begins with 0).
    pub block_boundaries: Vec<usize>,
}

impl EconomicPath {
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn market(&self, t: usize) -> &MarketState {
        &self.years[t].market
    }

    /// Iterates over `(start, end)` index ranges of each block.
    pub fn blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.block_boundaries.iter().enumerate().map(|(i, &start)| {
            let end = self
                .block_boundaries
                .get(i + 1)
                .copied()
                .unwrap_or(self.years.len());
            (start, end)
        })
    }

    /// Writes the path as CSV for debugging.
    pub fn write_csv<W: std::io::Write>(
        &self,
        panel: &MacroPanel,
        writer: W,
    ) -> crate::error::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let err = |e| crate::error::SimError::csv("path dump", e);
        wtr.write_record([
            "t",
            "block",
            "country",
            "source_year",
            "stock_return",
            "bond_return",
            "housing_return",
            "rental_yield",
            "hpi",
            "inflation",
        ])
        .map_err(err)?;
        let mut block = 0usize;
        for (t, y) in self.years.iter().enumerate() {
            if self.block_boundaries.get(block + 1) == Some(&t) {
                block += 1;
            }
            let m = &y.market;
            wtr.write_record([
                t.to_string(),
                block.to_string(),
                panel.countries[y.country as usize].country_code.clone(),
                y.source_year.to_string(),
                m.stock_return.to_string(),
                m.bond_return.to_string(),
                m.housing_return.to_string(),
                m.rental_yield.to_string(),
                m.hpi.to_string(),
                m.inflation.to_string(),
            ])
            .map_err(err)?;
        }
        wtr.flush()
            .map_err(|e| crate::error::SimError::io("path dump", e))
    }
}

/// Geometric block length on {1, 2, ...} with the given mean.
#[derive(Debug, Clone, Copy)]
pub struct BlockLength {
    geometric: Geometric,
}

impl BlockLength {
    pub fn new(mean: f64) -> Self {
        assert!(mean >= 1.0, "mean block length must be at least 1");
        Self {
            geometric: Geometric::new(1.0 / mean).expect("probability in (0, 1]"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // Geometric counts failures before the first success.
        (self.geometric.sample(rng) as usize).saturating_add(1)
    }
}

impl Default for BlockLength {
    fn default() -> Self {
        Self::new(MEAN_BLOCK_LENGTH)
    }
}

/// Draws one block length with the default mean of 10 years.
pub fn draw_block_length<R: Rng + ?Sized>(rng: &mut R) -> usize {
    BlockLength::default().sample(rng)
}

/// Bootstraps a path of `horizon` years. Countries are chosen uniformly,
/// then a start year uniformly within the chosen country.
pub fn sample_path<R: Rng + ?Sized>(panel: &MacroPanel, horizon: usize, rng: &mut R) -> EconomicPath {
    sample_path_with(panel, horizon, &BlockLength::default(), rng)
}

pub fn sample_path_with<R: Rng + ?Sized>(
    panel: &MacroPanel,
    horizon: usize,
    lengths: &BlockLength,
    rng: &mut R,
) -> EconomicPath {
    assert!(!panel.is_empty(), "cannot bootstrap from an empty panel");
    let mut years = Vec::with_capacity(horizon);
    let mut block_boundaries = Vec::new();
    while years.len() < horizon {
        let ci = rng.random_range(0..panel.countries.len());
        let series = &panel.countries[ci];
        let start = rng.random_range(0..series.len());
        let drawn = lengths.sample(rng);
        let take = drawn.min(series.len() - start).min(horizon - years.len());
        block_boundaries.push(years.len());
        for (offset, market) in series.rows[start..start + take].iter().enumerate() {
            years.push(PathYear {
                market: *market,
                country: ci as u16,
                source_year: series.first_year + (start + offset) as i32,
            });
        }
    }
    EconomicPath {
        years,
        block_boundaries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::CountrySeries;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(code: &str, first_year: i32, n: usize) -> CountrySeries {
        let m = MarketState {
            stock_return: 0.05,
            bond_return: 0.02,
            housing_return: 0.03,
            rental_yield: 0.04,
            hpi: 4.0,
            inflation: 0.02,
            wage_index: 100.0,
        };
        CountrySeries {
            country_code: code.into(),
            first_year,
            rows: vec![m; n],
        }
    }

    fn two_country_panel() -> MacroPanel {
        MacroPanel {
            countries: vec![flat("AAA", 1900, 60), flat("BBB", 1950, 60)],
            base_year_anchor: None,
        }
    }

    #[test]
    fn block_length_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<usize> = (0..n).map(|_| draw_block_length(&mut rng)).collect();
        let mean = draws.iter().sum::<usize>() as f64 / n as f64;
        assert!((9.8..=10.2).contains(&mean), "mean {mean}");
        assert_eq!(*draws.iter().min().unwrap(), 1);
        let p1 = draws.iter().filter(|&&k| k == 1).count() as f64 / n as f64;
        assert!((p1 - 0.1).abs() <= 0.005, "P(1) = {p1}");
    }

    #[test]
    fn path_has_exact_horizon_and_consecutive_blocks() {
        let panel = two_country_panel();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let path = sample_path(&panel, LIFE_HORIZON, &mut rng);
            assert_eq!(path.len(), LIFE_HORIZON);
            assert_eq!(path.block_boundaries[0], 0);
            for (s, e) in path.blocks() {
                assert!(e > s);
                for t in s + 1..e {
                    assert_eq!(path.years[t].country, path.years[s].country);
                    assert_eq!(path.years[t].source_year, path.years[t - 1].source_year + 1);
                }
            }
            for y in &path.years {
                let c = &panel.countries[y.country as usize];
                assert!(c.get(y.source_year).is_some());
            }
        }
    }

    #[test]
    fn blocks_stop_at_series_end() {
        let panel = MacroPanel {
            countries: vec![flat("AAA", 2000, 3)],
            base_year_anchor: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let path = sample_path(&panel, 30, &mut rng);
        for (s, e) in path.blocks() {
            assert!(e - s <= 3);
            assert!(path.years[e - 1].source_year <= 2002);
        }
    }

    #[test]
    fn country_shares_are_uniform() {
        let panel = two_country_panel();
        let mut counts = [0usize; 2];
        for i in 0..10_000u64 {
            let mut rng = crate::rng::substream(1, i, crate::rng::Purpose::Economy);
            let path = sample_path(&panel, LIFE_HORIZON, &mut rng);
            for y in &path.years {
                counts[y.country as usize] += 1;
            }
        }
        let total = (counts[0] + counts[1]) as f64;
        for c in counts {
            let share = c as f64 / total;
            assert!((0.48..=0.52).contains(&share), "share {share}");
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let panel = two_country_panel();
        let a = sample_path(&panel, 75, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_path(&panel, 75, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
