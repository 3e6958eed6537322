//! Synthetic macro-history panel.
//!
//! Generates a long-format panel with the same schema, country list and
//! rough moments as the historical data the simulator is meant for:
//! persistent inflation with war-time spikes and a few hyperinflations,
//! fat-tailed equity returns, house prices tied to wages through a
//! mean-reverting price-to-income ratio, rental yields that move against
//! that ratio, and bond returns driven by yield changes. Real returns are
//! drawn first and nominalized with inflation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::panel::{CountrySeries, MacroPanel, MarketState};

pub const DEFAULT_SEED: u64 = 1870_2020;
pub const FIRST_ROW_YEAR: i32 = 1870;
pub const LAST_YEAR: i32 = 2020;

/// Country code and first complete year.
pub const COUNTRIES: [(&str, i32); 18] = [
    ("AUS", 1871),
    ("BEL", 1870),
    ("CAN", 1921),
    ("CHE", 1900),
    ("DEU", 1871),
    ("DNK", 1875),
    ("ESP", 1900),
    ("FIN", 1896),
    ("FRA", 1871),
    ("GBR", 1871),
    ("IRL", 1930),
    ("ITA", 1871),
    ("JPN", 1886),
    ("NLD", 1871),
    ("NOR", 1871),
    ("PRT", 1871),
    ("SWE", 1871),
    ("USA", 1871),
];

/// Hyperinflation years: country, year, annual inflation.
const HYPERINFLATION: [(&str, i32, f64); 12] = [
    ("DEU", 1920, 0.70),
    ("DEU", 1921, 1.10),
    ("DEU", 1922, 2.00),
    ("DEU", 1923, 2.50),
    ("ITA", 1944, 0.90),
    ("ITA", 1945, 0.65),
    ("JPN", 1945, 0.55),
    ("JPN", 1946, 1.20),
    ("JPN", 1947, 0.95),
    ("FIN", 1945, 0.45),
    ("FRA", 1946, 0.50),
    ("FRA", 1948, 0.55),
];

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn war_premium(year: i32) -> f64 {
    match year {
        1915..=1920 => 0.09,
        1940..=1947 => 0.08,
        1973..=1981 => 0.05,
        _ => 0.0,
    }
}

fn normal_target(year: i32) -> f64 {
    if year < 1914 {
        0.005
    } else if year < 1990 {
        0.035
    } else {
        0.02
    }
}

/// Generates the panel including a few incomplete leading rows per
/// country, as CSV text.
pub fn generate_panel_csv(seed: u64) -> String {
    let panel = generate_panel(seed);
    let mut out = String::from(
        "country,year,stock_return,bond_return,housing_return,rental_yield,hpi,inflation,wage_index\n",
    );
    for c in &panel.countries {
        for year in FIRST_ROW_YEAR..c.first_year {
            // Stock and bond data exist before housing data does.
            out.push_str(&format!("{},{year},0.05,0.04,,,,0.01,\n", c.country_code));
        }
        for (i, m) in c.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.country_code,
                c.first_year + i as i32,
                m.stock_return,
                m.bond_return,
                m.housing_return,
                m.rental_yield,
                m.hpi,
                m.inflation,
                m.wage_index
            ));
        }
    }
    out
}

/// Generates complete series for every country in [`COUNTRIES`]. HPI and
/// wages are indexed to 100 in 1990.
pub fn generate_panel(seed: u64) -> MacroPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let years = (LAST_YEAR - FIRST_ROW_YEAR + 1) as usize;
    let world: Vec<f64> = (0..years).map(|_| gauss(&mut rng)).collect();
    let tails = StudentT::new(5.0).expect("valid degrees of freedom");
    let t_scale = (3.0f64 / 5.0).sqrt();

    let countries = COUNTRIES
        .iter()
        .map(|&(code, first_year)| {
            let mut pi: f64 = 0.01;
            let mut expected_pi: f64 = 0.01;
            let mut x: f64 = 0.0;
            let mut log_wage = 0.0;
            let mut log_price = 0.0;
            let mut yield_prev = 0.035;
            let mut rows = Vec::new();
            let mut log_hpi = Vec::new();
            let mut log_wages = Vec::new();
            for year in FIRST_ROW_YEAR..=LAST_YEAR {
                let w = world[(year - FIRST_ROW_YEAR) as usize];
                let eps = gauss(&mut rng);
                let target = normal_target(year) + war_premium(year);
                pi = target + 0.55 * (pi - target) + 0.025 * eps;
                if let Some(&(_, _, h)) = HYPERINFLATION
                    .iter()
                    .find(|(c, y, _)| *c == code && *y == year)
                {
                    pi = h;
                }
                pi = pi.max(-0.12);
                let inflation = pi;

                let stress = (inflation - 0.08).clamp(0.0, 1.0);
                let z = 0.55 * w + 0.835 * tails.sample(&mut rng) * t_scale;
                let real_stock = (0.08 - 0.3 * stress + 0.15 * z).exp() - 1.0;

                let real_wage_growth = 0.02 + 0.015 * gauss(&mut rng);
                let x_new = 0.9 * x
                    + 0.035 * gauss(&mut rng)
                    + 0.02 * w;
                let real_house = ((1.0 + real_wage_growth) * (x_new - x).exp() - 1.0)
                    .max(-0.6);
                x = x_new;
                let rental_yield =
                    (0.045 * (-2.0 * x).exp() + 0.006 * gauss(&mut rng))
                        .clamp(0.015, 0.11);

                expected_pi = 0.65 * expected_pi + 0.35 * inflation.min(0.25);
                let yld = (0.024 + expected_pi + 0.006 * gauss(&mut rng))
                    .max(0.005);
                let bond_return = (yield_prev - 6.0 * (yld - yield_prev)
                    + 0.025 * gauss(&mut rng))
                .max(-0.5);
                yield_prev = yld;

                let nominal = |r: f64| (1.0 + r) * (1.0 + inflation) - 1.0;
                let stock_return = nominal(real_stock);
                let housing_return = nominal(real_house);
                let wage_growth = nominal(real_wage_growth);
                log_wage += (1.0 + wage_growth).ln();
                log_price += (1.0 + housing_return).ln();

                if year >= first_year {
                    rows.push(MarketState {
                        stock_return,
                        bond_return,
                        housing_return,
                        rental_yield,
                        hpi: 0.0,
                        inflation,
                        wage_index: 0.0,
                    });
                    log_hpi.push(log_price - log_wage);
                    log_wages.push(log_wage);
                }
            }
            let anchor = (1990 - first_year) as usize;
            let (h0, w0) = (log_hpi[anchor], log_wages[anchor]);
            for (m, (h, lw)) in rows.iter_mut().zip(log_hpi.iter().zip(&log_wages)) {
                m.hpi = 100.0 * (h - h0).exp();
                m.wage_index = 100.0 * (lw - w0).exp();
            }
            CountrySeries {
                country_code: code.to_string(),
                first_year,
                rows,
            }
        })
        .collect();
    MacroPanel {
        countries,
        base_year_anchor: None,
    }
}

/// Single-country panel that repeats one market state, for hand-checkable
/// simulations.
pub fn constant_panel(market: MarketState, years: usize) -> MacroPanel {
    MacroPanel {
        countries: vec![CountrySeries {
            country_code: "USA".into(),
            first_year: 1900,
            rows: vec![market; years],
        }],
        base_year_anchor: None,
    }
}

/// Random panel for property tests: `n_countries` short series with
/// moderate returns.
pub fn random_panel<R: Rng + ?Sized>(rng: &mut R, n_countries: usize, years: usize) -> MacroPanel {
    let countries = (0..n_countries)
        .map(|i| CountrySeries {
            country_code: format!("C{i:02}"),
            first_year: 1950,
            rows: (0..years)
                .map(|_| MarketState {
                    stock_return: rng.random_range(-0.3..0.4),
                    bond_return: rng.random_range(-0.05..0.12),
                    housing_return: rng.random_range(-0.15..0.2),
                    rental_yield: rng.random_range(0.02..0.07),
                    hpi: rng.random_range(2.0..7.0),
                    inflation: rng.random_range(-0.02..0.15),
                    wage_index: 100.0,
                })
                .collect(),
        })
        .collect();
    MacroPanel {
        countries,
        base_year_anchor: None,
    }
}
