//! Property tests over randomly drawn households and contracts.

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use homesim::bootstrap::{sample_path, LIFE_HORIZON};
use homesim::config::RunConfig;
use homesim::engine::RunInputs;
use homesim::household::{simulate_pair, Strategy as Plan};
use homesim::housing::{amortize_year, originate_mortgage, plf_lookup, sale_pnl, PlfTable, MORTGAGE_TERM};
use homesim::income::{minimum_consumption, WORKING_YEARS};
use homesim::mortality::{simulate_lifespan, LifeTable, Sex, ENTRY_AGE, MAX_AGE};

fn inputs() -> &'static RunInputs {
    static INPUTS: OnceLock<RunInputs> = OnceLock::new();
    INPUTS.get_or_init(|| RunInputs::load(&RunConfig::default()).unwrap())
}

fn fraction() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.1, 0.2, 0.3, 0.4, 0.5, 1.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn household_accounting_holds(seed in any::<u64>(), index in 0u64..1_000_000, down in fraction(), threshold in fraction()) {
        let inp = inputs();
        let draw = inp.draw_household(seed, index);
        let out = simulate_pair(&draw, &Plan::single(down, threshold), &inp.params);
        prop_assert_eq!(out.owner.years.len(), out.years());
        prop_assert_eq!(out.renter.years.len(), out.years());
        for arm in [&out.owner, &out.renter] {
            for (t, y) in arm.years.iter().enumerate() {
                prop_assert!(y.flows.budget_residual().abs() <= 1e-9);
                prop_assert!(y.financial_assets >= 0.0);
                prop_assert!(y.flows.consumption >= minimum_consumption(out.alive[t]) * (1.0 - 1e-12));
            }
        }
        for t in 0..out.years().min(WORKING_YEARS) {
            if out.match_violations.contains(&t) {
                continue;
            }
            let (a, b) = (out.owner.years[t].flows.consumption, out.renter.years[t].flows.consumption);
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn arms_agree_until_purchase(seed in any::<u64>(), index in 0u64..1_000_000, down in fraction(), threshold in fraction()) {
        let inp = inputs();
        let draw = inp.draw_household(seed, index);
        let out = simulate_pair(&draw, &Plan::single(down, threshold), &inp.params);
        let prefix = out.purchase.map_or(out.years(), |p| p.year);
        prop_assert_eq!(&out.owner.years[..prefix], &out.renter.years[..prefix]);
    }

    #[test]
    fn unreachable_threshold_leaves_arms_identical(seed in any::<u64>(), index in 0u64..1_000_000) {
        let inp = inputs();
        let draw = inp.draw_household(seed, index);
        let out = simulate_pair(&draw, &Plan::single(0.5, 1e9), &inp.params);
        prop_assert!(!out.purchased());
        prop_assert_eq!(&out.owner, &out.renter);
    }

    #[test]
    fn households_are_reproducible(seed in any::<u64>(), index in 0u64..1_000_000) {
        let inp = inputs();
        let s = Plan::single(0.2, 0.2);
        let a = simulate_pair(&inp.draw_household(seed, index), &s, &inp.params);
        let b = simulate_pair(&inp.draw_household(seed, index), &s, &inp.params);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bootstrap_blocks_are_contiguous(seed in any::<u64>()) {
        let path = sample_path(&inputs().panel, LIFE_HORIZON, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(path.len(), LIFE_HORIZON);
        prop_assert_eq!(path.block_boundaries[0], 0);
        for (s, e) in path.blocks() {
            prop_assert!(e > s);
            for w in path.years[s..e].windows(2) {
                prop_assert_eq!(w[0].country, w[1].country);
                prop_assert_eq!(w[1].source_year, w[0].source_year + 1);
            }
        }
    }

    #[test]
    fn mortgage_retires_in_term(value in 1e4f64..5e6, down in 0.05f64..0.95, rate in -0.01f64..0.25) {
        let mut m = originate_mortgage(value, down, rate);
        let mut last = m.balance;
        for _ in 0..MORTGAGE_TERM {
            amortize_year(&mut m);
            prop_assert!(m.balance <= last + 1e-9 * value);
            last = m.balance;
        }
        prop_assert!(m.balance.abs() < 1e-6);
        prop_assert!(!m.is_active());
    }

    #[test]
    fn sale_never_pays_more_than_net_value(value in 0.0f64..5e6, mortgage in 0.0f64..5e6, rm in 0.0f64..5e6) {
        let pnl = sale_pnl(value, mortgage, rm);
        prop_assert!(pnl <= 0.97 * value + 1e-9);
        if mortgage == 0.0 {
            prop_assert!(pnl >= 0.0);
        }
    }

    #[test]
    fn principal_limit_is_within_table_range(age in 50.0f64..110.0, rate in 0.0f64..0.3) {
        let table = PlfTable::bundled();
        let v = plf_lookup(age, rate, &table);
        let all: Vec<f64> = (0..table.ages().len())
            .flat_map(|a| (0..table.rates().len()).map(move |r| (a, r)))
            .map(|(a, r)| table.at(a, r))
            .collect();
        let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= min - 1e-12 && v <= max + 1e-12);
    }

    #[test]
    fn lifespans_stay_in_range(seed in any::<u64>()) {
        let table = LifeTable::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sex in [Sex::Male, Sex::Female] {
            let age = simulate_lifespan(sex, &table, &mut rng);
            prop_assert!((ENTRY_AGE..=MAX_AGE).contains(&age));
        }
    }
}
