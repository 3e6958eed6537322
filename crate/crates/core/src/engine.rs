//! Grid runs, the pure-portfolio comparison, and result tables.
//!
//! Households are processed in fixed-size chunks. Chunks run in parallel,
//! but their partial sums are folded into the totals in chunk order, so a
//! run produces the same bits on any number of threads.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::bootstrap::{sample_path, LIFE_HORIZON};
use crate::config::RunConfig;
use crate::error::{Result, SimError};
use crate::household::{simulate_pair, HouseholdDraw, HouseholdParams, PairedOutcome, Strategy, TRAJECTORY_HEADER};
use crate::housing::{load_plf_table, PlfTable};
use crate::income::{IncomeModel, WORKING_YEARS};
use crate::metrics::{
    bracket_report, summarize, AgeProfile, ArmSummary, BracketKey, BracketObservation, BracketReport, Comparison,
    PairSums, Preferences, PurchaseKeys, StrategyCellResult,
};
use crate::mortality::{load_life_table, LifeTable, LifespanPair};
use crate::panel::{load_panel, load_panel_from_str, rescale_hpi, resolve_country_filter, MacroPanel};
use crate::rng::{substream, Purpose};

/// Households per work unit.
pub const CHUNK: u64 = 256;
/// Chunks reduced per parallel batch; bounds memory held in partial sums.
const BATCH: u64 = 64;
const HPI_ANCHOR_YEAR: i32 = 1990;

const BUNDLED_PANEL: &str = include_str!("../../../data/macro_panel.csv");

/// Immutable inputs shared by all workers.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub panel: MacroPanel,
    pub life_table: LifeTable,
    pub income: IncomeModel,
    pub params: HouseholdParams,
    pub prefs: Preferences,
}

impl RunInputs {
    pub fn load(config: &RunConfig) -> Result<Self> {
        let (raw, life_table, plf) = match &config.data_dir {
            None => (
                load_panel_from_str(BUNDLED_PANEL, None)?.0,
                LifeTable::bundled(),
                PlfTable::bundled(),
            ),
            Some(dir) => (
                load_panel(&dir.join("macro_panel.csv"), None)?.0,
                load_life_table(&dir.join("life_table_ssa.csv"))?,
                load_plf_table(&dir.join("plf_hecm.csv"))?,
            ),
        };
        // Anchor on the full panel so that regional subsets keep US levels.
        let mut panel = rescale_hpi(&raw, HPI_ANCHOR_YEAR, config.hpi_anchor)?;
        if let Some(keep) = resolve_country_filter(&config.countries) {
            panel = panel.filtered(&keep)?;
        }
        let params = HouseholdParams {
            replacement_rate: config.replacement_rate,
            plf,
            ..HouseholdParams::default()
        };
        Ok(RunInputs {
            panel,
            life_table,
            income: IncomeModel::calibrated(config.income_target),
            params,
            prefs: Preferences::default(),
        })
    }

    /// Strategy-independent randomness of household `index`.
    pub fn draw_household(&self, seed: u64, index: u64) -> HouseholdDraw {
        let path = sample_path(&self.panel, LIFE_HORIZON, &mut substream(seed, index, Purpose::Economy));
        let member = |purpose| {
            let mut rng = substream(seed, index, purpose);
            let p = self.income.draw_individual_params(&mut rng);
            self.income.simulate_income_path(&p, WORKING_YEARS, &mut rng)
        };
        let head = member(Purpose::IncomeHead);
        let spouse = member(Purpose::IncomeSpouse);
        let lifespans = LifespanPair::draw(
            &self.life_table,
            &mut substream(seed, index, Purpose::LifespanMale),
            &mut substream(seed, index, Purpose::LifespanFemale),
        );
        HouseholdDraw {
            path,
            head,
            spouse,
            lifespans,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub down: f64,
    pub threshold: f64,
}

impl Cell {
    fn matches(&self, pair: [f64; 2]) -> bool {
        self.down == pair[0] && self.threshold == pair[1]
    }
}

/// Second-home owners against single-home owners of the base cell, over
/// households that bought the second home.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondHomeResult {
    pub households: u64,
    pub purchasers: u64,
    pub vs_single: Comparison,
    pub profile: AgeProfile,
}

impl SecondHomeResult {
    fn new() -> Self {
        SecondHomeResult {
            households: 0,
            purchasers: 0,
            vs_single: Comparison::default(),
            profile: AgeProfile::new(LIFE_HORIZON),
        }
    }

    fn merge(&mut self, o: &SecondHomeResult) {
        self.households += o.households;
        self.purchasers += o.purchasers;
        self.vs_single.merge(&o.vs_single);
        self.profile.merge(&o.profile);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub seed: u64,
    pub households: u64,
    pub replacement_rate: f64,
    pub countries: String,
    pub config_hash: String,
    pub panel_fingerprint: String,
    pub timestamp: u64,
}

impl RunMetadata {
    fn new(config: &RunConfig, panel: &MacroPanel) -> Self {
        RunMetadata {
            seed: config.seed,
            households: config.households,
            replacement_rate: config.replacement_rate,
            countries: config.countries.join(";"),
            config_hash: config.hash(),
            panel_fingerprint: panel.fingerprint(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    fn header(&self) -> String {
        format!(
            "# seed={}\n# households={}\n# replacement_rate={}\n# countries={}\n# config_hash={}\n# panel_fingerprint={}\n# timestamp={}\n",
            self.seed,
            self.households,
            self.replacement_rate,
            self.countries,
            self.config_hash,
            self.panel_fingerprint,
            self.timestamp
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub metadata: RunMetadata,
    pub cells: Vec<(Cell, StrategyCellResult)>,
    pub second_home: Vec<(Cell, SecondHomeResult)>,
    pub base_cell: Cell,
    pub brackets: Vec<BracketReport>,
}

impl ResultSet {
    pub fn cell(&self, down: f64, threshold: f64) -> Option<&StrategyCellResult> {
        self.cells
            .iter()
            .find(|(c, _)| c.matches([down, threshold]))
            .map(|(_, r)| r)
    }

    /// Equality ignoring the timestamp.
    pub fn same_results(&self, other: &ResultSet) -> bool {
        let mut a = self.metadata.clone();
        a.timestamp = other.metadata.timestamp;
        a == other.metadata
            && self.cells == other.cells
            && self.second_home == other.second_home
            && self.base_cell == other.base_cell
            && self.brackets == other.brackets
    }
}

/// Partial sums over one chunk of households.
struct Partial {
    cells: Vec<StrategyCellResult>,
    second_home: Vec<SecondHomeResult>,
    brackets: Vec<(PurchaseKeys, ArmSummary, ArmSummary)>,
}

impl Partial {
    fn new(n_cells: usize, n_second: usize) -> Self {
        Partial {
            cells: (0..n_cells).map(|_| StrategyCellResult::new(LIFE_HORIZON)).collect(),
            second_home: (0..n_second).map(|_| SecondHomeResult::new()).collect(),
            brackets: Vec::new(),
        }
    }

    fn merge(&mut self, o: Partial) {
        for (a, b) in self.cells.iter_mut().zip(&o.cells) {
            a.merge(b);
        }
        for (a, b) in self.second_home.iter_mut().zip(&o.second_home) {
            a.merge(b);
        }
        self.brackets.extend(o.brackets);
    }
}

struct GridPlan {
    cells: Vec<Cell>,
    second_home: Vec<Cell>,
    base: Cell,
    base_index: Option<usize>,
}

impl GridPlan {
    fn new(config: &RunConfig) -> Self {
        let mut cells = Vec::new();
        for &threshold in &config.thresholds {
            for &down in &config.down_payments {
                cells.push(Cell { down, threshold });
            }
        }
        let mut second_home = Vec::new();
        for &threshold in &config.second_home_thresholds {
            for &down in &config.second_home_down_payments {
                second_home.push(Cell { down, threshold });
            }
        }
        let base = Cell {
            down: config.base_cell[0],
            threshold: config.base_cell[1],
        };
        let base_index = cells.iter().position(|c| c.matches(config.base_cell));
        GridPlan {
            cells,
            second_home,
            base,
            base_index,
        }
    }
}

fn tag(e: SimError, household: u64, cell: &str) -> SimError {
    SimError::Domain(format!("household {household}, cell {cell}: {e}"))
}

fn simulate_household(
    inputs: &RunInputs,
    plan: &GridPlan,
    seed: u64,
    index: u64,
    acc: &mut Partial,
) -> Result<()> {
    let draw = inputs.draw_household(seed, index);
    let mut base_owner = None;
    for (ci, cell) in plan.cells.iter().enumerate() {
        let outcome = simulate_pair(&draw, &Strategy::single(cell.down, cell.threshold), &inputs.params);
        let s = summarize(&outcome, &inputs.prefs).map_err(|e| tag(e, index, &cell_label(cell)))?;
        acc.cells[ci].add(&outcome, &s);
        if Some(ci) == plan.base_index {
            base_owner = Some(s.owner);
            if let (true, Some(k)) = (s.purchased, s.keys) {
                acc.brackets.push((k, s.owner, s.renter));
            }
        }
    }
    if plan.second_home.is_empty() {
        return Ok(());
    }
    let base = Strategy::single(plan.base.down, plan.base.threshold);
    let base_owner = match base_owner {
        Some(b) => b,
        None => {
            let outcome = simulate_pair(&draw, &base, &inputs.params);
            summarize(&outcome, &inputs.prefs)
                .map_err(|e| tag(e, index, &cell_label(&plan.base)))?
                .owner
        }
    };
    for (k, cell) in plan.second_home.iter().enumerate() {
        let outcome = simulate_pair(&draw, &base.with_second_home(cell.down, cell.threshold), &inputs.params);
        let s = summarize(&outcome, &inputs.prefs).map_err(|e| tag(e, index, &format!("second {}", cell_label(cell))))?;
        let r = &mut acc.second_home[k];
        r.households += 1;
        if s.second_purchased {
            r.purchasers += 1;
            r.vs_single.add(&s.owner, &base_owner);
            r.profile.add(&outcome);
        }
    }
    Ok(())
}

fn cell_label(c: &Cell) -> String {
    format!("{:.0}/{:.0}", 100.0 * c.down, 100.0 * c.threshold)
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))
}

/// Runs `work` on every chunk of `0..n` and folds results in chunk order.
fn chunked<P, F>(n: u64, threads: usize, init: P, work: F, fold: impl Fn(&mut P, P)) -> Result<P>
where
    P: Send,
    F: Fn(u64, u64) -> Result<P> + Sync,
{
    let pool = thread_pool(threads)?;
    let n_chunks = n.div_ceil(CHUNK);
    let mut total = init;
    let mut start = 0;
    while start < n_chunks {
        let end = (start + BATCH).min(n_chunks);
        let parts: Vec<P> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|c| work(c * CHUNK, ((c + 1) * CHUNK).min(n)))
                .collect::<Result<_>>()
        })?;
        for p in parts {
            fold(&mut total, p);
        }
        start = end;
    }
    Ok(total)
}

pub fn run_grid(config: &RunConfig) -> Result<ResultSet> {
    config.validate()?;
    let inputs = RunInputs::load(config)?;
    run_grid_with(config, &inputs)
}

pub fn run_grid_with(config: &RunConfig, inputs: &RunInputs) -> Result<ResultSet> {
    config.validate()?;
    let plan = GridPlan::new(config);
    let (nc, ns) = (plan.cells.len(), plan.second_home.len());
    let total = chunked(
        config.households,
        config.threads,
        Partial::new(nc, ns),
        |lo, hi| {
            let mut acc = Partial::new(nc, ns);
            for i in lo..hi {
                simulate_household(inputs, &plan, config.seed, i, &mut acc)?;
            }
            Ok(acc)
        },
        |t, p| t.merge(p),
    )?;

    let deciles: Vec<f64> = (1..10).map(|i| 10.0 * i as f64).collect();
    let brackets = [BracketKey::Income, BracketKey::Hpi, BracketKey::Interest]
        .into_iter()
        .map(|key| {
            let obs: Vec<BracketObservation> = total
                .brackets
                .iter()
                .map(|(k, o, r)| BracketObservation {
                    key: key.pick(k),
                    owner: *o,
                    renter: *r,
                })
                .collect();
            bracket_report(&obs, key, &deciles)
        })
        .collect();

    Ok(ResultSet {
        metadata: RunMetadata::new(config, &inputs.panel),
        cells: plan.cells.iter().copied().zip(total.cells).collect(),
        second_home: plan.second_home.iter().copied().zip(total.second_home).collect(),
        base_cell: plan.base,
        brackets,
    })
}

/// Simulates the base cell for the first `n` households and writes their
/// yearly records for both arms.
pub fn dump_trajectories(config: &RunConfig, inputs: &RunInputs, n: u64, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(TRAJECTORY_HEADER)
        .map_err(|e| SimError::csv("trajectories", e))?;
    let strategy = Strategy::single(config.base_cell[0], config.base_cell[1]);
    for i in 0..n.min(config.households) {
        let draw = inputs.draw_household(config.seed, i);
        let outcome: PairedOutcome = simulate_pair(&draw, &strategy, &inputs.params);
        outcome.write_csv(i, &mut w)?;
    }
    w.flush().map_err(|e| SimError::io(path, e))?;
    Ok(())
}

/// Fixed-weight portfolios of the pure-accumulation comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Portfolio {
    pub name: &'static str,
    pub stock_weight: f64,
    /// Second leg: housing when true, bonds otherwise.
    pub housing_leg: bool,
}

pub const COMPARISON_PORTFOLIOS: [Portfolio; 3] = [
    Portfolio {
        name: "all_equity",
        stock_weight: 1.0,
        housing_leg: false,
    },
    Portfolio {
        name: "stock_bond",
        stock_weight: 0.5,
        housing_leg: false,
    },
    Portfolio {
        name: "stock_house",
        stock_weight: 0.5,
        housing_leg: true,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioStats {
    pub portfolio: Portfolio,
    /// Mean and standard deviation of log wealth after `t` years, `t = 0..=75`.
    pub mean_log: Vec<f64>,
    pub std_log: Vec<f64>,
}

impl PortfolioStats {
    pub fn terminal(&self) -> (f64, f64) {
        (*self.mean_log.last().unwrap(), *self.std_log.last().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub metadata: RunMetadata,
    pub paths: u64,
    pub portfolios: Vec<PortfolioStats>,
}

/// One year's gross real return of a rebalanced portfolio.
pub fn portfolio_growth(p: &Portfolio, m: &crate::panel::MarketState) -> f64 {
    let other = if p.housing_leg { m.real_housing() } else { m.real_bond() };
    1.0 + p.stock_weight * m.real_stock() + (1.0 - p.stock_weight) * other
}

#[derive(Clone)]
struct Moments {
    sum: Vec<[f64; LIFE_HORIZON + 1]>,
    sq: Vec<[f64; LIFE_HORIZON + 1]>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            sum: vec![[0.0; LIFE_HORIZON + 1]; k],
            sq: vec![[0.0; LIFE_HORIZON + 1]; k],
        }
    }

    fn merge(&mut self, o: Moments) {
        for (a, b) in self.sum.iter_mut().zip(&o.sum).chain(self.sq.iter_mut().zip(&o.sq)) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Pure-portfolio accumulation from wealth 1 over bootstrapped paths drawn
/// from the comparison substreams, with annual rebalancing.
pub fn run_strategy_comparison(config: &RunConfig, panel: &MacroPanel, paths: u64) -> Result<ComparisonResult> {
    let k = COMPARISON_PORTFOLIOS.len();
    let total = chunked(
        paths,
        config.threads,
        Moments::new(k),
        |lo, hi| {
            let mut m = Moments::new(k);
            for i in lo..hi {
                let path = sample_path(panel, LIFE_HORIZON, &mut substream(config.seed, i, Purpose::Comparison));
                for (j, p) in COMPARISON_PORTFOLIOS.iter().enumerate() {
                    let mut log_w = 0.0;
                    for t in 0..LIFE_HORIZON {
                        log_w += portfolio_growth(p, path.market(t)).max(1e-12).ln();
                        m.sum[j][t + 1] += log_w;
                        m.sq[j][t + 1] += log_w * log_w;
                    }
                }
            }
            Ok(m)
        },
        |t, p| t.merge(p),
    )?;
    let n = paths as f64;
    let portfolios = COMPARISON_PORTFOLIOS
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mean: Vec<f64> = total.sum[j].iter().map(|s| s / n).collect();
            let std = total.sq[j]
                .iter()
                .zip(&mean)
                .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
                .collect();
            PortfolioStats {
                portfolio: *p,
                mean_log: mean,
                std_log: std,
            }
        })
        .collect();
    Ok(ComparisonResult {
        metadata: RunMetadata::new(config, panel),
        paths,
        portfolios,
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

struct TableWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl TableWriter {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| SimError::io(&path, e))?;
        let mut w = TableWriter {
            out: BufWriter::new(file),
            path,
        };
        w.raw(header)?;
        Ok(w)
    }

    fn raw(&mut self, s: &str) -> Result<()> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| SimError::io(&self.path, e))
    }

    fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let line = fields.iter().map(|f| f.as_ref()).collect::<Vec<_>>().join(",");
        self.raw(&line)?;
        self.raw("\n")
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| SimError::io(&self.path, e))
    }
}

fn pct(x: f64) -> String {
    format!("{:.0}", 100.0 * x)
}

fn distinct(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

type Stat<'a, R> = (&'a str, &'a dyn Fn(&R) -> Option<f64>);

/// Wide table: one row per (panel, threshold), one column per down payment.
fn write_wide<R>(dir: &Path, name: &str, meta: &str, cells: &[(Cell, R)], panels: &[Stat<'_, R>]) -> Result<()> {
    let downs = distinct(cells.iter().map(|(c, _)| c.down));
    let thresholds = distinct(cells.iter().map(|(c, _)| c.threshold));
    let mut w = TableWriter::create(dir, name, meta)?;
    let mut head = vec!["panel".to_string(), "threshold".to_string()];
    head.extend(downs.iter().map(|d| format!("down_{}", pct(*d))));
    w.row(&head)?;
    for (panel, stat) in panels {
        for &t in &thresholds {
            let mut row = vec![panel.to_string(), pct(t)];
            for &d in &downs {
                let v = cells
                    .iter()
                    .find(|(c, _)| c.down == d && c.threshold == t)
                    .and_then(|(_, r)| stat(r));
                row.push(fmt(v));
            }
            w.row(&row)?;
        }
    }
    w.finish()
}

/// File names written by [`write_tables`].
pub const TABLE_FILES: [&str; 12] = [
    "gains.csv",
    "best_choice.csv",
    "mdd.csv",
    "gini.csv",
    "costs.csv",
    "welfare_dissection.csv",
    "heterogeneity.csv",
    "heterogeneity_best.csv",
    "second_home_wealth.csv",
    "second_home_welfare.csv",
    "age_profile.csv",
    "cells.csv",
];

pub fn write_tables(results: &ResultSet, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let meta = results.metadata.header();
    let cells = &results.cells;
    let ratio = |f: fn(&Comparison) -> &PairSums| move |r: &StrategyCellResult| f(&r.vs_renter).ratio_change_pct();
    let reduction = |f: fn(&Comparison) -> &PairSums| move |r: &StrategyCellResult| f(&r.vs_renter).reduction_pp();

    let wealth_death = ratio(|c| &c.wealth_at_death);
    let welfare_death = ratio(|c| &c.welfare_post);
    write_wide(
        out_dir,
        "gains.csv",
        &meta,
        cells,
        &[("wealth_at_death", &wealth_death), ("welfare_at_death", &welfare_death)],
    )?;

    let base = results.cell(results.base_cell.down, results.base_cell.threshold);
    let relative = |stat: fn(&Comparison) -> &PairSums| {
        move |r: &StrategyCellResult| {
            let b = stat(&base?.vs_renter).ratio_change_pct()?;
            let x = stat(&r.vs_renter).ratio_change_pct()?;
            Some(100.0 * (1.0 + x / 100.0) / (1.0 + b / 100.0))
        }
    };
    let rel_wealth = relative(|c| &c.wealth_at_death);
    let rel_welfare = relative(|c| &c.welfare_post);
    write_wide(
        out_dir,
        "best_choice.csv",
        &meta,
        cells,
        &[("wealth_at_death", &rel_wealth), ("welfare_at_death", &rel_welfare)],
    )?;

    let (m_life, m_pre, m_post) = (
        reduction(|c| &c.mdd_lifetime),
        reduction(|c| &c.mdd_pre),
        reduction(|c| &c.mdd_post),
    );
    write_wide(
        out_dir,
        "mdd.csv",
        &meta,
        cells,
        &[("lifetime", &m_life), ("before_retirement", &m_pre), ("after_retirement", &m_post)],
    )?;

    let gini = |r: &StrategyCellResult| r.gini_change_pct();
    write_wide(out_dir, "gini.csv", &meta, cells, &[("gini_at_retirement", &gini)])?;

    let (w_ret, f_ret, f_death) = (
        ratio(|c| &c.wealth_at_retirement),
        ratio(|c| &c.financial_at_retirement),
        ratio(|c| &c.financial_at_death),
    );
    write_wide(
        out_dir,
        "costs.csv",
        &meta,
        cells,
        &[
            ("wealth_at_retirement", &w_ret),
            ("financial_at_retirement", &f_ret),
            ("financial_at_death", &f_death),
        ],
    )?;

    let (cons, beq) = (ratio(|c| &c.welfare_consumption), ratio(|c| &c.welfare_bequest));
    write_wide(
        out_dir,
        "welfare_dissection.csv",
        &meta,
        cells,
        &[("consumption", &cons), ("bequest", &beq)],
    )?;

    write_heterogeneity(out_dir, &meta, &results.brackets)?;

    let sh = &results.second_home;
    let sratio = |f: fn(&Comparison) -> &PairSums| move |r: &SecondHomeResult| f(&r.vs_single).ratio_change_pct();
    let (a, b, c, d) = (
        sratio(|c| &c.wealth_at_retirement),
        sratio(|c| &c.financial_at_retirement),
        sratio(|c| &c.wealth_at_death),
        sratio(|c| &c.financial_at_death),
    );
    write_wide(
        out_dir,
        "second_home_wealth.csv",
        &meta,
        sh,
        &[
            ("wealth_at_retirement", &a),
            ("financial_at_retirement", &b),
            ("wealth_at_death", &c),
            ("financial_at_death", &d),
        ],
    )?;
    let (a, b, c, d, e) = (
        sratio(|c| &c.welfare_lifetime),
        sratio(|c| &c.welfare_pre),
        sratio(|c| &c.welfare_post),
        sratio(|c| &c.welfare_consumption),
        sratio(|c| &c.welfare_bequest),
    );
    write_wide(
        out_dir,
        "second_home_welfare.csv",
        &meta,
        sh,
        &[
            ("welfare_at_death", &a),
            ("before_retirement", &b),
            ("after_retirement", &c),
            ("consumption", &d),
            ("bequest", &e),
        ],
    )?;

    write_age_profile(out_dir, &meta, results)?;
    write_cell_summary(out_dir, &meta, results)
}

fn write_heterogeneity(dir: &Path, meta: &str, reports: &[BracketReport]) -> Result<()> {
    type Pick = fn(&Comparison) -> Option<f64>;
    let stats: [(&str, Pick); 4] = [
        ("wealth_at_retirement", |c| c.wealth_at_retirement.ratio_change_pct()),
        ("wealth_at_death", |c| c.wealth_at_death.ratio_change_pct()),
        ("welfare_lifetime", |c| c.welfare_lifetime.ratio_change_pct()),
        ("welfare_post", |c| c.welfare_post.ratio_change_pct()),
    ];
    let mut w = TableWriter::create(dir, "heterogeneity.csv", meta)?;
    let mut head = vec!["key", "lower_pct", "upper_pct", "households"];
    head.extend(stats.iter().map(|(n, _)| *n));
    w.row(&head)?;
    for r in reports {
        for row in &r.rows {
            let mut fields = vec![
                r.key.name().to_string(),
                format!("{:.0}", row.lower_pct),
                format!("{:.0}", row.upper_pct),
                row.households.to_string(),
            ];
            fields.extend(stats.iter().map(|(_, f)| fmt(f(&row.comparison))));
            w.row(&fields)?;
        }
    }
    w.finish()?;

    let mut w = TableWriter::create(dir, "heterogeneity_best.csv", meta)?;
    w.row(&["key", "statistic", "best_percentile"])?;
    for r in reports {
        for (name, f) in &stats {
            w.row(&[r.key.name().to_string(), name.to_string(), fmt(r.best_percentile(f))])?;
        }
    }
    w.finish()
}

fn write_age_profile(dir: &Path, meta: &str, results: &ResultSet) -> Result<()> {
    let mut w = TableWriter::create(dir, "age_profile.csv", meta)?;
    w.row(&[
        "kind",
        "down",
        "threshold",
        "age",
        "households",
        "owner_wealth",
        "renter_wealth",
        "owner_financial",
        "renter_financial",
        "owner_consumption",
        "renter_consumption",
        "owner_housing",
    ])?;
    let single = results.cells.iter().map(|(c, r)| ("single", c, &r.profile));
    let second = results.second_home.iter().map(|(c, r)| ("second_home", c, &r.profile));
    for (kind, c, p) in single.chain(second) {
        for t in 0..p.count.len() {
            let n = p.count[t];
            if n == 0 {
                continue;
            }
            let mean = |v: &[f64]| format!("{:.2}", v[t] / n as f64);
            w.row(&[
                kind.to_string(),
                pct(c.down),
                pct(c.threshold),
                (crate::income::START_AGE as usize + t).to_string(),
                n.to_string(),
                mean(&p.owner_wealth),
                mean(&p.renter_wealth),
                mean(&p.owner_financial),
                mean(&p.renter_financial),
                mean(&p.owner_consumption),
                mean(&p.renter_consumption),
                mean(&p.owner_housing),
            ])?;
        }
    }
    w.finish()
}

fn write_cell_summary(dir: &Path, meta: &str, results: &ResultSet) -> Result<()> {
    let mut w = TableWriter::create(dir, "cells.csv", meta)?;
    w.row(&[
        "down",
        "threshold",
        "households",
        "purchasers",
        "liquidations",
        "defaults",
        "reverse_mortgages",
        "match_violation_share",
    ])?;
    for (c, r) in &results.cells {
        w.row(&[
            pct(c.down),
            pct(c.threshold),
            r.households.to_string(),
            r.purchasers.to_string(),
            r.liquidations.to_string(),
            r.defaults.to_string(),
            r.reverse_mortgages.to_string(),
            format!("{:.8}", r.match_violation_share()),
        ])?;
    }
    w.finish()
}

pub fn write_comparison(result: &ComparisonResult, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    let meta = format!("{}# paths={}\n", result.metadata.header(), result.paths);
    let mut w = TableWriter::create(out_dir, "comparison.csv", &meta)?;
    w.row(&["strategy", "year", "mean_log_wealth", "std_log_wealth"])?;
    for p in &result.portfolios {
        for t in 0..p.mean_log.len() {
            w.row(&[
                p.portfolio.name.to_string(),
                t.to_string(),
                format!("{:.8}", p.mean_log[t]),
                format!("{:.8}", p.std_log[t]),
            ])?;
        }
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: u64) -> RunConfig {
        RunConfig {
            households: n,
            down_payments: vec![0.1, 0.2],
            thresholds: vec![0.1],
            second_home_down_payments: vec![0.1],
            second_home_thresholds: vec![0.1],
            threads: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn single_household_single_cell() {
        let mut cfg = tiny(1);
        cfg.down_payments = vec![0.1];
        cfg.second_home_down_payments.clear();
        let r = run_grid(&cfg).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!(r.cells[0].1.households, 1);
        assert!(r.second_home.is_empty());
    }

    #[test]
    fn chunks_fold_in_order() {
        let v = chunked(1000, 3, Vec::new(), |lo, hi| Ok(vec![(lo, hi)]), |t, p| t.extend(p)).unwrap();
        assert_eq!(v.first(), Some(&(0, CHUNK)));
        assert_eq!(v.last().unwrap().1, 1000);
        assert!(v.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn repeat_runs_match() {
        let cfg = tiny(300);
        let a = run_grid(&cfg).unwrap();
        let b = run_grid(&cfg).unwrap();
        assert!(a.same_results(&b));
        assert_eq!(a.cells[0].1.households, 300);
    }

    #[test]
    fn full_weight_equity_matches_direct_compounding() {
        let panel = load_panel_from_str(BUNDLED_PANEL, None).unwrap().0;
        let cfg = RunConfig {
            threads: 1,
            ..RunConfig::default()
        };
        let r = run_strategy_comparison(&cfg, &panel, 1).unwrap();
        let path = sample_path(&panel, LIFE_HORIZON, &mut substream(cfg.seed, 0, Purpose::Comparison));
        let direct: f64 = (0..LIFE_HORIZON).map(|t| (1.0 + path.market(t).real_stock()).ln()).sum();
        assert!((r.portfolios[0].terminal().0 - direct).abs() < 1e-9);
        assert_eq!(r.portfolios[0].mean_log[0], 0.0);
    }
}
