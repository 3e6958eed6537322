//! Utility, equivalent wealth, drawdowns, inequality and the per-strategy
//! aggregates reported in the output tables.

use crate::error::{Result, SimError};
use crate::household::PairedOutcome;
use crate::income::WORKING_YEARS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    /// Relative risk aversion.
    pub delta: f64,
    /// Bequest intensity.
    pub a_q: f64,
    /// Bequest curvature shifter, 2024 USD.
    pub b_q: f64,
}

impl Default for Preferences {
    fn default() -> Self {
        Preferences {
            delta: 3.84,
            a_q: 2_360.0,
            b_q: 490_000.0,
        }
    }
}

impl Preferences {
    pub fn period_utility(&self, consumption: f64, alive: u32) -> f64 {
        let c = consumption / (alive.max(1) as f64).sqrt();
        c.powf(1.0 - self.delta) / (1.0 - self.delta)
    }

    pub fn bequest_utility(&self, wealth: f64) -> f64 {
        self.a_q * (wealth.max(0.0) + self.b_q).powf(1.0 - self.delta) / (1.0 - self.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Working years, ages 25 to 64.
    Pre,
    /// Retirement years, age 65 on.
    Post,
    Lifetime,
}

impl Window {
    pub fn range(self, years: usize) -> std::ops::Range<usize> {
        let split = WORKING_YEARS.min(years);
        match self {
            Window::Pre => 0..split,
            Window::Post => split..years,
            Window::Lifetime => 0..years,
        }
    }

    /// Whether the household's final year falls inside the window.
    pub fn contains_death(self, years: usize) -> bool {
        match self {
            Window::Pre => years <= WORKING_YEARS,
            Window::Post => years > WORKING_YEARS,
            Window::Lifetime => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityComponents {
    pub consumption_utility: f64,
    pub bequest_utility: f64,
    pub total: f64,
    pub equivalent_wealth: f64,
}

pub fn utility_of_path(
    consumption: &[f64],
    alive: &[u32],
    terminal_wealth: f64,
    window: Window,
    prefs: &Preferences,
) -> Result<UtilityComponents> {
    let years = consumption.len();
    let mut cu = 0.0;
    for t in window.range(years) {
        if !(consumption[t] > 0.0) {
            return Err(SimError::Domain(format!(
                "non-positive consumption {} in year {t}",
                consumption[t]
            )));
        }
        cu += prefs.period_utility(consumption[t], alive[t]);
    }
    let bu = if window.contains_death(years) {
        prefs.bequest_utility(terminal_wealth)
    } else {
        0.0
    };
    let total = cu + bu;
    Ok(UtilityComponents {
        consumption_utility: cu,
        bequest_utility: bu,
        total,
        equivalent_wealth: equivalent_wealth(total, prefs.delta)?,
    })
}

/// Wealth whose one-shot CRRA value equals `u`.
pub fn equivalent_wealth(u: f64, delta: f64) -> Result<f64> {
    let base = (1.0 - delta) * u;
    if !(base > 0.0) {
        return Err(SimError::Domain(format!(
            "utility {u} has no equivalent wealth for delta {delta}"
        )));
    }
    Ok(base.powf(1.0 / (1.0 - delta)))
}

pub fn wealth_change(owner_mean: f64, renter_mean: f64) -> Result<f64> {
    if !(renter_mean > 0.0) {
        return Err(SimError::Domain(format!(
            "benchmark mean {renter_mean} must be positive"
        )));
    }
    Ok(owner_mean / renter_mean - 1.0)
}

/// Largest peak-to-trough decline. Leading zero-wealth years set no peak.
pub fn max_drawdown(path: &[f64]) -> f64 {
    let mut peak = 0.0f64;
    let mut mdd = 0.0f64;
    for &w in path {
        if w > peak {
            peak = w;
        } else if peak > 0.0 {
            mdd = mdd.max(1.0 - w / peak);
        }
    }
    mdd
}

/// Gini index via the sorted-rank identity.
pub fn gini(wealths: &[f64]) -> Result<f64> {
    if wealths.is_empty() {
        return Err(SimError::Domain("Gini of an empty sample".into()));
    }
    if wealths.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(SimError::Domain("Gini requires finite non-negative wealth".into()));
    }
    let mut x = wealths.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let total: f64 = x.iter().sum();
    if total <= 0.0 {
        return Err(SimError::Domain("Gini of all-zero wealth".into()));
    }
    let weighted: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * (i as f64 + 1.0) - n - 1.0) * v)
        .sum();
    Ok(weighted / (n * total))
}

/// Per-arm summary of one household's life, the unit the engine aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmSummary {
    pub wealth_at_retirement: Option<f64>,
    pub financial_at_retirement: Option<f64>,
    pub wealth_at_death: f64,
    pub financial_at_death: f64,
    /// Equivalent wealth of post-retirement utility including bequest.
    pub welfare_post: Option<f64>,
    pub welfare_pre: f64,
    pub welfare_lifetime: f64,
    /// Post-retirement consumption utility alone.
    pub welfare_consumption: Option<f64>,
    pub welfare_bequest: f64,
    pub mdd_lifetime: f64,
    pub mdd_pre: f64,
    pub mdd_post: Option<f64>,
}

pub fn summarize_arm(
    arm: &crate::household::ArmOutcome,
    alive: &[u32],
    prefs: &Preferences,
) -> Result<ArmSummary> {
    let years = arm.years.len();
    let terms: Vec<f64> = arm
        .years
        .iter()
        .zip(alive)
        .map(|(y, &n)| {
            let c = y.flows.consumption;
            if c > 0.0 {
                Ok(prefs.period_utility(c, n))
            } else {
                Err(SimError::Domain(format!("non-positive consumption {c}")))
            }
        })
        .collect::<Result<_>>()?;
    let bequest = prefs.bequest_utility(arm.terminal_wealth);
    let window_u = |w: Window| {
        let cu: f64 = terms[w.range(years)].iter().sum();
        cu + if w.contains_death(years) { bequest } else { 0.0 }
    };
    let ew = |u: f64| equivalent_wealth(u, prefs.delta);
    let post_consumption_u: f64 = terms[Window::Post.range(years)].iter().sum();
    let wealth = arm.wealth_path();
    let split = WORKING_YEARS.min(years);
    let retired = years > WORKING_YEARS;
    Ok(ArmSummary {
        wealth_at_retirement: arm.wealth_at_retirement(),
        financial_at_retirement: arm.financial_at_retirement(),
        wealth_at_death: arm.terminal_wealth,
        financial_at_death: arm.terminal_financial(),
        welfare_post: if retired { Some(ew(window_u(Window::Post))?) } else { None },
        welfare_pre: ew(window_u(Window::Pre))?,
        welfare_lifetime: ew(window_u(Window::Lifetime))?,
        welfare_consumption: if retired { Some(ew(post_consumption_u)?) } else { None },
        welfare_bequest: ew(bequest)?,
        mdd_lifetime: max_drawdown(&wealth),
        mdd_pre: max_drawdown(&wealth[..split]),
        mdd_post: retired.then(|| max_drawdown(&wealth[split..])),
    })
}

/// Keys measured at the purchase year, for heterogeneity brackets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurchaseKeys {
    pub income: f64,
    pub hpi: f64,
    pub interest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HouseholdSummary {
    pub owner: ArmSummary,
    pub renter: ArmSummary,
    pub purchased: bool,
    pub second_purchased: bool,
    pub keys: Option<PurchaseKeys>,
    pub years: usize,
    pub liquidations: u32,
    pub defaults: u32,
    pub reverse_mortgage: bool,
    pub match_violations: u32,
    pub working_years: u32,
}

pub fn summarize(outcome: &PairedOutcome, prefs: &Preferences) -> Result<HouseholdSummary> {
    Ok(HouseholdSummary {
        owner: summarize_arm(&outcome.owner, &outcome.alive, prefs)?,
        renter: summarize_arm(&outcome.renter, &outcome.alive, prefs)?,
        purchased: outcome.purchased(),
        second_purchased: outcome.second_purchase.is_some(),
        keys: outcome.purchase.map(|p| PurchaseKeys {
            income: p.household_income,
            hpi: p.hpi,
            interest: p.reference_rate,
        }),
        years: outcome.years(),
        liquidations: outcome.liquidations,
        defaults: outcome.defaults,
        reverse_mortgage: outcome.reverse_mortgage_year.is_some(),
        match_violations: outcome.match_violations.len() as u32,
        working_years: outcome.years().min(WORKING_YEARS) as u32,
    })
}

/// Running sums of one statistic for a compared arm (`a`) and its
/// benchmark (`b`) over the same households.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairSums {
    pub n: u64,
    pub a: f64,
    pub b: f64,
}

impl PairSums {
    pub fn add(&mut self, a: f64, b: f64) {
        self.n += 1;
        self.a += a;
        self.b += b;
    }

    fn add_opt(&mut self, a: Option<f64>, b: Option<f64>) {
        if let (Some(a), Some(b)) = (a, b) {
            self.add(a, b);
        }
    }

    pub fn merge(&mut self, other: &PairSums) {
        self.n += other.n;
        self.a += other.a;
        self.b += other.b;
    }

    pub fn means(&self) -> Option<(f64, f64)> {
        (self.n > 0).then(|| (self.a / self.n as f64, self.b / self.n as f64))
    }

    /// Relative change of `a` over `b`, in percent.
    pub fn ratio_change_pct(&self) -> Option<f64> {
        self.means()
            .and_then(|(a, b)| wealth_change(a, b).ok())
            .map(|c| 100.0 * c)
    }

    /// Difference `b - a` in percentage points.
    pub fn reduction_pp(&self) -> Option<f64> {
        self.means().map(|(a, b)| 100.0 * (b - a))
    }
}

/// Comparison of two arms on every reported statistic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Comparison {
    pub wealth_at_death: PairSums,
    pub wealth_at_retirement: PairSums,
    pub financial_at_retirement: PairSums,
    pub financial_at_death: PairSums,
    pub welfare_post: PairSums,
    pub welfare_pre: PairSums,
    pub welfare_lifetime: PairSums,
    pub welfare_consumption: PairSums,
    pub welfare_bequest: PairSums,
    pub mdd_lifetime: PairSums,
    pub mdd_pre: PairSums,
    pub mdd_post: PairSums,
}

impl Comparison {
    pub fn add(&mut self, a: &ArmSummary, b: &ArmSummary) {
        self.wealth_at_death.add(a.wealth_at_death, b.wealth_at_death);
        self.wealth_at_retirement
            .add_opt(a.wealth_at_retirement, b.wealth_at_retirement);
        self.financial_at_retirement
            .add_opt(a.financial_at_retirement, b.financial_at_retirement);
        self.financial_at_death
            .add(a.financial_at_death, b.financial_at_death);
        self.welfare_post.add_opt(a.welfare_post, b.welfare_post);
        self.welfare_pre.add(a.welfare_pre, b.welfare_pre);
        self.welfare_lifetime
            .add(a.welfare_lifetime, b.welfare_lifetime);
        self.welfare_consumption
            .add_opt(a.welfare_consumption, b.welfare_consumption);
        self.welfare_bequest.add(a.welfare_bequest, b.welfare_bequest);
        self.mdd_lifetime.add(a.mdd_lifetime, b.mdd_lifetime);
        self.mdd_pre.add(a.mdd_pre, b.mdd_pre);
        self.mdd_post.add_opt(a.mdd_post, b.mdd_post);
    }

    pub fn merge(&mut self, o: &Comparison) {
        self.wealth_at_death.merge(&o.wealth_at_death);
        self.wealth_at_retirement.merge(&o.wealth_at_retirement);
        self.financial_at_retirement.merge(&o.financial_at_retirement);
        self.financial_at_death.merge(&o.financial_at_death);
        self.welfare_post.merge(&o.welfare_post);
        self.welfare_pre.merge(&o.welfare_pre);
        self.welfare_lifetime.merge(&o.welfare_lifetime);
        self.welfare_consumption.merge(&o.welfare_consumption);
        self.welfare_bequest.merge(&o.welfare_bequest);
        self.mdd_lifetime.merge(&o.mdd_lifetime);
        self.mdd_pre.merge(&o.mdd_pre);
        self.mdd_post.merge(&o.mdd_post);
    }
}

/// Means by age for the age-profile output.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeProfile {
    pub count: Vec<u64>,
    pub owner_wealth: Vec<f64>,
    pub renter_wealth: Vec<f64>,
    pub owner_financial: Vec<f64>,
    pub renter_financial: Vec<f64>,
    pub owner_consumption: Vec<f64>,
    pub renter_consumption: Vec<f64>,
    pub owner_housing: Vec<f64>,
}

impl AgeProfile {
    pub fn new(years: usize) -> Self {
        AgeProfile {
            count: vec![0; years],
            owner_wealth: vec![0.0; years],
            renter_wealth: vec![0.0; years],
            owner_financial: vec![0.0; years],
            renter_financial: vec![0.0; years],
            owner_consumption: vec![0.0; years],
            renter_consumption: vec![0.0; years],
            owner_housing: vec![0.0; years],
        }
    }

    pub fn add(&mut self, o: &PairedOutcome) {
        for (t, (a, b)) in o.owner.years.iter().zip(&o.renter.years).enumerate() {
            if t >= self.count.len() {
                break;
            }
            self.count[t] += 1;
            self.owner_wealth[t] += a.wealth;
            self.renter_wealth[t] += b.wealth;
            self.owner_financial[t] += a.financial_assets;
            self.renter_financial[t] += b.financial_assets;
            self.owner_consumption[t] += a.flows.consumption;
            self.renter_consumption[t] += b.flows.consumption;
            self.owner_housing[t] += a.housing_value;
        }
    }

    pub fn merge(&mut self, o: &AgeProfile) {
        let add = |x: &mut Vec<f64>, y: &Vec<f64>| x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        self.count.iter_mut().zip(&o.count).for_each(|(a, b)| *a += b);
        add(&mut self.owner_wealth, &o.owner_wealth);
        add(&mut self.renter_wealth, &o.renter_wealth);
        add(&mut self.owner_financial, &o.owner_financial);
        add(&mut self.renter_financial, &o.renter_financial);
        add(&mut self.owner_consumption, &o.owner_consumption);
        add(&mut self.renter_consumption, &o.renter_consumption);
        add(&mut self.owner_housing, &o.owner_housing);
    }
}

/// Everything reported for one strategy cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCellResult {
    pub households: u64,
    pub purchasers: u64,
    pub liquidations: u64,
    pub defaults: u64,
    pub reverse_mortgages: u64,
    pub match_violation_years: u64,
    pub working_household_years: u64,
    /// Owner vs renter, over purchasers.
    pub vs_renter: Comparison,
    /// Wealth at retirement of every household that reached it.
    pub gini_owner: Vec<f64>,
    pub gini_renter: Vec<f64>,
    pub profile: AgeProfile,
}

impl StrategyCellResult {
    pub fn new(horizon: usize) -> Self {
        StrategyCellResult {
            households: 0,
            purchasers: 0,
            liquidations: 0,
            defaults: 0,
            reverse_mortgages: 0,
            match_violation_years: 0,
            working_household_years: 0,
            vs_renter: Comparison::default(),
            gini_owner: Vec::new(),
            gini_renter: Vec::new(),
            profile: AgeProfile::new(horizon),
        }
    }

    pub fn add(&mut self, outcome: &PairedOutcome, s: &HouseholdSummary) {
        self.households += 1;
        self.match_violation_years += s.match_violations as u64;
        self.working_household_years += s.working_years as u64;
        if let (Some(a), Some(b)) = (s.owner.wealth_at_retirement, s.renter.wealth_at_retirement) {
            if outcome.reached_retirement() {
                self.gini_owner.push(a);
                self.gini_renter.push(b);
            }
        }
        if s.purchased {
            self.purchasers += 1;
            self.liquidations += s.liquidations as u64;
            self.defaults += s.defaults as u64;
            self.reverse_mortgages += s.reverse_mortgage as u64;
            self.vs_renter.add(&s.owner, &s.renter);
            self.profile.add(outcome);
        }
    }

    pub fn merge(&mut self, o: &StrategyCellResult) {
        self.households += o.households;
        self.purchasers += o.purchasers;
        self.liquidations += o.liquidations;
        self.defaults += o.defaults;
        self.reverse_mortgages += o.reverse_mortgages;
        self.match_violation_years += o.match_violation_years;
        self.working_household_years += o.working_household_years;
        self.vs_renter.merge(&o.vs_renter);
        self.gini_owner.extend_from_slice(&o.gini_owner);
        self.gini_renter.extend_from_slice(&o.gini_renter);
        self.profile.merge(&o.profile);
    }

    /// Relative Gini change at retirement, in percent.
    pub fn gini_change_pct(&self) -> Option<f64> {
        let go = gini(&self.gini_owner).ok()?;
        let gr = gini(&self.gini_renter).ok()?;
        (gr > 0.0).then(|| 100.0 * (go / gr - 1.0))
    }

    pub fn match_violation_share(&self) -> f64 {
        if self.working_household_years == 0 {
            0.0
        } else {
            self.match_violation_years as f64 / self.working_household_years as f64
        }
    }
}

/// One purchaser's outcome with its bracket key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketObservation {
    pub key: f64,
    pub owner: ArmSummary,
    pub renter: ArmSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketKey {
    Income,
    Hpi,
    Interest,
}

impl BracketKey {
    pub fn name(self) -> &'static str {
        match self {
            BracketKey::Income => "labor_income",
            BracketKey::Hpi => "housing_price",
            BracketKey::Interest => "interest_rate",
        }
    }

    pub fn pick(self, k: &PurchaseKeys) -> f64 {
        match self {
            BracketKey::Income => k.income,
            BracketKey::Hpi => k.hpi,
            BracketKey::Interest => k.interest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketRow {
    pub lower_pct: f64,
    pub upper_pct: f64,
    pub households: u64,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketReport {
    pub key: BracketKey,
    /// Non-empty brackets only.
    pub rows: Vec<BracketRow>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Groups observations into percentile brackets of the key; `edges` are
/// percentiles in (0, 100), e.g. 10, 20, ..., 90 for deciles.
pub fn bracket_report(obs: &[BracketObservation], key: BracketKey, edges: &[f64]) -> BracketReport {
    let mut rows = Vec::new();
    if obs.is_empty() {
        return BracketReport { key, rows };
    }
    let mut keys: Vec<f64> = obs.iter().map(|o| o.key).collect();
    keys.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = edges.iter().map(|p| quantile(&keys, p / 100.0)).collect();
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(edges);
    bounds.push(100.0);
    let mut groups = vec![(0u64, Comparison::default()); bounds.len() - 1];
    for o in obs {
        let b = cuts.partition_point(|c| *c <= o.key);
        groups[b].0 += 1;
        groups[b].1.add(&o.owner, &o.renter);
    }
    for (i, (n, comparison)) in groups.into_iter().enumerate() {
        if n > 0 {
            rows.push(BracketRow {
                lower_pct: bounds[i],
                upper_pct: bounds[i + 1],
                households: n,
                comparison,
            });
        }
    }
    BracketReport { key, rows }
}

impl BracketReport {
    /// Midpoint percentile of the bracket that maximizes `stat`.
    pub fn best_percentile(&self, stat: impl Fn(&Comparison) -> Option<f64>) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| stat(&r.comparison).map(|v| (v, 0.5 * (r.lower_pct + r.upper_pct))))
            .fold(None, |best: Option<(f64, f64)>, (v, mid)| match best {
                Some((bv, _)) if bv >= v => best,
                _ => Some((v, mid)),
            })
            .map(|(_, mid)| mid)
    }
}
