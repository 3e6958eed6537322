//! Annual household state machine.
//!
//! A household is simulated twice over the same economic path, income
//! paths and lifespans: once with access to the housing market (the owner
//! arm) and once as an all-equity renter whose working-life consumption
//! copies the owner arm's. All amounts are in real dollars of the current
//! simulation year.

use std::io::Write;

use crate::bootstrap::EconomicPath;
use crate::error::{Result, SimError};
use crate::housing::{
    amortize_year, originate_mortgage, originate_reverse_mortgage, sale_pnl, Home, Mortgage,
    PlfTable, ReverseMortgage, ReverseMortgageCosts, TRANSACTION_COST,
};
use crate::income::{minimum_consumption, social_security, IncomePath, RETIREMENT_AGE, START_AGE, WORKING_YEARS};
use crate::mortality::LifespanPair;
use crate::panel::MarketState;

pub const SAVINGS_RATE: f64 = 0.10;
pub const WITHDRAWAL_RATE: f64 = 0.04;
pub const LTV_LIMIT: f64 = 1.5;
pub const RM_LOOKAHEAD_YEARS: f64 = 3.0;
pub const PTI_CAP: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurchaseRule {
    pub down_frac: f64,
    pub threshold_frac: f64,
}

impl PurchaseRule {
    pub fn trigger(&self) -> f64 {
        self.down_frac + self.threshold_frac
    }

    pub fn is_cash(&self) -> bool {
        self.down_frac >= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub primary: PurchaseRule,
    pub second_home: Option<PurchaseRule>,
    pub pti_cap: f64,
}

impl Strategy {
    pub fn single(down_frac: f64, threshold_frac: f64) -> Self {
        Strategy {
            primary: PurchaseRule {
                down_frac,
                threshold_frac,
            },
            second_home: None,
            pti_cap: PTI_CAP,
        }
    }

    pub fn with_second_home(mut self, down_frac: f64, threshold_frac: f64) -> Self {
        self.second_home = Some(PurchaseRule {
            down_frac,
            threshold_frac,
        });
        self
    }
}

/// Parameters shared by every household in a run.
#[derive(Debug, Clone)]
pub struct HouseholdParams {
    pub replacement_rate: f64,
    pub plf: PlfTable,
    pub rm_costs: ReverseMortgageCosts,
}

impl Default for HouseholdParams {
    fn default() -> Self {
        HouseholdParams {
            replacement_rate: 0.45,
            plf: PlfTable::bundled(),
            rm_costs: ReverseMortgageCosts::default(),
        }
    }
}

/// Everything a household experiences independently of its strategy.
#[derive(Debug, Clone)]
pub struct HouseholdDraw {
    pub path: EconomicPath,
    pub head: IncomePath,
    pub spouse: IncomePath,
    pub lifespans: LifespanPair,
}

impl HouseholdDraw {
    pub fn years(&self) -> usize {
        self.lifespans.years().min(self.path.len())
    }

    pub fn alive(&self, t: usize) -> u32 {
        crate::mortality::alive_count(t, &self.lifespans)
    }

    /// Labor income of the living members, or social security once retired.
    pub fn income(&self, t: usize, replacement: f64) -> f64 {
        let age = START_AGE + t as u32;
        let [m, f] = self.lifespans.alive_at(age);
        let member = |alive: bool, p: &IncomePath| {
            if !alive {
                0.0
            } else if t < WORKING_YEARS {
                p.income.get(t).copied().unwrap_or(0.0)
            } else {
                social_security(p.last_income(), replacement)
            }
        };
        member(m, &self.head) + member(f, &self.spouse)
    }
}

/// Reference rate for new loans: the nominal bond return, floored at zero.
pub fn reference_rate(market: &MarketState) -> f64 {
    market.bond_return.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Property {
    pub home: Home,
    pub mortgage: Mortgage,
}

impl Property {
    pub fn ltv(&self) -> f64 {
        if self.home.value > 0.0 {
            self.mortgage.balance / self.home.value
        } else if self.mortgage.is_active() {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Balance sheet and standing flags of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdState {
    pub financial_assets: f64,
    pub primary: Option<Property>,
    pub second: Option<Property>,
    pub reverse_mortgage: Option<ReverseMortgage>,
    /// Value of the home the household lives in, owned or rented.
    pub occupied_value: f64,
    pub defaulted_ever: bool,
    pub retirement_floor_withdrawal: Option<f64>,
}

impl HouseholdState {
    pub fn new() -> Self {
        HouseholdState {
            financial_assets: 0.0,
            primary: None,
            second: None,
            reverse_mortgage: None,
            occupied_value: 0.0,
            defaulted_ever: false,
            retirement_floor_withdrawal: None,
        }
    }

    pub fn owns_home(&self) -> bool {
        self.primary.is_some() || self.second.is_some()
    }

    pub fn housing_value(&self) -> f64 {
        self.primary.map_or(0.0, |p| p.home.value) + self.second.map_or(0.0, |p| p.home.value)
    }

    fn rm_balance(&self) -> f64 {
        self.reverse_mortgage.map_or(0.0, |r| r.balance)
    }

    /// Financial assets plus home equity, without sale costs.
    pub fn wealth(&self) -> f64 {
        let mut w = self.financial_assets;
        if let Some(p) = self.primary {
            w += (p.home.value - p.mortgage.balance - self.rm_balance()).max(0.0);
        }
        if let Some(s) = self.second {
            w += (s.home.value - s.mortgage.balance).max(0.0);
        }
        w
    }

    /// Wealth if every home were sold today.
    pub fn liquidation_wealth(&self) -> f64 {
        let mut w = self.financial_assets;
        if let Some(p) = self.primary {
            w += sale_pnl(p.home.value, p.mortgage.balance, self.rm_balance()).max(0.0);
        }
        if let Some(s) = self.second {
            w += sale_pnl(s.home.value, s.mortgage.balance, 0.0).max(0.0);
        }
        w
    }

    /// Mortgage payments, maintenance on owned homes and rent if the
    /// household does not own where it lives.
    pub fn housing_costs(&self, rental_yield: f64) -> f64 {
        let mut c = 0.0;
        for p in [self.primary, self.second].into_iter().flatten() {
            c += p.mortgage.payment_due() + p.home.maintenance();
        }
        if self.primary.is_none() {
            c += rental_yield * self.occupied_value;
        }
        c
    }

    pub fn rental_income(&self, rental_yield: f64) -> f64 {
        self.second
            .filter(|s| s.home.rented_out)
            .map_or(0.0, |s| rental_yield * s.home.value)
    }

    fn deflate(&mut self, inflation: f64) {
        for p in [&mut self.primary, &mut self.second].into_iter().flatten() {
            p.mortgage.deflate(inflation);
        }
        if let Some(rm) = &mut self.reverse_mortgage {
            rm.deflate(inflation);
        }
    }
}

impl Default for HouseholdState {
    fn default() -> Self {
        Self::new()
    }
}

/// Cash flows of one arm in one year. `net_investment` is the change in
/// financial assets before returns.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YearFlows {
    pub income: f64,
    pub rental_income: f64,
    pub ssi: f64,
    pub reverse_mortgage_proceeds: f64,
    pub sale_proceeds: f64,
    pub housing_costs: f64,
    pub rent_paid: f64,
    pub purchase_outlay: f64,
    pub consumption: f64,
    pub net_investment: f64,
}

impl YearFlows {
    pub fn inflows(&self) -> f64 {
        self.income + self.rental_income + self.ssi + self.reverse_mortgage_proceeds + self.sale_proceeds
    }

    pub fn outflows(&self) -> f64 {
        self.housing_costs + self.purchase_outlay + self.consumption + self.net_investment
    }

    /// Residual of the budget identity, relative to the year's gross flows.
    pub fn budget_residual(&self) -> f64 {
        let gross = [
            self.income,
            self.rental_income,
            self.ssi,
            self.reverse_mortgage_proceeds,
            self.sale_proceeds,
            self.housing_costs,
            self.purchase_outlay,
            self.consumption,
            self.net_investment,
        ];
        let scale = gross.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
        (self.inflows() - self.outflows()) / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurchaseEvent {
    pub year: usize,
    pub home_value: f64,
    pub household_income: f64,
    pub hpi: f64,
    pub reference_rate: f64,
}

/// End-of-year record for one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YearRecord {
    pub flows: YearFlows,
    pub wealth: f64,
    pub financial_assets: f64,
    pub housing_value: f64,
    pub occupied_value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmOutcome {
    pub years: Vec<YearRecord>,
    pub terminal_wealth: f64,
    pub ssi_years: u32,
}

impl ArmOutcome {
    pub fn consumption(&self) -> Vec<f64> {
        self.years.iter().map(|y| y.flows.consumption).collect()
    }

    pub fn wealth_path(&self) -> Vec<f64> {
        self.years.iter().map(|y| y.wealth).collect()
    }

    /// Wealth at the end of working life, if the household lives to retire.
    pub fn wealth_at_retirement(&self) -> Option<f64> {
        self.at_retirement().map(|y| y.wealth)
    }

    pub fn financial_at_retirement(&self) -> Option<f64> {
        self.at_retirement().map(|y| y.financial_assets)
    }

    fn at_retirement(&self) -> Option<&YearRecord> {
        if self.years.len() > WORKING_YEARS {
            self.years.get(WORKING_YEARS - 1)
        } else {
            None
        }
    }

    pub fn terminal_financial(&self) -> f64 {
        self.years.last().map_or(0.0, |y| y.financial_assets)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairedOutcome {
    pub owner: ArmOutcome,
    pub renter: ArmOutcome,
    pub alive: Vec<u32>,
    pub purchase: Option<PurchaseEvent>,
    pub second_purchase: Option<PurchaseEvent>,
    pub liquidations: u32,
    pub defaults: u32,
    pub reverse_mortgage_year: Option<usize>,
    /// Working years in which the renter could not copy the owner's consumption.
    pub match_violations: Vec<usize>,
}

impl PairedOutcome {
    pub fn purchased(&self) -> bool {
        self.purchase.is_some()
    }

    pub fn years(&self) -> usize {
        self.alive.len()
    }

    pub fn reached_retirement(&self) -> bool {
        self.years() > WORKING_YEARS
    }

    pub fn write_csv<W: Write>(&self, household: u64, out: &mut csv::Writer<W>) -> Result<()> {
        for (t, (o, r)) in self.owner.years.iter().zip(&self.renter.years).enumerate() {
            out.write_record([
                household.to_string(),
                (START_AGE as usize + t).to_string(),
                self.alive[t].to_string(),
                o.flows.income.to_string(),
                o.flows.consumption.to_string(),
                r.flows.consumption.to_string(),
                o.wealth.to_string(),
                r.wealth.to_string(),
                o.financial_assets.to_string(),
                r.financial_assets.to_string(),
                o.housing_value.to_string(),
                o.flows.housing_costs.to_string(),
                r.flows.housing_costs.to_string(),
                (self.match_violations.contains(&t) as u8).to_string(),
            ])
            .map_err(|e| SimError::csv("trajectory dump", e))?;
        }
        Ok(())
    }
}

pub const TRAJECTORY_HEADER: [&str; 14] = [
    "household",
    "age",
    "alive",
    "income",
    "owner_consumption",
    "renter_consumption",
    "owner_wealth",
    "renter_wealth",
    "owner_financial",
    "renter_financial",
    "owner_housing_value",
    "owner_housing_costs",
    "renter_housing_costs",
    "match_violation",
];

/// Outcome of a purchase check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PurchaseDecision {
    Buy {
        home_value: f64,
        mortgage: Mortgage,
        outlay: f64,
    },
    Wait,
}

/// Applies the wealth-threshold and payment-to-income rules.
pub fn try_purchase(
    financial_assets: f64,
    rule: &PurchaseRule,
    pti_cap: f64,
    market: &MarketState,
    household_income: f64,
    defaulted_ever: bool,
) -> PurchaseDecision {
    let home_value = market.hpi * household_income;
    if home_value <= 0.0 || financial_assets < rule.trigger() * home_value {
        return PurchaseDecision::Wait;
    }
    let mortgage = originate_mortgage(home_value, rule.down_frac.min(1.0), reference_rate(market));
    if mortgage.is_active() && (defaulted_ever || mortgage.annual_payment > pti_cap * household_income) {
        return PurchaseDecision::Wait;
    }
    PurchaseDecision::Buy {
        home_value,
        mortgage,
        outlay: (rule.down_frac.min(1.0) + TRANSACTION_COST) * home_value,
    }
}

/// True when three more years at the planned draw would exhaust liquid assets.
pub fn should_take_reverse_mortgage(financial_assets: f64, annual_draw: f64) -> bool {
    RM_LOOKAHEAD_YEARS * annual_draw > financial_assets
}

/// Why a home must go, if it must.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Liquidation {
    Hold,
    Leverage,
    Affordability,
}

pub fn should_liquidate(property: &Property, liquid_resources: f64, floor: f64) -> Liquidation {
    if property.ltv() > LTV_LIMIT {
        Liquidation::Leverage
    } else if liquid_resources < floor {
        Liquidation::Affordability
    } else {
        Liquidation::Hold
    }
}

/// Per-year inputs shared by both arms.
struct YearContext<'a> {
    t: usize,
    market: &'a MarketState,
    income: f64,
    floor: f64,
    working: bool,
    rs: f64,
    rh: f64,
}

struct Simulator<'a> {
    draw: &'a HouseholdDraw,
    strategy: &'a Strategy,
    params: &'a HouseholdParams,
}

#[derive(Default)]
struct OwnerEvents {
    purchase: Option<PurchaseEvent>,
    second_purchase: Option<PurchaseEvent>,
    liquidations: u32,
    defaults: u32,
    rm_year: Option<usize>,
}

impl<'a> Simulator<'a> {
    fn sell(&self, s: &mut HouseholdState, primary: bool, flows: &mut YearFlows, ev: &mut OwnerEvents) {
        let (prop, rm) = if primary {
            (s.primary.take(), s.reverse_mortgage.take().map_or(0.0, |r| r.balance))
        } else {
            (s.second.take(), 0.0)
        };
        let Some(p) = prop else { return };
        let pnl = sale_pnl(p.home.value, p.mortgage.balance, rm);
        ev.liquidations += 1;
        if pnl > 0.0 {
            s.financial_assets += pnl;
            flows.sale_proceeds += pnl;
        } else {
            ev.defaults += 1;
            s.defaulted_ever = true;
        }
        if primary {
            s.occupied_value = p.home.value;
        }
    }

    fn originate_rm(&self, s: &mut HouseholdState, ctx: &YearContext, flows: &mut YearFlows, ev: &mut OwnerEvents) -> bool {
        let Some(p) = s.primary else { return false };
        if s.reverse_mortgage.is_some() {
            return false;
        }
        let age = START_AGE + ctx.t as u32;
        let Ok((rm, lump)) = originate_reverse_mortgage(
            &p.home,
            false,
            age,
            reference_rate(ctx.market),
            &self.params.plf,
            &self.params.rm_costs,
        ) else {
            return false;
        };
        // Proceeds must retire the forward mortgage first.
        if lump <= 0.0 || lump < p.mortgage.balance {
            return false;
        }
        let net = lump - p.mortgage.balance;
        s.primary = Some(Property {
            home: p.home,
            mortgage: Mortgage::zero(),
        });
        s.reverse_mortgage = Some(rm);
        s.financial_assets += net;
        flows.reverse_mortgage_proceeds += net;
        ev.rm_year = Some(ctx.t);
        true
    }

    fn owner_year(&self, s: &mut HouseholdState, ctx: &YearContext, ev: &mut OwnerEvents) -> YearFlows {
        let m = ctx.market;
        let start_assets = s.financial_assets;
        let mut f = YearFlows {
            income: ctx.income,
            ..YearFlows::default()
        };

        if ctx.working {
            if s.primary.is_none() {
                if let PurchaseDecision::Buy { home_value, mortgage, outlay } = try_purchase(
                    s.financial_assets,
                    &self.strategy.primary,
                    self.strategy.pti_cap,
                    m,
                    ctx.income,
                    s.defaulted_ever,
                ) {
                    s.financial_assets -= outlay;
                    f.purchase_outlay += outlay;
                    s.primary = Some(Property {
                        home: Home::primary(home_value),
                        mortgage,
                    });
                    s.occupied_value = home_value;
                    if ev.purchase.is_none() {
                        ev.purchase = Some(PurchaseEvent {
                            year: ctx.t,
                            home_value,
                            household_income: ctx.income,
                            hpi: m.hpi,
                            reference_rate: reference_rate(m),
                        });
                    }
                }
            } else if let (Some(rule), None) = (&self.strategy.second_home, s.second) {
                let first_repaid = s.primary.is_some_and(|p| !p.mortgage.is_active());
                if first_repaid {
                    if let PurchaseDecision::Buy { home_value, mortgage, outlay } = try_purchase(
                        s.financial_assets,
                        rule,
                        self.strategy.pti_cap,
                        m,
                        ctx.income,
                        s.defaulted_ever,
                    ) {
                        s.financial_assets -= outlay;
                        f.purchase_outlay += outlay;
                        s.second = Some(Property {
                            home: Home::rental(home_value),
                            mortgage,
                        });
                        if ev.second_purchase.is_none() {
                            ev.second_purchase = Some(PurchaseEvent {
                                year: ctx.t,
                                home_value,
                                household_income: ctx.income,
                                hpi: m.hpi,
                                reference_rate: reference_rate(m),
                            });
                        }
                    }
                }
            }
        }

        // Forced sales and reverse-mortgage rescue.
        for primary in [false, true] {
            let prop = if primary { s.primary } else { s.second };
            if prop.is_some_and(|p| p.ltv() > LTV_LIMIT) {
                self.sell(s, primary, &mut f, ev);
            }
        }
        loop {
            if !s.owns_home() {
                break;
            }
            let liquid = s.financial_assets + ctx.income + s.rental_income(m.rental_yield)
                - s.housing_costs(m.rental_yield);
            if liquid >= ctx.floor {
                break;
            }
            if !ctx.working && s.reverse_mortgage.is_none() && self.originate_rm(s, ctx, &mut f, ev) {
                continue;
            }
            let primary = s.second.is_none();
            self.sell(s, primary, &mut f, ev);
        }

        if !ctx.working && s.primary.is_some() && s.reverse_mortgage.is_none() {
            let draw = self.planned_withdrawal(s).max(ctx.floor) + s.housing_costs(m.rental_yield)
                - ctx.income
                - s.rental_income(m.rental_yield);
            if should_take_reverse_mortgage(s.financial_assets, draw) {
                self.originate_rm(s, ctx, &mut f, ev);
            }
        }

        f.rental_income = s.rental_income(m.rental_yield);
        f.housing_costs = s.housing_costs(m.rental_yield);
        if s.primary.is_none() {
            f.rent_paid = m.rental_yield * s.occupied_value;
        }
        let net = ctx.income + f.rental_income - f.housing_costs;
        self.consume(s, ctx, net, &mut f);
        f.net_investment = s.financial_assets - start_assets;
        f
    }

    /// Retirement consumption target under the 4% rule.
    fn planned_withdrawal(&self, s: &HouseholdState) -> f64 {
        let floor_w = s.retirement_floor_withdrawal.unwrap_or(0.0);
        (WITHDRAWAL_RATE * s.financial_assets).max(floor_w)
    }

    /// Consumption rule shared by an arm that sets its own consumption:
    /// save 10% of net income while working; in retirement consume the 4%
    /// target while income and housing costs run through the portfolio.
    /// Never below the floor (SSI covers the rest).
    fn consume(&self, s: &mut HouseholdState, ctx: &YearContext, net: f64, f: &mut YearFlows) {
        let available = s.financial_assets + net;
        let c = if ctx.working {
            ((1.0 - SAVINGS_RATE) * net).max(ctx.floor)
        } else {
            let target = self.planned_withdrawal(s).max(ctx.floor);
            if available >= target {
                target
            } else {
                available.max(ctx.floor)
            }
        };
        s.financial_assets = available - c;
        if s.financial_assets < 0.0 {
            // Only reachable without a home to sell.
            f.ssi = -s.financial_assets;
            s.financial_assets = 0.0;
        }
        f.consumption = c;
    }

    fn renter_year(&self, s: &mut HouseholdState, ctx: &YearContext, owner_consumption: f64, violation: &mut bool) -> YearFlows {
        let m = ctx.market;
        let start_assets = s.financial_assets;
        let mut f = YearFlows {
            income: ctx.income,
            ..YearFlows::default()
        };
        f.housing_costs = s.housing_costs(m.rental_yield);
        f.rent_paid = f.housing_costs;
        let net = ctx.income - f.housing_costs;
        if ctx.working {
            let available = s.financial_assets + net;
            let c = if available >= owner_consumption {
                owner_consumption
            } else {
                available.max(ctx.floor)
            };
            *violation = c != owner_consumption;
            s.financial_assets = available - c;
            if s.financial_assets < 0.0 {
                f.ssi = -s.financial_assets;
                s.financial_assets = 0.0;
            }
            f.consumption = c;
        } else {
            self.consume(s, ctx, net, &mut f);
        }
        f.net_investment = s.financial_assets - start_assets;
        f
    }

    fn apply_returns(s: &mut HouseholdState, ctx: &YearContext) {
        s.financial_assets *= 1.0 + ctx.rs;
        for p in [&mut s.primary, &mut s.second].into_iter().flatten() {
            p.home.value *= 1.0 + ctx.rh;
            amortize_year(&mut p.mortgage);
        }
        if let Some(rm) = &mut s.reverse_mortgage {
            rm.accrue_year();
        }
        s.occupied_value = match s.primary {
            Some(p) => p.home.value,
            None => s.occupied_value * (1.0 + ctx.rh),
        };
    }

    fn record(s: &HouseholdState, flows: YearFlows) -> YearRecord {
        YearRecord {
            flows,
            wealth: s.wealth(),
            financial_assets: s.financial_assets,
            housing_value: s.housing_value(),
            occupied_value: s.occupied_value,
        }
    }

    fn run(&self) -> PairedOutcome {
        let years = self.draw.years();
        let mut owner = HouseholdState::new();
        let mut renter = HouseholdState::new();
        let mut ev = OwnerEvents::default();
        let mut out = PairedOutcome {
            owner: ArmOutcome {
                years: Vec::with_capacity(years),
                ..ArmOutcome::default()
            },
            renter: ArmOutcome {
                years: Vec::with_capacity(years),
                ..ArmOutcome::default()
            },
            alive: Vec::with_capacity(years),
            ..PairedOutcome::default()
        };
        let mut rent_base_set = false;

        for t in 0..years {
            let market = self.draw.path.market(t);
            let alive = self.draw.alive(t);
            let age = START_AGE + t as u32;
            let ctx = YearContext {
                t,
                market,
                income: self.draw.income(t, self.params.replacement_rate),
                floor: minimum_consumption(alive),
                working: age < RETIREMENT_AGE,
                rs: market.real_stock(),
                rh: market.real_housing(),
            };
            owner.deflate(market.inflation);
            renter.deflate(market.inflation);

            if !rent_base_set && ctx.working && ctx.income > 0.0 {
                owner.occupied_value = market.hpi * ctx.income;
                rent_base_set = true;
            }
            if age == RETIREMENT_AGE {
                owner.retirement_floor_withdrawal = Some(WITHDRAWAL_RATE * owner.financial_assets);
                renter.retirement_floor_withdrawal = Some(WITHDRAWAL_RATE * renter.financial_assets);
            }

            let owner_flows = self.owner_year(&mut owner, &ctx, &mut ev);
            // The renter lives in a home like the one the owner occupies.
            renter.occupied_value = owner.occupied_value;
            let mut violation = false;
            let renter_flows = self.renter_year(&mut renter, &ctx, owner_flows.consumption, &mut violation);
            if violation {
                out.match_violations.push(t);
            }
            out.owner.ssi_years += (owner_flows.ssi > 0.0) as u32;
            out.renter.ssi_years += (renter_flows.ssi > 0.0) as u32;

            Self::apply_returns(&mut owner, &ctx);
            Self::apply_returns(&mut renter, &ctx);
            out.owner.years.push(Self::record(&owner, owner_flows));
            out.renter.years.push(Self::record(&renter, renter_flows));
            out.alive.push(alive);
        }
        out.owner.terminal_wealth = owner.liquidation_wealth();
        out.renter.terminal_wealth = renter.liquidation_wealth();
        out.purchase = ev.purchase;
        out.second_purchase = ev.second_purchase;
        out.liquidations = ev.liquidations;
        out.defaults = ev.defaults;
        out.reverse_mortgage_year = ev.rm_year;
        out
    }
}

/// Simulates one household under `strategy` and its consumption-matched
/// renter benchmark.
pub fn simulate_pair(draw: &HouseholdDraw, strategy: &Strategy, params: &HouseholdParams) -> PairedOutcome {
    Simulator {
        draw,
        strategy,
        params,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::{EconomicPath, PathYear};

    fn market() -> MarketState {
        MarketState {
            stock_return: 0.0,
            bond_return: 0.03,
            housing_return: 0.0,
            rental_yield: 0.04,
            hpi: 4.0,
            inflation: 0.0,
            wage_index: 100.0,
        }
    }

    fn flat_path(m: MarketState, n: usize) -> EconomicPath {
        EconomicPath {
            years: (0..n)
                .map(|i| PathYear {
                    market: m,
                    country: 0,
                    source_year: 1900 + i as i32,
                })
                .collect(),
            block_boundaries: vec![0],
        }
    }

    fn flat_income(y: f64) -> IncomePath {
        IncomePath {
            income: vec![y; WORKING_YEARS],
            ..IncomePath::default()
        }
    }

    fn draw(m: MarketState, head: f64, spouse: f64, death: u32) -> HouseholdDraw {
        HouseholdDraw {
            path: flat_path(m, 75),
            head: flat_income(head),
            spouse: flat_income(spouse),
            lifespans: LifespanPair {
                death_age_male: death,
                death_age_female: death,
            },
        }
    }

    #[test]
    fn purchase_threshold_and_pti() {
        let m = market();
        let rule = PurchaseRule {
            down_frac: 0.1,
            threshold_frac: 0.2,
        };
        // H* = 4 * 50,000 = 200,000; trigger 60,000.
        assert_eq!(try_purchase(58_000.0, &rule, PTI_CAP, &m, 50_000.0, false), PurchaseDecision::Wait);
        assert!(matches!(
            try_purchase(60_500.0, &rule, PTI_CAP, &m, 50_000.0, false),
            PurchaseDecision::Buy { .. }
        ));
        let cash = PurchaseRule {
            down_frac: 1.0,
            threshold_frac: 0.1,
        };
        match try_purchase(221_000.0, &cash, PTI_CAP, &m, 50_000.0, true) {
            PurchaseDecision::Buy { mortgage, outlay, .. } => {
                assert!(!mortgage.is_active());
                assert!((outlay - 206_000.0).abs() < 1e-9);
            }
            PurchaseDecision::Wait => panic!("cash purchase should proceed"),
        }
        assert_eq!(try_purchase(1e9, &rule, PTI_CAP, &m, 50_000.0, true), PurchaseDecision::Wait);
        // A very high price-to-income ratio breaks the payment cap.
        let pricey = MarketState { hpi: 8.0, ..m };
        assert_eq!(try_purchase(1e9, &rule, PTI_CAP, &pricey, 50_000.0, false), PurchaseDecision::Wait);
    }

    #[test]
    fn pti_arithmetic() {
        let income: f64 = 45_000.0;
        assert!(16_000.0 > PTI_CAP * income);
        assert!(15_000.0 <= PTI_CAP * income + 1e-9);
    }

    #[test]
    fn reverse_mortgage_trigger_is_strict() {
        assert!(!should_take_reverse_mortgage(10.0 * 30_000.0, 30_000.0));
        assert!(should_take_reverse_mortgage(30_000.0, 30_000.0));
        assert!(!should_take_reverse_mortgage(90_000.0, 30_000.0));
    }

    #[test]
    fn liquidation_rules() {
        let p = |balance: f64| Property {
            home: Home::primary(100_000.0),
            mortgage: Mortgage {
                balance,
                ..Mortgage::zero()
            },
        };
        assert_eq!(should_liquidate(&p(160_000.0), 1e6, 16_980.0), Liquidation::Leverage);
        assert_eq!(should_liquidate(&p(149_000.0), 1e6, 16_980.0), Liquidation::Hold);
        assert_eq!(should_liquidate(&p(0.0), 8_000.0, 16_980.0), Liquidation::Affordability);
    }

    #[test]
    fn never_buying_owner_equals_renter() {
        let d = draw(MarketState { stock_return: 0.05, ..market() }, 40_000.0, 30_000.0, 90);
        let s = Strategy::single(0.5, 50.0);
        let o = simulate_pair(&d, &s, &HouseholdParams::default());
        assert!(!o.purchased());
        assert_eq!(o.owner, o.renter);
        assert!(o.match_violations.is_empty());
    }

    #[test]
    fn hand_worked_first_years() {
        // Income 60,000, HPI 4, rent 4% of 240,000 = 9,600; no returns.
        let d = draw(market(), 30_000.0, 30_000.0, 90);
        let s = Strategy::single(0.1, 10.0);
        let o = simulate_pair(&d, &s, &HouseholdParams::default());
        let net = 60_000.0 - 9_600.0;
        for t in 0..5 {
            let y = &o.owner.years[t];
            assert!((y.flows.housing_costs - 9_600.0).abs() < 1e-9);
            assert!((y.flows.consumption - 0.9 * net).abs() < 1e-9);
            assert!((y.financial_assets - 0.1 * net * (t + 1) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn returns_are_applied_once() {
        let m = MarketState {
            stock_return: 0.10,
            housing_return: 0.05,
            ..market()
        };
        let d = draw(m, 30_000.0, 30_000.0, 90);
        let o = simulate_pair(&d, &Strategy::single(0.1, 10.0), &HouseholdParams::default());
        let y0 = &o.owner.years[0];
        assert!((y0.financial_assets - y0.flows.net_investment * 1.10).abs() < 1e-9);
        assert!((y0.occupied_value - 240_000.0 * 1.05).abs() < 1e-6);
    }

    #[test]
    fn purchase_and_consumption_match() {
        let m = MarketState {
            stock_return: 0.08,
            housing_return: 0.03,
            ..market()
        };
        let d = draw(m, 45_000.0, 35_000.0, 95);
        let o = simulate_pair(&d, &Strategy::single(0.1, 0.1), &HouseholdParams::default());
        assert!(o.purchased());
        let p = o.purchase.unwrap().year;
        for t in 0..p {
            assert_eq!(o.owner.years[t], o.renter.years[t]);
        }
        for t in 0..WORKING_YEARS {
            if !o.match_violations.contains(&t) {
                let (a, b) = (o.owner.years[t].flows.consumption, o.renter.years[t].flows.consumption);
                assert!((a - b).abs() <= 1e-9 * a.abs());
            }
        }
        for arm in [&o.owner, &o.renter] {
            for y in &arm.years {
                assert!(y.flows.budget_residual().abs() < 1e-9);
                assert!(y.financial_assets >= 0.0);
            }
        }
    }

    #[test]
    fn retirees_follow_the_four_percent_rule() {
        // Renter-only life: income 300,000, rent 4% of 1.2M, 10% of the
        // 252,000 net saved for 40 years with no returns.
        let d = draw(market(), 150_000.0, 150_000.0, 90);
        let o = simulate_pair(&d, &Strategy::single(0.5, 50.0), &HouseholdParams::default());
        let r = &o.renter.years;
        let at_retirement = 40.0 * 25_200.0;
        assert!((r[39].financial_assets - at_retirement).abs() < 1e-6);
        // Social security 0.45 * 300,000 minus rent flows into the portfolio.
        let net = 135_000.0 - 48_000.0;
        assert!((r[40].flows.consumption - 0.04 * at_retirement).abs() < 1e-6);
        let f40 = at_retirement + net - 0.04 * at_retirement;
        assert!((r[40].financial_assets - f40).abs() < 1e-6);
        assert!((r[41].flows.consumption - 0.04 * f40).abs() < 1e-6);
    }

    #[test]
    fn household_length_follows_lifespans() {
        let d = draw(market(), 30_000.0, 30_000.0, 70);
        let o = simulate_pair(&d, &Strategy::single(0.2, 0.2), &HouseholdParams::default());
        assert_eq!(o.years(), 46);
        assert_eq!(*o.alive.last().unwrap(), 2);
    }
}
