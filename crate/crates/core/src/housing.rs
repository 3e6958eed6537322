//! Mortgages, reverse mortgages, principal limit factors and home sales.
//!
//! Loans are fixed-rate contracts written in nominal dollars. The
//! simulator keeps its books in real terms, so outstanding balances and
//! payments are deflated once a year with [`Mortgage::deflate`] and
//! [`ReverseMortgage::deflate`].

use std::path::Path;

use crate::error::{Result, SimError};

pub const MORTGAGE_SPREAD: f64 = 0.0185;
pub const REVERSE_MORTGAGE_SPREAD: f64 = 0.0335;
pub const MORTGAGE_TERM: u32 = 30;
/// Annual maintenance, insurance and property tax as a share of value.
pub const MAINTENANCE_RATE: f64 = 0.025;
/// Transaction cost on each purchase and sale, as a share of value.
pub const TRANSACTION_COST: f64 = 0.03;

const BUNDLED_PLF: &str = include_str!("../../../data/plf_hecm.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mortgage {
    pub balance: f64,
    pub rate: f64,
    pub remaining_term: u32,
    pub annual_payment: f64,
}

impl Mortgage {
    pub fn is_active(&self) -> bool {
        self.balance > 0.0
    }

    pub fn zero() -> Self {
        Mortgage {
            balance: 0.0,
            rate: 0.0,
            remaining_term: 0,
            annual_payment: 0.0,
        }
    }

    /// Re-expresses the nominal contract in next year's real dollars.
    pub fn deflate(&mut self, inflation: f64) {
        self.balance /= 1.0 + inflation;
        self.annual_payment /= 1.0 + inflation;
    }

    /// Payment due this year, truncated on the final installment.
    pub fn payment_due(&self) -> f64 {
        if !self.is_active() {
            return 0.0;
        }
        let owed = self.balance * (1.0 + self.rate);
        if self.remaining_term <= 1 {
            owed
        } else {
            self.annual_payment.min(owed)
        }
    }
}

/// Level annual payment that retires `principal` in `term` years at `rate`.
pub fn annuity_payment(principal: f64, rate: f64, term: u32) -> f64 {
    if principal <= 0.0 {
        0.0
    } else if rate == 0.0 {
        principal / term as f64
    } else {
        principal * rate / (1.0 - (1.0 + rate).powi(-(term as i32)))
    }
}

pub fn originate_mortgage(home_value: f64, down_frac: f64, bond_rate: f64) -> Mortgage {
    debug_assert!(down_frac > 0.0 && down_frac <= 1.0);
    let principal = (1.0 - down_frac).max(0.0) * home_value;
    if principal <= 0.0 {
        return Mortgage::zero();
    }
    let rate = bond_rate + MORTGAGE_SPREAD;
    Mortgage {
        balance: principal,
        rate,
        remaining_term: MORTGAGE_TERM,
        annual_payment: annuity_payment(principal, rate, MORTGAGE_TERM),
    }
}

/// Accrues one year of interest and applies the year's payment. Returns
/// `(interest, payment)`.
pub fn amortize_year(m: &mut Mortgage) -> (f64, f64) {
    if !m.is_active() {
        return (0.0, 0.0);
    }
    let interest = m.balance * m.rate;
    let payment = m.payment_due();
    m.balance = (m.balance + interest - payment).max(0.0);
    m.remaining_term = m.remaining_term.saturating_sub(1);
    if m.remaining_term == 0 || m.balance < 1e-9 {
        m.balance = 0.0;
        m.annual_payment = 0.0;
    }
    (interest, payment)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseMortgage {
    pub balance: f64,
    pub rate: f64,
    pub origination_costs: f64,
}

impl ReverseMortgage {
    pub fn deflate(&mut self, inflation: f64) {
        self.balance /= 1.0 + inflation;
    }

    pub fn accrue_year(&mut self) {
        self.balance *= 1.0 + self.rate;
    }

    /// Amount owed at termination; the lender bears any excess over the
    /// home value.
    pub fn repayment(&self, home_value: f64) -> f64 {
        self.balance.min(home_value.max(0.0))
    }
}

/// Up-front reverse-mortgage costs: a share of the home value plus a flat fee.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ReverseMortgageCosts {
    pub share_of_value: f64,
    pub flat_fee: f64,
}

impl Default for ReverseMortgageCosts {
    fn default() -> Self {
        ReverseMortgageCosts {
            share_of_value: 0.02,
            flat_fee: 2_500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Home {
    pub value: f64,
    pub is_primary: bool,
    pub rented_out: bool,
}

impl Home {
    pub fn primary(value: f64) -> Self {
        Home {
            value,
            is_primary: true,
            rented_out: false,
        }
    }

    pub fn rental(value: f64) -> Self {
        Home {
            value,
            is_primary: false,
            rented_out: true,
        }
    }

    pub fn maintenance(&self) -> f64 {
        MAINTENANCE_RATE * self.value
    }
}

/// Principal limit factors on an (age, rate) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlfTable {
    ages: Vec<f64>,
    rates: Vec<f64>,
    /// Row-major by age.
    values: Vec<f64>,
}

impl PlfTable {
    pub fn bundled() -> Self {
        parse_plf_table(BUNDLED_PLF, "bundled PLF table").expect("bundled PLF table is valid")
    }

    pub fn ages(&self) -> &[f64] {
        &self.ages
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn at(&self, ai: usize, ri: usize) -> f64 {
        self.values[ai * self.rates.len() + ri]
    }

    /// True when factors rise with age and fall with the rate.
    pub fn is_monotone(&self) -> bool {
        let (na, nr) = (self.ages.len(), self.rates.len());
        (0..na).all(|a| (1..nr).all(|r| self.at(a, r) <= self.at(a, r - 1)))
            && (0..nr).all(|r| (1..na).all(|a| self.at(a, r) >= self.at(a - 1, r)))
    }
}

pub fn load_plf_table(path: &Path) -> Result<PlfTable> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_plf_table(&text, &path.display().to_string())
}

pub fn parse_plf_table(text: &str, context: &str) -> Result<PlfTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| SimError::csv(context, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SimError::MissingColumn {
                column: name.into(),
                context: context.into(),
            })
    };
    let (c_age, c_rate, c_plf) = (col("age")?, col("rate")?, col("plf")?);
    let mut entries = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SimError::csv(context, e))?;
        let field = |i: usize, name: &str| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| SimError::InvalidValue {
                field: name.into(),
                context: format!("{context} row {}", line + 2),
                message: format!("not a number: `{}`", &rec[i]),
            })
        };
        let (age, rate, plf) = (field(c_age, "age")?, field(c_rate, "rate")?, field(c_plf, "plf")?);
        if !(0.0..=1.0).contains(&plf) {
            return Err(SimError::InvalidValue {
                field: "plf".into(),
                context: format!("{context} row {}", line + 2),
                message: format!("{plf} outside [0, 1]"),
            });
        }
        entries.push((age, rate, plf));
    }
    let mut ages: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let mut rates: Vec<f64> = entries.iter().map(|e| e.1).collect();
    for v in [&mut ages, &mut rates] {
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    }
    if ages.is_empty() {
        return Err(SimError::InvalidValue {
            field: "plf".into(),
            context: context.into(),
            message: "empty table".into(),
        });
    }
    let find = |v: &[f64], x: f64| v.iter().position(|y| (y - x).abs() < 1e-9).unwrap();
    let mut values = vec![f64::NAN; ages.len() * rates.len()];
    for (age, rate, plf) in entries {
        values[find(&ages, age) * rates.len() + find(&rates, rate)] = plf;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(SimError::InvalidValue {
            field: "plf".into(),
            context: context.into(),
            message: format!(
                "grid incomplete at age {}, rate {}",
                ages[i / rates.len()],
                rates[i % rates.len()]
            ),
        });
    }
    Ok(PlfTable { ages, rates, values })
}

/// Locates `x` on a sorted grid: lower index and interpolation weight.
fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

/// Bilinear interpolation, clamped at the grid edges.
pub fn plf_lookup(age: f64, rate: f64, table: &PlfTable) -> f64 {
    let (ai, aw) = bracket(&table.ages, age);
    let (ri, rw) = bracket(&table.rates, rate);
    let ai1 = (ai + 1).min(table.ages.len() - 1);
    let ri1 = (ri + 1).min(table.rates.len() - 1);
    let lo = table.at(ai, ri) * (1.0 - rw) + table.at(ai, ri1) * rw;
    let hi = table.at(ai1, ri) * (1.0 - rw) + table.at(ai1, ri1) * rw;
    lo * (1.0 - aw) + hi * aw
}

/// Borrows the full principal limit against the primary residence.
/// Returns the loan and the lump sum paid out after origination costs.
pub fn originate_reverse_mortgage(
    home: &Home,
    has_reverse_mortgage: bool,
    age: u32,
    bond_rate: f64,
    table: &PlfTable,
    costs: &ReverseMortgageCosts,
) -> Result<(ReverseMortgage, f64)> {
    if has_reverse_mortgage {
        return Err(SimError::ReverseMortgage("a reverse mortgage is already outstanding".into()));
    }
    if !home.is_primary {
        return Err(SimError::ReverseMortgage("collateral must be the primary residence".into()));
    }
    let rate = bond_rate + REVERSE_MORTGAGE_SPREAD;
    let limit = plf_lookup(age as f64, rate, table) * home.value;
    let origination_costs = if limit > 0.0 {
        costs.share_of_value * home.value + costs.flat_fee
    } else {
        0.0
    };
    let lump_sum = (limit - origination_costs).max(0.0);
    Ok((
        ReverseMortgage {
            balance: limit,
            rate,
            origination_costs,
        },
        lump_sum,
    ))
}

/// Proceeds from selling a home after the 3% cost and repaying its loans.
/// A negative value means the sale does not cover the mortgage.
pub fn sale_pnl(home_value: f64, mortgage_balance: f64, rm_balance: f64) -> f64 {
    let residual = (1.0 - TRANSACTION_COST) * home_value - mortgage_balance;
    residual - rm_balance.min(residual.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mortgage_example() {
        let m = originate_mortgage(300_000.0, 0.20, 0.0285);
        assert!(close(m.balance, 240_000.0, 1e-9));
        assert!(close(m.rate, 0.047, 1e-12));
        // Closed form, rounded to cents by hand.
        let oracle = 240_000.0 * 0.047 * 1.047f64.powi(30) / (1.047f64.powi(30) - 1.0);
        assert!(close(m.annual_payment, oracle, 1e-9));
        assert!(close(m.annual_payment, 15_082.54, 0.005));
        let mut m2 = m;
        amortize_year(&mut m2);
        assert!(close(m2.balance, 236_197.46, 0.005));
        assert_eq!(m2.remaining_term, 29);
    }

    #[test]
    fn cash_purchase_and_zero_rate() {
        let m = originate_mortgage(500_000.0, 1.0, 0.03);
        assert_eq!(m.balance, 0.0);
        assert_eq!(m.annual_payment, 0.0);
        assert!(close(annuity_payment(300_000.0, 0.0, 30), 10_000.0, 1e-9));
    }

    #[test]
    fn thirty_payments_retire_the_loan() {
        for rate in [0.0285, 0.0, 0.09] {
            let mut m = originate_mortgage(400_000.0, 0.1, rate);
            let principal = m.balance;
            let (mut paid, mut interest) = (0.0, 0.0);
            for _ in 0..30 {
                let (i, p) = amortize_year(&mut m);
                interest += i;
                paid += p;
            }
            assert!(m.balance.abs() < 1e-6);
            assert!(close(paid - interest, principal, 1e-6));
            let before = m;
            amortize_year(&mut m);
            assert_eq!(before, m);
        }
    }

    #[test]
    fn plf_grid_properties() {
        let t = PlfTable::bundled();
        assert!(t.is_monotone());
        assert_eq!(plf_lookup(65.0, 0.03, &t), t.at(0, 0));
        assert_eq!(plf_lookup(95.0, 0.10, &t), t.at(6, 7));
        let mid = plf_lookup(67.5, 0.05, &t);
        assert!(close(mid, 0.5 * (t.at(0, 2) + t.at(1, 2)), 1e-12));
        assert_eq!(plf_lookup(50.0, 0.01, &t), t.at(0, 0));
        assert!(plf_lookup(80.0, 0.06, &t) >= plf_lookup(65.0, 0.06, &t));
    }

    #[test]
    fn reverse_mortgage_examples() {
        let table = parse_plf_table("age,rate,plf\n65,0.0,0.5\n95,0.0,0.5\n65,0.2,0.5\n95,0.2,0.5\n", "t").unwrap();
        let costs = ReverseMortgageCosts {
            share_of_value: 0.02,
            flat_fee: 0.0,
        };
        let home = Home::primary(400_000.0);
        let (rm, lump) = originate_reverse_mortgage(&home, false, 70, 0.03, &table, &costs).unwrap();
        assert!(close(lump, 192_000.0, 1e-9));
        assert!(close(rm.balance, 200_000.0, 1e-9));
        assert!(close(rm.rate, 0.0635, 1e-12));

        let zero = parse_plf_table("age,rate,plf\n65,0.05,0\n", "t").unwrap();
        let (_, lump) =
            originate_reverse_mortgage(&home, false, 70, 0.03, &zero, &ReverseMortgageCosts::default()).unwrap();
        assert_eq!(lump, 0.0);

        assert!(originate_reverse_mortgage(&home, true, 70, 0.03, &table, &costs).is_err());
        assert!(originate_reverse_mortgage(&Home::rental(1.0), false, 70, 0.03, &table, &costs).is_err());

        let mut rm2 = rm;
        for _ in 0..7 {
            rm2.accrue_year();
        }
        assert!(close(rm2.balance, 200_000.0 * 1.0635f64.powi(7), 1e-6));
        let capped = ReverseMortgage { balance: 300_000.0, ..rm };
        assert_eq!(capped.repayment(250_000.0), 250_000.0);
    }

    #[test]
    fn sale_examples() {
        assert!(close(sale_pnl(300_000.0, 0.0, 0.0), 291_000.0, 1e-9));
        assert!(close(sale_pnl(300_000.0, 291_000.0, 0.0), 0.0, 1e-9));
        assert!(close(sale_pnl(200_000.0, 250_000.0, 0.0), -56_000.0, 1e-9));
        assert!(close(sale_pnl(300_000.0, 0.0, 500_000.0), 0.0, 1e-9));
    }

    #[test]
    fn deflation_scales_contract() {
        let mut m = originate_mortgage(300_000.0, 0.2, 0.03);
        let p = m.annual_payment;
        m.deflate(0.25);
        assert!(close(m.balance, 192_000.0, 1e-9));
        assert!(close(m.annual_payment, p / 1.25, 1e-9));
    }
}
