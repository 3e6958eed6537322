//! Multi-country annual macro-financial panel: loading, validation,
//! HPI anchoring and summary statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, SimError};

/// Countries dropped from every run because their series are too short.
pub const DEFAULT_EXCLUDED: [&str; 2] = ["CAN", "IRL"];

/// Country whose HPI anchors the cross-country rescaling.
pub const REFERENCE_COUNTRY: &str = "USA";

pub const EUROPE_12: [&str; 12] = [
    "BEL", "CHE", "DEU", "DNK", "ESP", "FIN", "FRA", "ITA", "NLD", "NOR", "PRT", "SWE",
];

pub const COLUMNS: [&str; 9] = [
    "country",
    "year",
    "stock_return",
    "bond_return",
    "housing_return",
    "rental_yield",
    "hpi",
    "inflation",
    "wage_index",
];

/// One country-year of market data. Returns and inflation are nominal
/// decimal fractions; `hpi` is a house-price-to-income ratio (or an index
/// before anchoring).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    pub stock_return: f64,
    pub bond_return: f64,
    pub housing_return: f64,
    pub rental_yield: f64,
    pub hpi: f64,
    pub inflation: f64,
    pub wage_index: f64,
}

impl MarketState {
    fn check(&self, context: &str) -> Result<()> {
        let bad = |field: &str, message: &str| SimError::InvalidValue {
            field: field.to_string(),
            context: context.to_string(),
            message: message.to_string(),
        };
        for (field, v) in [
            ("stock_return", self.stock_return),
            ("bond_return", self.bond_return),
            ("housing_return", self.housing_return),
            ("inflation", self.inflation),
        ] {
            if !(v > -1.0) || !v.is_finite() {
                return Err(bad(field, "must be a finite value above -1"));
            }
        }
        if !(self.rental_yield >= 0.0) || !self.rental_yield.is_finite() {
            return Err(bad("rental_yield", "must be non-negative"));
        }
        if !(self.hpi > 0.0) || !self.hpi.is_finite() {
            return Err(bad("hpi", "must be positive"));
        }
        if !self.wage_index.is_finite() {
            return Err(bad("wage_index", "must be finite"));
        }
        Ok(())
    }

    /// Real stock return.
    pub fn real_stock(&self) -> f64 {
        to_real(self.stock_return, self.inflation)
    }

    /// Real bond return.
    pub fn real_bond(&self) -> f64 {
        to_real(self.bond_return, self.inflation)
    }

    /// Real housing capital return.
    pub fn real_housing(&self) -> f64 {
        to_real(self.housing_return, self.inflation)
    }
}

/// Gap-free annual series for one country, sorted by year.
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries {
    pub country_code: String,
    pub first_year: i32,
    pub rows: Vec<MarketState>,
}

impl CountrySeries {
    pub fn last_year(&self) -> i32 {
        self.first_year + self.rows.len() as i32 - 1
    }

    pub fn get(&self, year: i32) -> Option<&MarketState> {
        let idx = year.checked_sub(self.first_year)?;
        usize::try_from(idx).ok().and_then(|i| self.rows.get(i))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroPanel {
    pub countries: Vec<CountrySeries>,
    /// `(year, value)` the reference HPI was anchored to, if rescaled.
    pub base_year_anchor: Option<(i32, f64)>,
}

/// Human-readable record of what loading kept and dropped.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub excluded: Vec<String>,
    pub filtered_out: Vec<String>,
    pub dropped_leading: Vec<(String, usize)>,
    pub dropped_trailing: Vec<(String, usize)>,
    pub retained: Vec<(String, i32, i32)>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "panel validation report")?;
        if !self.excluded.is_empty() {
            writeln!(f, "  excluded by default: {}", self.excluded.join(", "))?;
        }
        if !self.filtered_out.is_empty() {
            writeln!(f, "  removed by country filter: {}", self.filtered_out.join(", "))?;
        }
        for (c, n) in &self.dropped_leading {
            writeln!(f, "  {c}: dropped {n} incomplete leading rows")?;
        }
        for (c, n) in &self.dropped_trailing {
            writeln!(f, "  {c}: dropped {n} incomplete trailing rows")?;
        }
        let years: i32 = self.retained.iter().map(|(_, a, b)| b - a + 1).sum();
        writeln!(
            f,
            "  retained {} countries, {} country-years",
            self.retained.len(),
            years
        )?;
        for (c, a, b) in &self.retained {
            writeln!(f, "    {c}: {a}-{b}")?;
        }
        Ok(())
    }
}

/// Converts a nominal return to a real one.
pub fn to_real(nominal_return: f64, inflation: f64) -> f64 {
    debug_assert!(inflation > -1.0);
    (1.0 + nominal_return) / (1.0 + inflation) - 1.0
}

/// Expands a country filter: region presets (`world`, `us`, `uk`,
/// `europe`) or ISO3 codes, case-insensitive.
pub fn resolve_country_filter(items: &[String]) -> Option<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for item in items {
        match item.trim().to_ascii_lowercase().as_str() {
            "" => {}
            "world" | "global" | "all" => return None,
            "us" | "usa" => {
                out.insert("USA".to_string());
            }
            "uk" | "gbr" => {
                out.insert("GBR".to_string());
            }
            "europe" | "europe-12" | "europe12" => {
                out.extend(EUROPE_12.iter().map(|s| s.to_string()));
            }
            other => {
                out.insert(other.to_ascii_uppercase());
            }
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

type RawRows = BTreeMap<String, BTreeMap<i32, Option<MarketState>>>;

fn parse_optional(field: &str, raw: &str, context: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|e| SimError::InvalidValue {
            field: field.to_string(),
            context: context.to_string(),
            message: e.to_string(),
        })
}

fn read_rows<R: Read>(reader: R, source: &str, rows: &mut RawRows) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SimError::csv(source, e))?
        .clone();
    let mut idx = [0usize; 9];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| SimError::MissingColumn {
                column: name.to_string(),
                context: source.to_string(),
            })?;
    }
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| SimError::csv(source, e))?;
        let country = record.get(idx[0]).unwrap_or("").trim().to_ascii_uppercase();
        let context = format!("{source} row {}", line + 2);
        let year: i32 = record
            .get(idx[1])
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e: std::num::ParseIntError| SimError::InvalidValue {
                field: "year".into(),
                context: context.clone(),
                message: e.to_string(),
            })?;
        let mut vals = [None; 7];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_optional(COLUMNS[k + 2], record.get(idx[k + 2]).unwrap_or(""), &context)?;
        }
        let state = match vals {
            [Some(s), Some(b), Some(h), Some(c), Some(p), Some(d), Some(w)] => {
                let m = MarketState {
                    stock_return: s,
                    bond_return: b,
                    housing_return: h,
                    rental_yield: c,
                    hpi: p,
                    inflation: d,
                    wage_index: w,
                };
                m.check(&format!("{country} {year}"))?;
                Some(m)
            }
            _ => None,
        };
        let series = rows.entry(country.clone()).or_default();
        if series.insert(year, state).is_some() {
            return Err(SimError::DuplicateYear { country, year });
        }
    }
    Ok(())
}

fn assemble(
    rows: RawRows,
    country_filter: Option<&BTreeSet<String>>,
) -> Result<(MacroPanel, ValidationReport)> {
    let mut report = ValidationReport::default();
    let mut countries = Vec::new();
    for (code, years) in rows {
        if DEFAULT_EXCLUDED.contains(&code.as_str()) {
            report.excluded.push(code);
            continue;
        }
        if let Some(filter) = country_filter {
            if !filter.contains(&code) {
                report.filtered_out.push(code);
                continue;
            }
        }
        let first = years.iter().find(|(_, s)| s.is_some()).map(|(y, _)| *y);
        let last = years.iter().rev().find(|(_, s)| s.is_some()).map(|(y, _)| *y);
        let (Some(first), Some(last)) = (first, last) else {
            report.dropped_leading.push((code, years.len()));
            continue;
        };
        let leading = years.range(..first).count();
        let trailing = years.range(last + 1..).count();
        if leading > 0 {
            report.dropped_leading.push((code.clone(), leading));
        }
        if trailing > 0 {
            report.dropped_trailing.push((code.clone(), trailing));
        }
        let mut series = Vec::with_capacity((last - first + 1) as usize);
        for year in first..=last {
            match years.get(&year) {
                Some(Some(state)) => series.push(*state),
                _ => return Err(SimError::SeriesGap { country: code, year }),
            }
        }
        report.retained.push((code.clone(), first, last));
        countries.push(CountrySeries {
            country_code: code,
            first_year: first,
            rows: series,
        });
    }
    if countries.is_empty() {
        return Err(SimError::EmptyPanel);
    }
    Ok((
        MacroPanel {
            countries,
            base_year_anchor: None,
        },
        report,
    ))
}

/// Loads a panel from a long-format CSV file, or from every `.csv` file in
/// a directory (one file per country or a single combined file).
///
/// Canada and Ireland are always excluded; `country_filter` restricts
/// further. Rows before a country's first complete year (or after its
/// last) are dropped; any hole in between is an error.
pub fn load_panel(
    data_path: &Path,
    country_filter: Option<&BTreeSet<String>>,
) -> Result<(MacroPanel, ValidationReport)> {
    let mut rows = RawRows::new();
    let files: Vec<_> = if data_path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(data_path)
            .map_err(|e| SimError::io(data_path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        files
    } else {
        vec![data_path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(SimError::EmptyPanel);
    }
    for file in files {
        let f = std::fs::File::open(&file).map_err(|e| SimError::io(&file, e))?;
        read_rows(f, &file.display().to_string(), &mut rows)?;
    }
    assemble(rows, country_filter)
}

/// Same as [`load_panel`] for an in-memory CSV.
pub fn load_panel_from_str(
    csv_text: &str,
    country_filter: Option<&BTreeSet<String>>,
) -> Result<(MacroPanel, ValidationReport)> {
    let mut rows = RawRows::new();
    read_rows(csv_text.as_bytes(), "<inline panel>", &mut rows)?;
    assemble(rows, country_filter)
}

/// Writes the panel in the canonical long format. Floats use the shortest
/// round-trip representation, so reloading reproduces every bit.
pub fn write_panel_csv<W: Write>(panel: &MacroPanel, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS)
        .map_err(|e| SimError::csv("panel output", e))?;
    for c in &panel.countries {
        for (i, m) in c.rows.iter().enumerate() {
            wtr.write_record([
                c.country_code.clone(),
                (c.first_year + i as i32).to_string(),
                m.stock_return.to_string(),
                m.bond_return.to_string(),
                m.housing_return.to_string(),
                m.rental_yield.to_string(),
                m.hpi.to_string(),
                m.inflation.to_string(),
                m.wage_index.to_string(),
            ])
            .map_err(|e| SimError::csv("panel output", e))?;
        }
    }
    wtr.flush().map_err(|e| SimError::io("panel output", e))?;
    Ok(())
}

/// Multiplies every country's HPI by one scalar so that the reference
/// country's HPI in `anchor_year` equals `anchor_value`.
pub fn rescale_hpi(panel: &MacroPanel, anchor_year: i32, anchor_value: f64) -> Result<MacroPanel> {
    let current = panel
        .country(REFERENCE_COUNTRY)
        .and_then(|c| c.get(anchor_year))
        .map(|m| m.hpi)
        .ok_or_else(|| SimError::AnchorMissing {
            country: REFERENCE_COUNTRY.to_string(),
            year: anchor_year,
        })?;
    let scale = anchor_value / current;
    let mut out = panel.clone();
    if scale != 1.0 {
        for c in &mut out.countries {
            for m in &mut c.rows {
                m.hpi *= scale;
            }
        }
    }
    out.base_year_anchor = Some((anchor_year, anchor_value));
    Ok(out)
}

impl MacroPanel {
    pub fn country(&self, code: &str) -> Option<&CountrySeries> {
        self.countries.iter().find(|c| c.country_code == code)
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn country_years(&self) -> usize {
        self.countries.iter().map(|c| c.len()).sum()
    }

    /// Keeps only the listed countries.
    pub fn filtered(&self, keep: &BTreeSet<String>) -> Result<MacroPanel> {
        let countries: Vec<_> = self
            .countries
            .iter()
            .filter(|c| keep.contains(&c.country_code))
            .cloned()
            .collect();
        if countries.is_empty() {
            return Err(SimError::EmptyPanel);
        }
        Ok(MacroPanel {
            countries,
            base_year_anchor: self.base_year_anchor,
        })
    }

    pub fn iter_states(&self) -> impl Iterator<Item = &MarketState> {
        self.countries.iter().flat_map(|c| c.rows.iter())
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_panel_csv(self, &mut buf).expect("writing to memory cannot fail");
        if let Some((y, v)) = self.base_year_anchor {
            buf.extend_from_slice(format!("anchor,{y},{v}").as_bytes());
        }
        hex::encode(Sha256::digest(&buf))
    }

    /// Pooled summary statistics of nominal stock and housing returns.
    pub fn summary(&self) -> PanelSummary {
        let stock: Vec<f64> = self.iter_states().map(|m| m.stock_return).collect();
        let house: Vec<f64> = self.iter_states().map(|m| m.housing_return).collect();
        PanelSummary {
            stock: SeriesStats::from_values(&stock),
            house: SeriesStats::from_values(&house),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesStats {
    pub mean: f64,
    pub std_dev: f64,
    /// 10th, 25th, 50th, 75th and 90th percentiles.
    pub quantiles: [f64; 5],
}

impl SeriesStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        SeriesStats {
            mean,
            std_dev: var.sqrt(),
            quantiles: [q(0.10), q(0.25), q(0.50), q(0.75), q(0.90)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelSummary {
    pub stock: SeriesStats,
    pub house: SeriesStats,
}

impl std::fmt::Display for PanelSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        writeln!(s, "series,mean,std,p10,p25,p50,p75,p90").ok();
        for (name, st) in [("stock_return", &self.stock), ("housing_return", &self.house)] {
            write!(s, "{name},{:.4},{:.4}", st.mean, st.std_dev).ok();
            for q in st.quantiles {
                write!(s, ",{q:.4}").ok();
            }
            writeln!(s).ok();
        }
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "country,year,stock_return,bond_return,housing_return,rental_yield,hpi,inflation,wage_index\n";

    fn row(c: &str, y: i32, hpi: f64) -> String {
        format!("{c},{y},0.1,0.05,0.04,0.04,{hpi},0.02,100\n")
    }

    #[test]
    fn to_real_examples() {
        assert!((to_real(0.10, 0.0) - 0.10).abs() < 1e-15);
        assert!(to_real(0.05, 0.05).abs() < 1e-15);
        assert!((to_real(0.1124, 0.03) - 0.0800).abs() < 5e-5);
    }

    #[test]
    fn gap_is_reported_with_country_and_year() {
        let csv = format!("{HEADER}{}{}", row("USA", 1870, 90.0), row("USA", 1872, 95.0));
        let err = load_panel_from_str(&csv, None).unwrap_err();
        match err {
            SimError::SeriesGap { country, year } => {
                assert_eq!(country, "USA");
                assert_eq!(year, 1871);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn incomplete_row_inside_series_is_a_gap() {
        let csv = format!(
            "{HEADER}{}USA,1871,0.1,,0.04,0.04,90,0.02,100\n{}",
            row("USA", 1870, 90.0),
            row("USA", 1872, 95.0)
        );
        assert!(matches!(
            load_panel_from_str(&csv, None),
            Err(SimError::SeriesGap { year: 1871, .. })
        ));
    }

    #[test]
    fn leading_incomplete_rows_are_dropped() {
        let csv = format!(
            "{HEADER}GBR,1869,,,,,,,\n{}{}",
            row("GBR", 1870, 90.0),
            row("GBR", 1871, 91.0)
        );
        let (panel, report) = load_panel_from_str(&csv, None).unwrap();
        assert_eq!(panel.countries[0].first_year, 1870);
        assert_eq!(report.dropped_leading, vec![("GBR".to_string(), 1)]);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "country,year,stock_return\nUSA,1870,0.1\n";
        match load_panel_from_str(csv, None).unwrap_err() {
            SimError::MissingColumn { column, .. } => assert_eq!(column, "bond_return"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_year_rejected() {
        let csv = format!("{HEADER}{}{}", row("USA", 1870, 90.0), row("USA", 1870, 90.0));
        assert!(matches!(
            load_panel_from_str(&csv, None),
            Err(SimError::DuplicateYear { .. })
        ));
    }

    #[test]
    fn invalid_values_rejected() {
        let csv = format!("{HEADER}USA,1870,0.1,0.05,0.04,-0.01,90,0.02,100\n");
        assert!(matches!(
            load_panel_from_str(&csv, None),
            Err(SimError::InvalidValue { .. })
        ));
        let csv = format!("{HEADER}USA,1870,-1.2,0.05,0.04,0.01,90,0.02,100\n");
        assert!(load_panel_from_str(&csv, None).is_err());
    }

    #[test]
    fn canada_and_ireland_excluded_and_filter_applies() {
        let mut csv = HEADER.to_string();
        for c in ["USA", "CAN", "IRL", "GBR"] {
            csv += &row(c, 1990, 100.0);
        }
        let (panel, report) = load_panel_from_str(&csv, None).unwrap();
        assert_eq!(panel.countries.len(), 2);
        assert_eq!(report.excluded, vec!["CAN".to_string(), "IRL".to_string()]);
        let us = resolve_country_filter(&["us".to_string()]);
        let (panel, _) = load_panel_from_str(&csv, us.as_ref()).unwrap();
        assert_eq!(panel.countries.len(), 1);
        assert_eq!(panel.countries[0].country_code, "USA");
    }

    #[test]
    fn filter_presets() {
        assert!(resolve_country_filter(&["world".into()]).is_none());
        assert_eq!(resolve_country_filter(&["europe".into()]).unwrap().len(), 12);
        let uk = resolve_country_filter(&["UK".into()]).unwrap();
        assert!(uk.contains("GBR"));
    }

    #[test]
    fn rescale_hpi_examples() {
        let csv = format!(
            "{HEADER}{}{}{}",
            row("USA", 1990, 100.0),
            row("USA", 1991, 104.0),
            row("GBR", 1990, 50.0)
        );
        let (panel, _) = load_panel_from_str(&csv, None).unwrap();
        let scaled = rescale_hpi(&panel, 1990, 4.14).unwrap();
        let us = scaled.country("USA").unwrap();
        assert!((us.get(1990).unwrap().hpi - 4.14).abs() < 1e-12);
        assert!((scaled.country("GBR").unwrap().rows[0].hpi - 50.0 * 0.0414).abs() < 1e-12);
        let before = 100.0 / 104.0;
        let after = us.get(1990).unwrap().hpi / us.get(1991).unwrap().hpi;
        assert!((before - after).abs() < 1e-14);

        // Re-anchoring to the value already achieved changes nothing.
        let again = rescale_hpi(&scaled, 1990, 4.14).unwrap();
        assert_eq!(again, scaled);

        assert!(matches!(
            rescale_hpi(&panel, 1890, 4.14),
            Err(SimError::AnchorMissing { .. })
        ));
    }

    #[test]
    fn write_and_reload_is_bit_identical() {
        let csv = format!(
            "{HEADER}USA,1990,0.1234567890123,0.05,0.04,0.04,100.1,0.02,100\nUSA,1991,-0.3333333333333333,0.05,0.04,0.04,101.7,0.02,101\n"
        );
        let (panel, _) = load_panel_from_str(&csv, None).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&panel, &mut buf).unwrap();
        let (again, _) = load_panel_from_str(std::str::from_utf8(&buf).unwrap(), None).unwrap();
        assert_eq!(panel, again);
    }
}
