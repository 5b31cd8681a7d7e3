//! Embedded count tables from published Bell tests, with the published χ²
//! values they should reproduce.
//!
//! Each dataset is one fixture file in the tables format, extended with the
//! analyses to run and the published values to compare against. Fixture ids
//! are `<dataset>.<table>`, e.g. `exp2.full` or `exp6.qrn.bmarg`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nosig::{
    correlation_consistency_check, detector_asymmetry_check, outcome_efficiency_check,
    product_condition_check, three_party_battery, two_party_battery, BatteryOptions, CausalGraph,
    CausalStatus, EfficiencyModel, EqualitySpec, MultiBin, NosigError, TestBatteryReport,
};
use crate::stats::{uniformity_chi2, weighted_chi2, Chi2Result, StatsError, WeightedCounts};
use crate::tables::format::{FormatError, TableEntry, TableRole};
use crate::tables::{
    outcomes_sel, settings_sel, CountTable, Party, PartyLayout, TableError, TableViews,
};

const SOURCES: &[(&str, &str)] = &[
    ("exp1", include_str!("../fixtures/exp1.toml")),
    ("exp2", include_str!("../fixtures/exp2.toml")),
    ("exp4.hrn1", include_str!("../fixtures/exp4.hrn1.toml")),
    ("exp4.qrn1", include_str!("../fixtures/exp4.qrn1.toml")),
    ("exp4.hrn2", include_str!("../fixtures/exp4.hrn2.toml")),
    ("exp4.db2", include_str!("../fixtures/exp4.db2.toml")),
    ("exp5", include_str!("../fixtures/exp5.toml")),
    ("exp6.hrn", include_str!("../fixtures/exp6.hrn.toml")),
    ("exp6.qrn", include_str!("../fixtures/exp6.qrn.toml")),
    ("exp9", include_str!("../fixtures/exp9.toml")),
    ("exp10", include_str!("../fixtures/exp10.toml")),
    ("exp12", include_str!("../fixtures/exp12.toml")),
    ("exp13", include_str!("../fixtures/exp13.toml")),
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown fixture {id:?}; available: {}", .available.join(", "))]
    UnknownFixture { id: String, available: Vec<String> },
    #[error("unknown experiment {id:?}; available: {}", .available.join(", "))]
    UnknownExperiment { id: String, available: Vec<String> },
    #[error("dataset {id}: {source}")]
    Format {
        id: String,
        #[source]
        source: FormatError,
    },
    #[error("dataset {id}: {message}")]
    Invalid { id: String, message: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Nosig(#[from] NosigError),
}

/// Setting occurrence counts (no outcomes recorded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrences {
    pub caption: String,
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    /// Printed grand total.
    #[serde(default)]
    pub total: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub label: String,
    /// Weighted counts in column order.
    pub n: [f64; 4],
    /// Printed (unsquared) errors.
    pub e: [f64; 4],
}

impl WeightedRow {
    /// Cells as a 2×2 with rows by the first setting, columns by the second.
    pub fn counts(&self) -> Result<WeightedCounts, StatsError> {
        WeightedCounts::from_n_and_e(
            [[self.n[0], self.n[1]], [self.n[2], self.n[3]]],
            [[self.e[0], self.e[1]], [self.e[2], self.e[3]]],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTable {
    pub caption: String,
    /// Setting tuples of the four cells, e.g. `["00", "01", "10", "11"]`.
    pub columns: Vec<String>,
    pub rows: Vec<WeightedRow>,
}

/// A computation whose results are compared to published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Analysis {
    TwoParty {
        #[serde(default)]
        correction: Option<u32>,
        /// Reference label for per-bin tests on multi-label outcomes.
        #[serde(default)]
        reference: Option<String>,
    },
    ThreeParty {
        edges: Vec<[String; 2]>,
        #[serde(default)]
        correction: Option<u32>,
    },
    DetectorAsymmetry,
    Product {
        settings: [String; 4],
    },
    Equality {
        rows: Vec<String>,
        cols: Vec<String>,
    },
    Correlation {
        pair: [String; 2],
    },
    Weighted,
    Uniformity,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    #[default]
    Chi2,
    PRaw,
    PCorrected,
}

impl Quantity {
    pub fn of(self, r: &Chi2Result) -> f64 {
        match self {
            Quantity::Chi2 => r.chi2,
            Quantity::PRaw => r.p_raw,
            Quantity::PCorrected => r.p_corrected,
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Chi2 => "chi2",
            Quantity::PRaw => "p_raw",
            Quantity::PCorrected => "p_corr",
        })
    }
}

/// Accepted deviation: the largest of an absolute bound, a relative bound,
/// and (optionally) half a unit in the last printed digit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    #[serde(default)]
    pub abs: f64,
    #[serde(default)]
    pub rel: f64,
    #[serde(default)]
    pub half_digit: bool,
}

impl Tolerance {
    pub fn width(&self, printed: &str) -> f64 {
        let v: f64 = printed.parse().unwrap_or(0.0);
        let mut w = self.abs.max(self.rel * v.abs());
        if self.half_digit {
            w = w.max(half_unit(printed));
        }
        w
    }
}

/// Half a unit in the last printed digit: `0.02` → 0.005, `5.2e-5` → 5e-7.
pub fn half_unit(printed: &str) -> f64 {
    let s = printed.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().unwrap_or(0)),
        None => (s, 0),
    };
    let decimals = mantissa.find('.').map_or(0, |i| mantissa.len() - i - 1) as i32;
    0.5 * 10f64.powi(exp - decimals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedValue {
    /// Test descriptor as produced by the analyses.
    pub test: String,
    /// Value as printed.
    pub value: String,
    #[serde(default)]
    pub quantity: Quantity,
    pub tolerance: Tolerance,
    /// Descriptor the value matches if the printed label is swapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_test: Option<String>,
    /// Caption or sentence the value is quoted from.
    pub source: String,
}

impl PublishedValue {
    pub fn number(&self) -> f64 {
        self.value.parse().unwrap_or(f64::NAN)
    }
}

/// One dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub parties: Vec<Party>,
    #[serde(default)]
    pub tables: Vec<TableEntry>,
    #[serde(default)]
    pub occurrences: Option<Occurrences>,
    #[serde(default)]
    pub weighted: Option<WeightedTable>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub published: Vec<PublishedValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixtureData {
    Counts(CountTable),
    Weighted(WeightedTable),
    Occurrences(Occurrences),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub id: String,
    /// Caption of the printed source table.
    pub caption: String,
    pub role: TableRole,
    pub data: FixtureData,
    /// Trials per settings row, where printed.
    pub trials: Vec<(String, u64)>,
    /// Published values of the whole dataset.
    pub published: Vec<PublishedValue>,
}

impl Fixture {
    pub fn table(&self) -> Option<&CountTable> {
        match &self.data {
            FixtureData::Counts(t) => Some(t),
            _ => None,
        }
    }
}

/// A parsed dataset with its count tables built.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub file: DatasetFile,
    layout: Option<PartyLayout>,
    tables: Vec<CountTable>,
}

/// A cell of a printed table that disagrees with the canonical data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// Printed fixture id.
    pub fixture: String,
    /// Canonical fixture id it was compared against.
    pub against: String,
    pub settings: String,
    pub column: String,
    pub printed: u64,
    pub derived: u64,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {} col {}: printed {}, {} gives {}",
            self.fixture,
            self.settings,
            if self.column.is_empty() {
                "-"
            } else {
                &self.column
            },
            self.printed,
            self.against,
            self.derived
        )
    }
}

/// A computed test result, with causal status where the battery assigns one.
#[derive(Debug, Clone, PartialEq)]
pub struct Computed {
    pub descriptor: String,
    pub result: Option<Chi2Result>,
    pub status: Option<CausalStatus>,
}

impl Dataset {
    pub fn parse(id: &str, text: &str) -> Result<Self, DatasetError> {
        let file: DatasetFile = toml::from_str(text).map_err(|e| DatasetError::Format {
            id: id.to_string(),
            source: FormatError::Toml(e),
        })?;
        let layout = if file.parties.is_empty() {
            None
        } else {
            Some(
                PartyLayout::new(file.parties.clone()).map_err(|source| DatasetError::Format {
                    id: id.to_string(),
                    source: FormatError::Table {
                        table: "<layout>".into(),
                        source,
                    },
                })?,
            )
        };
        let mut tables = Vec::new();
        if !file.tables.is_empty() {
            let layout = layout.as_ref().ok_or_else(|| DatasetError::Invalid {
                id: id.to_string(),
                message: "tables given without parties".into(),
            })?;
            for t in &file.tables {
                tables.push(t.to_table(layout).map_err(|source| DatasetError::Format {
                    id: id.to_string(),
                    source,
                })?);
            }
        }
        Ok(Dataset {
            file,
            layout,
            tables,
        })
    }

    pub fn id(&self) -> &str {
        &self.file.id
    }

    pub fn layout(&self) -> Option<&PartyLayout> {
        self.layout.as_ref()
    }

    pub fn fixture_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .file
            .tables
            .iter()
            .map(|t| format!("{}.{}", self.file.id, t.name))
            .collect();
        if self.file.occurrences.is_some() {
            ids.push(format!("{}.occurrences", self.file.id));
        }
        if self.file.weighted.is_some() {
            ids.push(format!("{}.weighted", self.file.id));
        }
        ids
    }

    /// Fixture by table name (`full`, `amarg`, `weighted`, ...).
    pub fn fixture(&self, name: &str) -> Option<Fixture> {
        let make = |caption: &str, role, data| Fixture {
            id: format!("{}.{}", self.file.id, name),
            caption: caption.to_string(),
            role,
            data,
            trials: Vec::new(),
            published: self.file.published.clone(),
        };
        match name {
            "occurrences" => {
                let o = self.file.occurrences.as_ref()?;
                return Some(make(
                    &o.caption,
                    TableRole::Canonical,
                    FixtureData::Occurrences(o.clone()),
                ));
            }
            "weighted" => {
                let w = self.file.weighted.as_ref()?;
                return Some(make(
                    &w.caption,
                    TableRole::Canonical,
                    FixtureData::Weighted(w.clone()),
                ));
            }
            _ => {}
        }
        let i = self.file.tables.iter().position(|t| t.name == name)?;
        let entry = &self.file.tables[i];
        let mut f = make(
            &entry.caption,
            entry.role,
            FixtureData::Counts(self.tables[i].clone()),
        );
        let kept_s = self.tables[i]
            .settings_kept()
            .iter()
            .filter(|&&k| k)
            .count();
        f.trials = entry
            .rows
            .iter()
            .filter_map(|r| r.trials.map(|t| (r.settings.labels(kept_s).concat(), t)))
            .collect();
        Some(f)
    }

    /// Canonical count tables (printed cross-check tables excluded).
    pub fn canonical_views(&self) -> Result<TableViews, DatasetError> {
        let views: Vec<CountTable> = self
            .file
            .tables
            .iter()
            .zip(&self.tables)
            .filter(|(e, _)| e.role == TableRole::Canonical)
            .map(|(_, t)| t.clone())
            .collect();
        Ok(TableViews::new(views)?)
    }

    /// Causal graph of the three-party analysis, if any.
    pub fn causal_graph(&self) -> Option<Result<CausalGraph, NosigError>> {
        self.file.analyses.iter().find_map(|a| match a {
            Analysis::ThreeParty { edges, .. } => Some(self.graph(edges)),
            _ => None,
        })
    }

    fn graph(&self, edges: &[[String; 2]]) -> Result<CausalGraph, NosigError> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| NosigError::Graph("dataset has no parties".into()))?;
        let mut nodes: Vec<&str> = Vec::new();
        for p in layout.parties() {
            nodes.push(&p.setting);
            nodes.push(&p.name);
        }
        let e: Vec<(&str, &str)> = edges
            .iter()
            .map(|[a, b]| (a.as_str(), b.as_str()))
            .collect();
        CausalGraph::new(&nodes, &e)
    }

    /// Printed cells that differ from what the canonical tables imply.
    pub fn consistency(&self) -> Result<Vec<Discrepancy>, DatasetError> {
        let Some(layout) = &self.layout else {
            return Ok(Vec::new());
        };
        let n = layout.arity();
        let mut out = Vec::new();
        for (pe, pt) in self.file.tables.iter().zip(&self.tables) {
            let kept_s = pt.settings_kept().iter().filter(|&&k| k).count();
            let kept_o = pt.outcomes_kept().iter().filter(|&&k| k).count();
            let columns: Vec<Vec<String>> = if pe.columns.is_empty() {
                vec![Vec::new()]
            } else {
                pe.columns.iter().map(|c| c.labels(kept_o)).collect()
            };
            for (ce, ct) in self.file.tables.iter().zip(&self.tables) {
                if ce.role != TableRole::Canonical || std::ptr::eq(ce, pe) {
                    continue;
                }
                for row in &pe.rows {
                    let s_labels = expand(pt.settings_kept(), &row.settings.labels(kept_s));
                    let s_refs: Vec<&str> = s_labels.iter().map(String::as_str).collect();
                    let ssel = settings_sel(layout, &s_refs)?;
                    for (col, &printed) in columns.iter().zip(&row.counts) {
                        let o_labels = expand(pt.outcomes_kept(), col);
                        let o_refs: Vec<&str> = o_labels.iter().map(String::as_str).collect();
                        let osel = outcomes_sel(layout, &o_refs)?;
                        if ssel.len() != n || osel.len() != n || !ct.can_answer(&ssel, &osel) {
                            continue;
                        }
                        let derived = ct.count(&ssel, &osel)?;
                        if derived != printed {
                            out.push(Discrepancy {
                                fixture: format!("{}.{}", self.file.id, pe.name),
                                against: format!("{}.{}", self.file.id, ce.name),
                                settings: s_labels.concat(),
                                column: o_labels.concat(),
                                printed,
                                derived,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Run every analysis listed in the dataset, in order.
    pub fn run_analyses(&self) -> Result<Vec<Computed>, DatasetError> {
        let mut out = Vec::new();
        for a in &self.file.analyses {
            match a {
                Analysis::TwoParty {
                    correction,
                    reference,
                } => {
                    let views = self.canonical_views()?;
                    let opts = BatteryOptions {
                        multibin: MultiBin::PerBin {
                            reference: reference.clone(),
                        },
                        correction: *correction,
                    };
                    push_battery(
                        &mut out,
                        &two_party_battery(&views, EfficiencyModel::SettingLocal, &opts)?,
                    );
                }
                Analysis::ThreeParty { edges, correction } => {
                    let views = self.canonical_views()?;
                    let opts = BatteryOptions {
                        correction: *correction,
                        ..BatteryOptions::default()
                    };
                    push_battery(
                        &mut out,
                        &three_party_battery(&views, &self.graph(edges)?, &opts)?,
                    );
                }
                Analysis::DetectorAsymmetry => {
                    push_battery(
                        &mut out,
                        &detector_asymmetry_check(&self.canonical_views()?)?,
                    );
                }
                Analysis::Product { settings } => {
                    let q = [&settings[0], &settings[1], &settings[2], &settings[3]]
                        .map(String::as_str);
                    push_single(
                        &mut out,
                        product_condition_check(&self.canonical_views()?, q)?,
                    );
                }
                Analysis::Equality { rows, cols } => {
                    let r: Vec<&str> = rows.iter().map(String::as_str).collect();
                    let c: Vec<&str> = cols.iter().map(String::as_str).collect();
                    let spec = EqualitySpec::new(&r, &c);
                    push_single(
                        &mut out,
                        outcome_efficiency_check(&self.canonical_views()?, &spec)?,
                    );
                }
                Analysis::Correlation { pair } => {
                    let p = [pair[0].as_str(), pair[1].as_str()];
                    push_single(
                        &mut out,
                        correlation_consistency_check(&self.canonical_views()?, p)?,
                    );
                }
                Analysis::Weighted => {
                    let w = self
                        .file
                        .weighted
                        .as_ref()
                        .ok_or_else(|| DatasetError::Invalid {
                            id: self.file.id.clone(),
                            message: "weighted analysis without a weighted table".into(),
                        })?;
                    for row in &w.rows {
                        let r = weighted_chi2(&row.counts()?)?
                            .with_descriptor(format!("ph={}", row.label));
                        push_single(&mut out, r);
                    }
                }
                Analysis::Uniformity => {
                    let o =
                        self.file
                            .occurrences
                            .as_ref()
                            .ok_or_else(|| DatasetError::Invalid {
                                id: self.file.id.clone(),
                                message: "uniformity analysis without occurrences".into(),
                            })?;
                    push_single(
                        &mut out,
                        uniformity_chi2(&o.counts)?.with_descriptor("uniform occurrences"),
                    );
                }
            }
        }
        Ok(out)
    }

    /// Compare every published value with its computed counterpart; computed
    /// tests without a published value are listed as informational.
    pub fn compare(&self) -> Result<Vec<Comparison>, DatasetError> {
        let computed = self.run_analyses()?;
        let find = |d: &str| computed.iter().find(|c| c.descriptor == d);
        let mut out = Vec::new();
        for pv in &self.file.published {
            let published = pv.number();
            let tol = pv.tolerance.width(&pv.value);
            let value = |d: &str| {
                find(d)
                    .and_then(|c| c.result.as_ref())
                    .map(|r| pv.quantity.of(r))
            };
            let primary = value(&pv.test);
            let mut cmp = Comparison {
                dataset: self.file.id.clone(),
                test: pv.test.clone(),
                quantity: pv.quantity,
                computed: primary,
                published: Some(pv.value.clone()),
                delta: primary.map(|c| (c - published).abs()),
                tolerance: Some(tol),
                status: ComparisonStatus::Fail,
                matched: None,
            };
            if cmp.delta.is_some_and(|d| d <= tol) {
                cmp.status = ComparisonStatus::Pass;
            } else if let Some(alt) = &pv.alt_test {
                if let Some(c) = value(alt).filter(|c| (c - published).abs() <= tol) {
                    cmp.status = ComparisonStatus::Relabeled;
                    cmp.matched = Some(alt.clone());
                    cmp.computed = Some(c);
                    cmp.delta = Some((c - published).abs());
                }
            }
            out.push(cmp);
        }
        for c in &computed {
            if self.file.published.iter().any(|p| p.test == c.descriptor) {
                continue;
            }
            out.push(Comparison {
                dataset: self.file.id.clone(),
                test: c.descriptor.clone(),
                quantity: Quantity::Chi2,
                computed: c.result.as_ref().map(|r| r.chi2),
                published: None,
                delta: None,
                tolerance: None,
                status: ComparisonStatus::Info,
                matched: None,
            });
        }
        Ok(out)
    }
}

fn expand(kept: &[bool], labels: &[String]) -> Vec<String> {
    let mut it = labels.iter();
    kept.iter()
        .map(|&k| {
            if k {
                it.next().cloned().unwrap_or_default()
            } else {
                "*".to_string()
            }
        })
        .collect()
}

fn push_battery(out: &mut Vec<Computed>, report: &TestBatteryReport) {
    for e in &report.entries {
        out.push(Computed {
            descriptor: e.descriptor(),
            result: e.chi2().cloned(),
            status: Some(e.status),
        });
    }
}

fn push_single(out: &mut Vec<Computed>, r: Chi2Result) {
    out.push(Computed {
        descriptor: r.descriptor.clone(),
        result: Some(r),
        status: None,
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonStatus {
    Pass,
    Fail,
    /// Matches the published value under the alternate label only.
    Relabeled,
    /// Computed without a published counterpart.
    Info,
}

impl fmt::Display for ComparisonStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparisonStatus::Pass => "PASS",
            ComparisonStatus::Fail => "FAIL",
            ComparisonStatus::Relabeled => "RELABELED",
            ComparisonStatus::Info => "info",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: String,
    pub test: String,
    pub quantity: Quantity,
    pub computed: Option<f64>,
    pub published: Option<String>,
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: ComparisonStatus,
    /// Descriptor actually matched for relabeled values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub experiment: String,
    pub comparisons: Vec<Comparison>,
    pub discrepancies: Vec<Discrepancy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ReproductionReport {
    /// No published value outside its tolerance.
    pub fn passed(&self) -> bool {
        !self
            .comparisons
            .iter()
            .any(|c| c.status == ComparisonStatus::Fail)
    }

    pub fn count(&self, status: ComparisonStatus) -> usize {
        self.comparisons
            .iter()
            .filter(|c| c.status == status)
            .count()
    }

    pub fn find(&self, dataset: &str, test: &str, quantity: Quantity) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| {
            c.dataset == dataset
                && c.test == test
                && c.quantity == quantity
                && c.published.is_some()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ReproductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "reproduction of {}", self.experiment)?;
        writeln!(
            f,
            "{:<10} {:<36} {:<7} {:>12} {:>10} {:>10} {:>9}  status",
            "dataset", "test", "qty", "computed", "published", "|delta|", "tol"
        )?;
        let num = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for c in &self.comparisons {
            let computed = c
                .computed
                .map_or_else(|| "n/a".to_string(), crate::nosig::format_chi2);
            write!(
                f,
                "{:<10} {:<36} {:<7} {:>12} {:>10} {:>10} {:>9}  {}",
                c.dataset,
                c.test,
                c.quantity,
                computed,
                c.published.as_deref().unwrap_or("-"),
                num(c.delta),
                num(c.tolerance),
                c.status
            )?;
            if let Some(m) = &c.matched {
                write!(f, " (matches {m})")?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "{} pass, {} relabeled, {} fail, {} informational",
            self.count(ComparisonStatus::Pass),
            self.count(ComparisonStatus::Relabeled),
            self.count(ComparisonStatus::Fail),
            self.count(ComparisonStatus::Info)
        )?;
        for d in &self.discrepancies {
            writeln!(f, "printed table discrepancy: {d}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

pub fn dataset_ids() -> Vec<&'static str> {
    SOURCES.iter().map(|(id, _)| *id).collect()
}

/// Raw fixture text of a dataset.
pub fn dataset_source(id: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(i, _)| *i == id).map(|(_, s)| *s)
}

pub fn load_dataset(id: &str) -> Result<Dataset, DatasetError> {
    let text = dataset_source(id).ok_or_else(|| DatasetError::UnknownExperiment {
        id: id.to_string(),
        available: dataset_ids().iter().map(|s| s.to_string()).collect(),
    })?;
    Dataset::parse(id, text)
}

pub fn fixture_ids() -> Vec<String> {
    let mut out = Vec::new();
    for id in dataset_ids() {
        if let Ok(d) = load_dataset(id) {
            out.extend(d.fixture_ids());
        }
    }
    out
}

pub fn load_fixture(id: &str) -> Result<Fixture, DatasetError> {
    let unknown = || DatasetError::UnknownFixture {
        id: id.to_string(),
        available: fixture_ids(),
    };
    let (ds, name) = id.rsplit_once('.').ok_or_else(unknown)?;
    if dataset_source(ds).is_none() {
        return Err(unknown());
    }
    load_dataset(ds)?.fixture(name).ok_or_else(unknown)
}

/// Experiment ids accepted by [`reproduce_report`]: `4`, `exp4`, `exp4.hrn1`.
pub fn experiment_ids() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in dataset_ids() {
        let base = id
            .split('.')
            .next()
            .unwrap_or(id)
            .trim_start_matches("exp")
            .to_string();
        if !out.contains(&base) {
            out.push(base);
        }
    }
    out
}

fn datasets_for(experiment: &str) -> Vec<&'static str> {
    let key = if experiment.chars().all(|c| c.is_ascii_digit()) && !experiment.is_empty() {
        format!("exp{experiment}")
    } else {
        experiment.to_string()
    };
    dataset_ids()
        .into_iter()
        .filter(|id| {
            *id == key
                || id
                    .strip_prefix(key.as_str())
                    .is_some_and(|r| r.starts_with('.'))
        })
        .collect()
}

/// Run the analyses of an experiment and compare with its published values.
pub fn reproduce_report(experiment: &str) -> Result<ReproductionReport, DatasetError> {
    let ids = datasets_for(experiment);
    if ids.is_empty() {
        return Err(DatasetError::UnknownExperiment {
            id: experiment.to_string(),
            available: experiment_ids(),
        });
    }
    let mut report = ReproductionReport {
        experiment: experiment.to_string(),
        comparisons: Vec::new(),
        discrepancies: Vec::new(),
        notes: Vec::new(),
    };
    for id in ids {
        let d = load_dataset(id)?;
        report.comparisons.extend(d.compare()?);
        report.discrepancies.extend(d.consistency()?);
        report
            .notes
            .extend(d.file.notes.iter().map(|n| format!("{id}: {n}")));
    }
    Ok(report)
}

/// Printed-table discrepancies of an experiment.
pub fn consistency_report(experiment: &str) -> Result<Vec<Discrepancy>, DatasetError> {
    let ids = datasets_for(experiment);
    if ids.is_empty() {
        return Err(DatasetError::UnknownExperiment {
            id: experiment.to_string(),
            available: experiment_ids(),
        });
    }
    let mut out = Vec::new();
    for id in ids {
        out.extend(load_dataset(id)?.consistency()?);
    }
    Ok(out)
}
