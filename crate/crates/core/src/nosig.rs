//! No-signaling test batteries under detection-efficiency models.
//!
//! Under [`EfficiencyModel::SettingLocal`] the coincidence probability is
//! p(AB|XY) = p̃(AB|XY)·η_a(X)·η_b(Y). The efficiencies cancel from the
//! conditional distribution of one party's outcome given the *remote* choice,
//! so B must be independent of X at fixed Y (and A of Y at fixed X). Each
//! battery slices the data into contingency tables and runs Pearson χ² on
//! them, one test per (choice, outcome, conditioning) combination.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{bonferroni, pearson_chi2, Chi2Result, CorrectionPolicy, StatsError};
use crate::tables::{
    slice, split_tuple, ColSpec, Contingency, Marginals, PartyLayout, RowSpec, Sel, TableError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NosigError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("battery needs {expected} parties, table has {found}")]
    Arity { expected: usize, found: usize },
    #[error("no coincidences recorded for setting combinations: {}", .0.join(", "))]
    MissingSettings(Vec<String>),
    #[error("{0}")]
    Unsupported(String),
    #[error("settings {0} do not form an identity forced by setting-local efficiencies")]
    NotForced(String),
    #[error("setting tuples must be distinct: {0}")]
    Duplicate(String),
    #[error("M = N·E is negative ({m}) at {setting}")]
    NegativeCorrelation { setting: String, m: i64 },
    #[error("party {0} must have binary outcomes")]
    NotBinary(String),
    #[error("causal graph: {0}")]
    Graph(String),
    #[error("party {party}: reference outcome {label:?} is not in the alphabet")]
    Reference { party: String, label: String },
}

/// How detection probability is assumed to factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyModel {
    /// η depends only on the local setting.
    SettingLocal,
    /// η depends only on the local outcome.
    OutcomeLocal,
    /// η depends on the local setting and outcome.
    Combined,
}

impl FromStr for EfficiencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "setting-local" => Ok(EfficiencyModel::SettingLocal),
            "outcome-local" => Ok(EfficiencyModel::OutcomeLocal),
            "combined" => Ok(EfficiencyModel::Combined),
            other => Err(format!(
                "unknown efficiency model {other:?} (expected setting-local, outcome-local or combined)"
            )),
        }
    }
}

impl fmt::Display for EfficiencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EfficiencyModel::SettingLocal => "setting-local",
            EfficiencyModel::OutcomeLocal => "outcome-local",
            EfficiencyModel::Combined => "combined",
        })
    }
}

/// Allowed influences between choices and outcomes, by variable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

impl CausalGraph {
    pub fn new(nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self, NosigError> {
        let nodes: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
        for (a, b) in edges {
            for n in [a, b] {
                if !nodes.iter().any(|x| x == n) {
                    return Err(NosigError::Graph(format!(
                        "edge references undeclared node {n:?}"
                    )));
                }
            }
        }
        let g = CausalGraph {
            nodes,
            edges: edges
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        };
        for n in &g.nodes {
            if g.edges.iter().any(|(a, _)| a == n) && g.successors_reach(n, n) {
                return Err(NosigError::Graph(format!("cycle through {n:?}")));
            }
        }
        Ok(g)
    }

    /// Only setting → own-outcome edges.
    pub fn local(layout: &PartyLayout) -> Self {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for p in layout.parties() {
            nodes.push(p.setting.clone());
            nodes.push(p.name.clone());
            edges.push((p.setting.clone(), p.name.clone()));
        }
        CausalGraph { nodes, edges }
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    fn successors_reach(&self, from: &str, to: &str) -> bool {
        let mut stack: Vec<&str> = self
            .edges
            .iter()
            .filter(|(a, _)| a == from)
            .map(|(_, b)| b.as_str())
            .collect();
        let mut seen: Vec<&str> = Vec::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.contains(&n) {
                continue;
            }
            seen.push(n);
            stack.extend(
                self.edges
                    .iter()
                    .filter(|(a, _)| a == n)
                    .map(|(_, b)| b.as_str()),
            );
        }
        false
    }

    /// Whether `choice` may influence `outcome` (directed path).
    pub fn allows(&self, choice: &str, outcome: &str) -> bool {
        self.successors_reach(choice, outcome)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CausalStatus {
    /// Influence permitted; dependence is not a violation.
    Allowed,
    /// Influence forbidden; dependence signals a violation of the model.
    Forbidden,
}

impl fmt::Display for CausalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CausalStatus::Allowed => "ALLOWED",
            CausalStatus::Forbidden => "FORBIDDEN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Computed(Chi2Result),
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryEntry {
    /// Choice (setting) name.
    pub choice: String,
    /// Outcome (party) name.
    pub outcome: String,
    /// `[tested bin, reference bin]` for per-bin tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<[String; 2]>,
    /// Fixed (setting name, label) pairs, in party order.
    pub conditioning: Vec<(String, String)>,
    pub status: CausalStatus,
    pub result: TestOutcome,
}

impl BatteryEntry {
    /// Entries of single checks (empty `outcome`) carry the check's
    /// descriptor in `choice`.
    pub fn descriptor(&self) -> String {
        if self.outcome.is_empty() {
            return self.choice.clone();
        }
        descriptor(
            &self.choice,
            &self.outcome,
            self.bins.as_ref(),
            &self.conditioning,
        )
    }

    pub fn chi2(&self) -> Option<&Chi2Result> {
        match &self.result {
            TestOutcome::Computed(r) => Some(r),
            TestOutcome::Aborted { .. } => None,
        }
    }

    /// Conditioning values only, e.g. `10` for `X=1,Z=0`.
    pub fn conditioning_key(&self) -> String {
        let v: Vec<&str> = self.conditioning.iter().map(|(_, l)| l.as_str()).collect();
        crate::tables::join_labels(&v)
    }
}

fn descriptor(
    choice: &str,
    outcome: &str,
    bins: Option<&[String; 2]>,
    cond: &[(String, String)],
) -> String {
    let mut s = format!("{choice}~{outcome}");
    if let Some([b, r]) = bins {
        let _ = write!(s, "[{b}:{r}]");
    }
    if !cond.is_empty() {
        let c: Vec<String> = cond.iter().map(|(n, l)| format!("{n}={l}")).collect();
        let _ = write!(s, " | {}", c.join(","));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestBatteryReport {
    pub title: String,
    /// Bonferroni multiplier applied to every computed entry.
    pub multiplier: u32,
    pub entries: Vec<BatteryEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TestBatteryReport {
    fn assemble(
        title: String,
        entries: Vec<BatteryEntry>,
        correction: Option<u32>,
    ) -> Result<Self, NosigError> {
        let mut r = TestBatteryReport {
            title,
            multiplier: 1,
            entries,
            notes: Vec::new(),
        };
        let m = correction.unwrap_or(r.entries.len().max(1) as u32);
        r.apply_correction(CorrectionPolicy::new(m)?);
        Ok(r)
    }

    /// Report over standalone checks, e.g. product or equality checks.
    pub fn from_checks(
        title: &str,
        results: Vec<Chi2Result>,
        status: CausalStatus,
        correction: Option<u32>,
    ) -> Result<Self, NosigError> {
        let entries = results
            .into_iter()
            .map(|r| BatteryEntry {
                choice: r.descriptor.clone(),
                outcome: String::new(),
                bins: None,
                conditioning: Vec::new(),
                status,
                result: TestOutcome::Computed(r),
            })
            .collect();
        TestBatteryReport::assemble(title.to_string(), entries, correction)
    }

    pub fn apply_correction(&mut self, policy: CorrectionPolicy) {
        self.multiplier = policy.multiplier;
        for e in &mut self.entries {
            if let TestOutcome::Computed(r) = &e.result {
                e.result = TestOutcome::Computed(bonferroni(r, policy));
            }
        }
    }

    pub fn get(&self, descriptor: &str) -> Option<&BatteryEntry> {
        self.entries.iter().find(|e| e.descriptor() == descriptor)
    }

    pub fn min_corrected_p(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.chi2())
            .map(|r| r.p_corrected)
            .fold(None, |acc: Option<f64>, p| {
                Some(acc.map_or(p, |a| a.min(p)))
            })
    }

    /// Descriptor → χ², for order-free comparisons.
    pub fn chi2_map(&self) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .filter_map(|e| e.chi2().map(|r| (e.descriptor(), r.chi2)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// χ² pivot table: rows are conditioning values, columns tested pairs.
    pub fn render_pivot(&self) -> String {
        let mut cols: Vec<String> = Vec::new();
        let mut rows: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(String, String), String> = BTreeMap::new();
        for e in &self.entries {
            let mut col = format!("{}&{}", e.choice, e.outcome);
            if let Some([b, r]) = &e.bins {
                let _ = write!(col, "[{b}:{r}]");
            }
            let row = e.conditioning_key();
            if !cols.contains(&col) {
                cols.push(col.clone());
            }
            if !rows.contains(&row) {
                rows.push(row.clone());
            }
            let v = match &e.result {
                TestOutcome::Computed(r) => format_chi2(r.chi2),
                TestOutcome::Aborted { .. } => "n/a".to_string(),
            };
            cells.insert((row, col), v);
        }
        let mut out = String::new();
        let _ = write!(out, "{:>8}", "");
        for c in &cols {
            let _ = write!(out, " {:>12}", c);
        }
        out.push('\n');
        for r in &rows {
            let _ = write!(out, "{:>8}", if r.is_empty() { "-" } else { r });
            for c in &cols {
                let v = cells
                    .get(&(r.clone(), c.clone()))
                    .map(String::as_str)
                    .unwrap_or("");
                let _ = write!(out, " {:>12}", v);
            }
            out.push('\n');
        }
        out
    }
}

/// Three significant figures for moderate values, scientific for tiny ones.
pub fn format_chi2(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.2e}")
    } else if x.abs() >= 100.0 {
        format!("{x:.2}")
    } else {
        format!("{x:.4}")
    }
}

impl fmt::Display for TestBatteryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} ({} tests, correction x{})",
            self.title,
            self.entries.len(),
            self.multiplier
        )?;
        writeln!(
            f,
            "{:<28} {:<9} {:>12} {:>4} {:>11} {:>11}",
            "test", "status", "chi2", "dof", "p_raw", "p_corr"
        )?;
        for e in &self.entries {
            match &e.result {
                TestOutcome::Computed(r) => writeln!(
                    f,
                    "{:<28} {:<9} {:>12} {:>4} {:>11.3e} {:>11.3e}{}",
                    e.descriptor(),
                    e.status,
                    format_chi2(r.chi2),
                    r.dof,
                    r.p_raw,
                    r.p_corrected,
                    if r.low_expected() {
                        "  (expected count < 5)"
                    } else {
                        ""
                    }
                )?,
                TestOutcome::Aborted { reason } => writeln!(
                    f,
                    "{:<28} {:<9} aborted: {}",
                    e.descriptor(),
                    e.status,
                    reason
                )?,
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

/// Treatment of outcome alphabets with more than two labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiBin {
    /// One 2×2 per label against a reference label. The reference defaults to
    /// the party's no-detection label, else its first label.
    PerBin { reference: Option<String> },
    /// A single 2×k test over every label.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryOptions {
    pub multibin: MultiBin,
    /// Overrides the default multiplier (the battery size).
    pub correction: Option<u32>,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            multibin: MultiBin::PerBin { reference: None },
            correction: None,
        }
    }
}

fn check_settings_present<M: Marginals + ?Sized>(data: &M) -> Result<(), NosigError> {
    let layout = data.layout();
    let n = layout.arity();
    let mut missing = Vec::new();
    for s in layout.enumerate_settings() {
        let sel: Vec<Sel> = s.iter().map(|&i| Sel::At(i)).collect();
        if data.count(&sel, &Sel::all(n))? == 0 {
            missing.push(layout.settings_label(&s));
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(NosigError::MissingSettings(missing))
    }
}

/// Optional (bin, reference) labels and the outcome indices they cover.
type ColumnGroup = (Option<[String; 2]>, Vec<usize>);

/// Column groups for one tested outcome: `(bins label, outcome indices)`.
fn column_groups(
    layout: &PartyLayout,
    q: usize,
    mode: &MultiBin,
) -> Result<Vec<ColumnGroup>, NosigError> {
    let party = layout.party(q);
    let k = party.outcomes.len();
    if k <= 2 {
        return Ok(vec![(None, (0..k).collect())]);
    }
    match mode {
        MultiBin::Full => Ok(vec![(None, (0..k).collect())]),
        MultiBin::PerBin { reference } => {
            let r = match reference {
                Some(l) => party
                    .outcome_index(l)
                    .ok_or_else(|| NosigError::Reference {
                        party: party.name.clone(),
                        label: l.clone(),
                    })?,
                None => party.no_detection_index().unwrap_or(0),
            };
            Ok((0..k)
                .filter(|&b| b != r)
                .map(|b| {
                    (
                        Some([party.outcomes[b].clone(), party.outcomes[r].clone()]),
                        vec![b, r],
                    )
                })
                .collect())
        }
    }
}

/// χ² of choice `p` against outcome `q`, the other settings fixed by `fixed`.
fn independence_entry<M: Marginals + ?Sized>(
    data: &M,
    p: usize,
    q: usize,
    fixed: &[usize],
    bins: Option<[String; 2]>,
    outcome_idx: &[usize],
    status: CausalStatus,
) -> Result<BatteryEntry, NosigError> {
    let layout = data.layout();
    let n = layout.arity();
    let rows: Vec<RowSpec> = (0..layout.party(p).settings.len())
        .map(|v| {
            RowSpec(
                (0..n)
                    .map(|i| {
                        if i == p {
                            Sel::At(v)
                        } else {
                            Sel::At(fixed[i])
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let cols: Vec<ColSpec> = outcome_idx
        .iter()
        .map(|&b| {
            ColSpec(
                (0..n)
                    .map(|i| if i == q { Sel::At(b) } else { Sel::Any })
                    .collect(),
            )
        })
        .collect();
    let conditioning = (0..n)
        .filter(|&i| i != p)
        .map(|i| {
            (
                layout.party(i).setting.clone(),
                layout.party(i).settings[fixed[i]].clone(),
            )
        })
        .collect();
    let result = match slice(data, &rows, &cols) {
        Ok(t) => match pearson_chi2(&t) {
            Ok(r) => TestOutcome::Computed(r),
            Err(e) => TestOutcome::Aborted {
                reason: e.to_string(),
            },
        },
        Err(TableError::NoView(q)) => return Err(TableError::NoView(q).into()),
        Err(e) => TestOutcome::Aborted {
            reason: e.to_string(),
        },
    };
    let mut entry = BatteryEntry {
        choice: layout.party(p).setting.clone(),
        outcome: layout.party(q).name.clone(),
        bins,
        conditioning,
        status,
        result,
    };
    let d = entry.descriptor();
    if let TestOutcome::Computed(r) = &mut entry.result {
        r.descriptor = d;
    }
    Ok(entry)
}

/// Tests of each party's outcome against every *other* party's choice, with
/// the remaining choices fixed. Valid under setting-local efficiencies only.
pub fn two_party_battery<M: Marginals + ?Sized>(
    data: &M,
    model: EfficiencyModel,
    options: &BatteryOptions,
) -> Result<TestBatteryReport, NosigError> {
    let layout = data.layout();
    if layout.arity() != 2 {
        return Err(NosigError::Arity {
            expected: 2,
            found: layout.arity(),
        });
    }
    if model != EfficiencyModel::SettingLocal {
        return Err(NosigError::Unsupported(format!(
            "under the {model} model efficiencies do not cancel from the remote-choice marginals; \
             test the ideal-model equalities with outcome_efficiency_check instead"
        )));
    }
    check_settings_present(data)?;
    let mut entries = Vec::new();
    // A vs Y at each X, then B vs X at each Y.
    for q in 0..2 {
        let p = 1 - q;
        for (bins, idx) in column_groups(layout, q, &options.multibin)? {
            for f in 0..layout.party(q).settings.len() {
                let mut fixed = vec![0; 2];
                fixed[q] = f;
                entries.push(independence_entry(
                    data,
                    p,
                    q,
                    &fixed,
                    bins.clone(),
                    &idx,
                    CausalStatus::Forbidden,
                )?);
            }
        }
    }
    TestBatteryReport::assemble(
        format!("two-party no-signaling battery ({model})"),
        entries,
        options.correction,
    )
}

/// Every (choice, outcome) pair, each at every combination of the other
/// choices, labelled by the causal graph.
pub fn three_party_battery<M: Marginals + ?Sized>(
    data: &M,
    graph: &CausalGraph,
    options: &BatteryOptions,
) -> Result<TestBatteryReport, NosigError> {
    let layout = data.layout();
    if layout.arity() != 3 {
        return Err(NosigError::Arity {
            expected: 3,
            found: layout.arity(),
        });
    }
    check_settings_present(data)?;
    let mut entries = Vec::new();
    for p in 0..3 {
        for q in 0..3 {
            let status = if graph.allows(&layout.party(p).setting, &layout.party(q).name) {
                CausalStatus::Allowed
            } else {
                CausalStatus::Forbidden
            };
            for (bins, idx) in column_groups(layout, q, &options.multibin)? {
                for s in layout.enumerate_settings() {
                    if s[p] != 0 {
                        continue;
                    }
                    entries.push(independence_entry(
                        data,
                        p,
                        q,
                        &s,
                        bins.clone(),
                        &idx,
                        status,
                    )?);
                }
            }
        }
    }
    TestBatteryReport::assemble(
        "three-party causal battery".into(),
        entries,
        options.correction,
    )
}

fn tuple_sel(layout: &PartyLayout, tuple: &str) -> Result<Vec<usize>, NosigError> {
    let labels = split_tuple(tuple, layout.arity());
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let outs: Vec<&str> = layout
        .parties()
        .iter()
        .map(|p| p.outcomes[0].as_str())
        .collect();
    Ok(layout.resolve(&refs, &outs, 0)?.0)
}

fn total_at<M: Marginals + ?Sized>(data: &M, s: &[usize]) -> Result<u64, NosigError> {
    let sel: Vec<Sel> = s.iter().map(|&i| Sel::At(i)).collect();
    Ok(data.count(&sel, &Sel::all(s.len()))?)
}

/// χ² on (N(s1), N(s2); N(s3), N(s4)) for an identity N(s1)N(s4) = N(s2)N(s3)
/// forced by setting-local efficiencies.
pub fn product_condition_check<M: Marginals + ?Sized>(
    data: &M,
    quadruple: [&str; 4],
) -> Result<Chi2Result, NosigError> {
    let layout = data.layout();
    let s: Vec<Vec<usize>> = quadruple
        .iter()
        .map(|t| tuple_sel(layout, t))
        .collect::<Result<_, _>>()?;
    for i in 0..4 {
        if s[..i].contains(&s[i]) {
            return Err(NosigError::Duplicate(quadruple.join(",")));
        }
    }
    // Each party's multiset of values must agree between {s1,s4} and {s2,s3}.
    for k in 0..layout.arity() {
        let mut l = [s[0][k], s[3][k]];
        let mut r = [s[1][k], s[2][k]];
        l.sort_unstable();
        r.sort_unstable();
        if l != r {
            return Err(NosigError::NotForced(quadruple.join(",")));
        }
    }
    let n: Vec<f64> = s
        .iter()
        .map(|t| total_at(data, t).map(|x| x as f64))
        .collect::<Result<_, _>>()?;
    let mut t = Contingency::from_rows(&[[n[0], n[1]], [n[2], n[3]]])?;
    t.row_labels = vec![layout.settings_label(&s[0]), layout.settings_label(&s[2])];
    t.col_labels = vec![layout.settings_label(&s[1]), layout.settings_label(&s[3])];
    let desc = format!(
        "N({})N({})=N({})N({})",
        quadruple[0], quadruple[3], quadruple[1], quadruple[2]
    );
    Ok(pearson_chi2(&t)?.with_descriptor(desc))
}

/// Rows (setting tuples) × columns (outcome tuples) whose independence an
/// ideal model predicts once efficiencies depend on choice and outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualitySpec {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

impl EqualitySpec {
    pub fn new(rows: &[&str], cols: &[&str]) -> Self {
        EqualitySpec {
            rows: rows.iter().map(|s| s.to_string()).collect(),
            cols: cols.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Ideal CHSH with p̃(00|10) = p̃(00|11) and p̃(10|10) = p̃(10|11): rows
    /// XY=10,11, columns AB=00,10.
    pub fn ideal_chsh() -> Self {
        EqualitySpec::new(&["10", "11"], &["00", "10"])
    }
}

fn sels_for(layout: &PartyLayout, tuple: &str, outcome: bool) -> Result<Vec<Sel>, NosigError> {
    let labels = split_tuple(tuple, layout.arity());
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    if refs.len() != layout.arity() {
        return Err(TableError::PatternArity {
            expected: layout.arity(),
            found: refs.len(),
        }
        .into());
    }
    Ok(if outcome {
        crate::tables::outcomes_sel(layout, &refs)?
    } else {
        crate::tables::settings_sel(layout, &refs)?
    })
}

pub fn outcome_efficiency_check<M: Marginals + ?Sized>(
    data: &M,
    spec: &EqualitySpec,
) -> Result<Chi2Result, NosigError> {
    let layout = data.layout();
    let rows: Vec<RowSpec> = spec
        .rows
        .iter()
        .map(|r| sels_for(layout, r, false).map(RowSpec))
        .collect::<Result<_, _>>()?;
    let cols: Vec<ColSpec> = spec
        .cols
        .iter()
        .map(|c| sels_for(layout, c, true).map(ColSpec))
        .collect::<Result<_, _>>()?;
    let t = slice(data, &rows, &cols)?;
    let desc = format!(
        "rows {} x cols {}",
        t.row_labels.join(","),
        t.col_labels.join(",")
    );
    Ok(pearson_chi2(&t)?.with_descriptor(desc))
}

/// B against Y at each fixed X. Detector efficiencies on Alice's side change
/// B's marginal only through X, so the rows must agree.
pub fn detector_asymmetry_check<M: Marginals + ?Sized>(
    data: &M,
) -> Result<TestBatteryReport, NosigError> {
    let layout = data.layout();
    if layout.arity() != 2 {
        return Err(NosigError::Arity {
            expected: 2,
            found: layout.arity(),
        });
    }
    check_settings_present(data)?;
    let mut entries = Vec::new();
    for x in 0..layout.party(0).settings.len() {
        entries.push(independence_entry(
            data,
            1,
            1,
            &[x, 0],
            None,
            &[0, 1],
            CausalStatus::Allowed,
        )?);
    }
    TestBatteryReport::assemble("detector asymmetry check".into(), entries, None)
}

/// M = N·E = N_agree − N_disagree at a setting tuple (binary outcomes).
pub fn correlation_count<M: Marginals + ?Sized>(
    data: &M,
    settings: &[usize],
) -> Result<i64, NosigError> {
    let layout = data.layout();
    for p in layout.parties() {
        if p.outcomes.len() != 2 {
            return Err(NosigError::NotBinary(p.name.clone()));
        }
    }
    let sel: Vec<Sel> = settings.iter().map(|&i| Sel::At(i)).collect();
    let mut m = 0i64;
    for o in layout.enumerate_outcomes() {
        let c = data.count(&sel, &o.iter().map(|&i| Sel::At(i)).collect::<Vec<_>>())? as i64;
        let ones = o.iter().filter(|&&b| b == 1).count();
        m += if ones % 2 == 0 { c } else { -c };
    }
    Ok(m)
}

/// χ² on ((M(s1), N(s1)); (M(s2), N(s2))): equal correlations at two setting
/// tuples leave M proportional to N.
pub fn correlation_consistency_check<M: Marginals + ?Sized>(
    data: &M,
    pair: [&str; 2],
) -> Result<Chi2Result, NosigError> {
    let layout = data.layout();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for t in pair {
        let s = tuple_sel(layout, t)?;
        let m = correlation_count(data, &s)?;
        if m < 0 {
            return Err(NosigError::NegativeCorrelation {
                setting: layout.settings_label(&s),
                m,
            });
        }
        rows.push([m as f64, total_at(data, &s)? as f64]);
        labels.push(layout.settings_label(&s));
    }
    if pair[0] == pair[1] {
        return Err(NosigError::Duplicate(pair.join(",")));
    }
    let mut t = Contingency::from_rows(&rows)?;
    t.row_labels = labels;
    t.col_labels = vec!["M".into(), "N".into()];
    Ok(pearson_chi2(&t)?.with_descriptor(format!("M=NE {}~{}", pair[0], pair[1])))
}
