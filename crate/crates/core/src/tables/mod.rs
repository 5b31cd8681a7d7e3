//! Coincidence count tables for two or more parties.
//!
//! A [`CountTable`] stores integer counts on a dense grid indexed by one
//! setting coordinate and one outcome coordinate per party. Any coordinate
//! may be *summed* (the `∗` of a marginal such as `N(0∗∗|000)`), in which case
//! it collapses to a single slot. Published data often only comes as several
//! such marginal views of the same experiment; [`TableViews`] bundles them and
//! answers each query from the most specific view able to.

pub mod eventlog;
pub mod format;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("layout needs at least two parties, got {0}")]
    TooFewParties(usize),
    #[error("party {party}: {which} alphabet is empty")]
    EmptyAlphabet { party: String, which: &'static str },
    #[error("party {party}: duplicate {which} label {label:?}")]
    DuplicateLabel {
        party: String,
        which: &'static str,
        label: String,
    },
    #[error("party {party}: no-detection label {label:?} is not an outcome")]
    UnknownNoDetection { party: String, label: String },
    #[error("duplicate party name {0:?}")]
    DuplicatePartyName(String),
    #[error("record {record}: field {field} has unknown label {label:?}")]
    UnknownLabel {
        record: usize,
        field: String,
        label: String,
    },
    #[error("record {record}: expected {expected} {which}, found {found}")]
    Arity {
        record: usize,
        which: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("pattern has {found} entries, layout has {expected} parties")]
    PatternArity { expected: usize, found: usize },
    #[error("pattern stars every coordinate")]
    NothingKept,
    #[error("{coordinate} of party {party} is already summed in this table")]
    AlreadySummed {
        party: String,
        coordinate: &'static str,
    },
    #[error("no view can answer a query on {0}")]
    NoView(String),
    #[error("views have different layouts")]
    LayoutMismatch,
    #[error("identical {0} selections in slice")]
    IdenticalSelections(&'static str),
    #[error("slice needs at least two rows and two columns")]
    SliceTooSmall,
    #[error("cell {0} is negative or not finite")]
    BadCell(f64),
    #[error("rows have different lengths")]
    BadShape,
}

/// One measuring party: a setting (choice) and an outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Party {
    /// Outcome name, e.g. `A`.
    pub name: String,
    /// Setting name, e.g. `X`.
    pub setting: String,
    pub settings: Vec<String>,
    pub outcomes: Vec<String>,
    /// Outcome label that stands for "no detection" (bin 0 in time-binned data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_detection: Option<String>,
}

impl Party {
    pub fn new(name: &str, setting: &str, settings: &[&str], outcomes: &[&str]) -> Self {
        Party {
            name: name.to_string(),
            setting: setting.to_string(),
            settings: settings.iter().map(|s| s.to_string()).collect(),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            no_detection: None,
        }
    }

    /// Binary settings `0,1` and binary outcomes `0,1`.
    pub fn binary(name: &str, setting: &str) -> Self {
        Party::new(name, setting, &["0", "1"], &["0", "1"])
    }

    pub fn with_no_detection(mut self, label: &str) -> Self {
        self.no_detection = Some(label.to_string());
        self
    }

    pub fn setting_index(&self, label: &str) -> Option<usize> {
        self.settings.iter().position(|s| s == label)
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|s| s == label)
    }

    pub fn no_detection_index(&self) -> Option<usize> {
        self.no_detection
            .as_deref()
            .and_then(|l| self.outcome_index(l))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyLayout {
    parties: Vec<Party>,
}

impl PartyLayout {
    pub fn new(parties: Vec<Party>) -> Result<Self, TableError> {
        if parties.len() < 2 {
            return Err(TableError::TooFewParties(parties.len()));
        }
        let mut names: Vec<&str> = Vec::new();
        for p in &parties {
            for n in [p.name.as_str(), p.setting.as_str()] {
                if names.contains(&n) {
                    return Err(TableError::DuplicatePartyName(n.to_string()));
                }
                names.push(n);
            }
            for (which, alphabet) in [("setting", &p.settings), ("outcome", &p.outcomes)] {
                if alphabet.is_empty() {
                    return Err(TableError::EmptyAlphabet {
                        party: p.name.clone(),
                        which,
                    });
                }
                for (i, l) in alphabet.iter().enumerate() {
                    if alphabet[..i].contains(l) {
                        return Err(TableError::DuplicateLabel {
                            party: p.name.clone(),
                            which,
                            label: l.clone(),
                        });
                    }
                }
            }
            if let Some(nd) = &p.no_detection {
                if p.outcome_index(nd).is_none() {
                    return Err(TableError::UnknownNoDetection {
                        party: p.name.clone(),
                        label: nd.clone(),
                    });
                }
            }
        }
        Ok(PartyLayout { parties })
    }

    /// `n` parties named A, B, C, ... with settings X, Y, Z, ... (binary).
    pub fn binary(n: usize) -> Result<Self, TableError> {
        const OUT: [&str; 4] = ["A", "B", "C", "D"];
        const SET: [&str; 4] = ["X", "Y", "Z", "W"];
        PartyLayout::new(
            (0..n.min(4))
                .map(|i| Party::binary(OUT[i], SET[i]))
                .collect(),
        )
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, i: usize) -> &Party {
        &self.parties[i]
    }

    pub fn arity(&self) -> usize {
        self.parties.len()
    }

    pub fn party_by_name(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }

    pub fn party_by_setting(&self, setting: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.setting == setting)
    }

    /// Number of distinct setting tuples.
    pub fn setting_tuples(&self) -> usize {
        self.parties.iter().map(|p| p.settings.len()).product()
    }

    /// All setting tuples in lexicographic (row-major) order.
    pub fn enumerate_settings(&self) -> Vec<Vec<usize>> {
        mixed_radix(
            &self
                .parties
                .iter()
                .map(|p| p.settings.len())
                .collect::<Vec<_>>(),
        )
    }

    /// All outcome tuples in lexicographic order.
    pub fn enumerate_outcomes(&self) -> Vec<Vec<usize>> {
        mixed_radix(
            &self
                .parties
                .iter()
                .map(|p| p.outcomes.len())
                .collect::<Vec<_>>(),
        )
    }

    /// Map labels to indices; `record` only feeds the error message.
    pub fn resolve(
        &self,
        settings: &[&str],
        outcomes: &[&str],
        record: usize,
    ) -> Result<(Vec<usize>, Vec<usize>), TableError> {
        let n = self.arity();
        for (which, got) in [("settings", settings.len()), ("outcomes", outcomes.len())] {
            if got != n {
                return Err(TableError::Arity {
                    record,
                    which,
                    expected: n,
                    found: got,
                });
            }
        }
        let mut s = Vec::with_capacity(n);
        let mut o = Vec::with_capacity(n);
        for (i, p) in self.parties.iter().enumerate() {
            s.push(
                p.setting_index(settings[i])
                    .ok_or_else(|| TableError::UnknownLabel {
                        record,
                        field: p.setting.clone(),
                        label: settings[i].to_string(),
                    })?,
            );
            o.push(
                p.outcome_index(outcomes[i])
                    .ok_or_else(|| TableError::UnknownLabel {
                        record,
                        field: p.name.clone(),
                        label: outcomes[i].to_string(),
                    })?,
            );
        }
        Ok((s, o))
    }

    /// Reorder parties; `order[i]` is the old index of new party `i`.
    pub fn permuted(&self, order: &[usize]) -> PartyLayout {
        PartyLayout {
            parties: order.iter().map(|&i| self.parties[i].clone()).collect(),
        }
    }

    /// Render a setting tuple as `XY=01` (labels joined, comma-separated if any is longer than one char).
    pub fn settings_label(&self, settings: &[usize]) -> String {
        let names: String = self.parties.iter().map(|p| p.setting.as_str()).collect();
        let labels: Vec<&str> = self
            .parties
            .iter()
            .zip(settings)
            .map(|(p, &s)| p.settings[s].as_str())
            .collect();
        format!("{}={}", names, join_labels(&labels))
    }
}

pub(crate) fn join_labels(labels: &[&str]) -> String {
    if labels.iter().all(|l| l.chars().count() == 1) {
        labels.concat()
    } else {
        labels.join(",")
    }
}

pub(crate) fn mixed_radix(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; dims.len()];
    if dims.contains(&0) {
        return out;
    }
    for _ in 0..total {
        out.push(cur.clone());
        for k in (0..dims.len()).rev() {
            cur[k] += 1;
            if cur[k] < dims[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// Coordinate selector for marginal queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sel {
    /// Sum over the coordinate (`∗`).
    Any,
    At(usize),
}

impl Sel {
    pub fn all(n: usize) -> Vec<Sel> {
        vec![Sel::Any; n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mark {
    Keep,
    Star,
}

/// Which coordinates survive a marginalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalPattern {
    pub settings: Vec<Mark>,
    pub outcomes: Vec<Mark>,
}

impl MarginalPattern {
    /// Keep all settings; outcome marks given by a string such as `"K**"`
    /// (`K`/`k`/any label char keeps, `*` stars).
    pub fn outcomes(marks: &str) -> Self {
        let outcomes: Vec<Mark> = marks
            .chars()
            .map(|c| if c == '*' { Mark::Star } else { Mark::Keep })
            .collect();
        MarginalPattern {
            settings: vec![Mark::Keep; outcomes.len()],
            outcomes,
        }
    }

    pub fn star_all_outcomes(arity: usize) -> Self {
        MarginalPattern {
            settings: vec![Mark::Keep; arity],
            outcomes: vec![Mark::Star; arity],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    layout: PartyLayout,
    settings_kept: Vec<bool>,
    outcomes_kept: Vec<bool>,
    dims: Vec<usize>,
    counts: Vec<u64>,
}

impl CountTable {
    /// All-zero table with every coordinate kept.
    pub fn zeros(layout: PartyLayout) -> Self {
        let n = layout.arity();
        CountTable::zeros_with(layout, vec![true; n], vec![true; n])
    }

    pub fn zeros_with(
        layout: PartyLayout,
        settings_kept: Vec<bool>,
        outcomes_kept: Vec<bool>,
    ) -> Self {
        let dims = dims_for(&layout, &settings_kept, &outcomes_kept);
        let size = dims.iter().product();
        CountTable {
            layout,
            settings_kept,
            outcomes_kept,
            dims,
            counts: vec![0; size],
        }
    }

    pub fn layout(&self) -> &PartyLayout {
        &self.layout
    }

    pub fn arity(&self) -> usize {
        self.layout.arity()
    }

    pub fn settings_kept(&self) -> &[bool] {
        &self.settings_kept
    }

    pub fn outcomes_kept(&self) -> &[bool] {
        &self.outcomes_kept
    }

    pub fn is_full(&self) -> bool {
        self.settings_kept
            .iter()
            .chain(&self.outcomes_kept)
            .all(|&k| k)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn offset(&self, settings: &[usize], outcomes: &[usize]) -> usize {
        let mut off = 0;
        for (k, &i) in settings.iter().chain(outcomes).enumerate() {
            off = off * self.dims[k] + i;
        }
        off
    }

    /// Add `n` at a stored cell. Summed coordinates must be passed as 0.
    pub(crate) fn add(&mut self, settings: &[usize], outcomes: &[usize], n: u64) {
        let off = self.offset(settings, outcomes);
        self.counts[off] += n;
    }

    /// Build from labelled cells. For summed coordinates pass `"*"`.
    pub fn from_cells<'a, I>(
        layout: PartyLayout,
        settings_kept: Vec<bool>,
        outcomes_kept: Vec<bool>,
        cells: I,
    ) -> Result<Self, TableError>
    where
        I: IntoIterator<Item = (Vec<&'a str>, Vec<&'a str>, u64)>,
    {
        let mut t = CountTable::zeros_with(layout, settings_kept, outcomes_kept);
        for (record, (s, o, n)) in cells.into_iter().enumerate() {
            let (si, oi) = t.resolve_stored(&s, &o, record)?;
            t.add(&si, &oi, n);
        }
        Ok(t)
    }

    fn resolve_stored(
        &self,
        settings: &[&str],
        outcomes: &[&str],
        record: usize,
    ) -> Result<(Vec<usize>, Vec<usize>), TableError> {
        let n = self.arity();
        for (which, got) in [("settings", settings.len()), ("outcomes", outcomes.len())] {
            if got != n {
                return Err(TableError::Arity {
                    record,
                    which,
                    expected: n,
                    found: got,
                });
            }
        }
        let mut s = Vec::with_capacity(n);
        let mut o = Vec::with_capacity(n);
        for (i, p) in self.layout.parties.iter().enumerate() {
            s.push(resolve_coord(
                self.settings_kept[i],
                settings[i],
                |l| p.setting_index(l),
                &p.setting,
                record,
            )?);
            o.push(resolve_coord(
                self.outcomes_kept[i],
                outcomes[i],
                |l| p.outcome_index(l),
                &p.name,
                record,
            )?);
        }
        Ok((s, o))
    }

    /// Count at a stored cell given by labels (`"*"` for summed coordinates).
    pub fn get(&self, settings: &[&str], outcomes: &[&str]) -> Result<u64, TableError> {
        let (s, o) = self.resolve_stored(settings, outcomes, 0)?;
        Ok(self.counts[self.offset(&s, &o)])
    }

    /// Whether [`CountTable::count`] can answer this query.
    pub fn can_answer(&self, settings: &[Sel], outcomes: &[Sel]) -> bool {
        settings.len() == self.arity()
            && outcomes.len() == self.arity()
            && settings
                .iter()
                .zip(&self.settings_kept)
                .chain(outcomes.iter().zip(&self.outcomes_kept))
                .all(|(s, &kept)| kept || *s == Sel::Any)
    }

    /// Sum of counts over all cells matching the selectors.
    pub fn count(&self, settings: &[Sel], outcomes: &[Sel]) -> Result<u64, TableError> {
        let n = self.arity();
        if settings.len() != n || outcomes.len() != n {
            return Err(TableError::PatternArity {
                expected: n,
                found: settings.len().min(outcomes.len()),
            });
        }
        let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(2 * n);
        for (k, sel) in settings.iter().chain(outcomes).enumerate() {
            let party = k % n;
            let kept = if k < n {
                self.settings_kept[party]
            } else {
                self.outcomes_kept[party]
            };
            match (sel, kept) {
                (Sel::Any, _) => ranges.push((0, self.dims[k])),
                (Sel::At(i), true) => ranges.push((*i, *i + 1)),
                (Sel::At(_), false) => {
                    return Err(TableError::AlreadySummed {
                        party: self.layout.parties[party].name.clone(),
                        coordinate: if k < n { "setting" } else { "outcome" },
                    })
                }
            }
        }
        let mut total = 0u64;
        let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 >= r.1) {
            return Ok(0);
        }
        loop {
            let mut off = 0;
            for (k, &i) in cur.iter().enumerate() {
                off = off * self.dims[k] + i;
            }
            total += self.counts[off];
            let mut k = cur.len();
            loop {
                if k == 0 {
                    return Ok(total);
                }
                k -= 1;
                cur[k] += 1;
                if cur[k] < ranges[k].1 {
                    break;
                }
                cur[k] = ranges[k].0;
            }
        }
    }

    /// Reorder parties (descriptor relabeling only; counts move with them).
    pub fn permute_parties(&self, order: &[usize]) -> CountTable {
        let layout = self.layout.permuted(order);
        let sk: Vec<bool> = order.iter().map(|&i| self.settings_kept[i]).collect();
        let ok: Vec<bool> = order.iter().map(|&i| self.outcomes_kept[i]).collect();
        let mut out = CountTable::zeros_with(layout, sk, ok);
        let n = self.arity();
        for cell in mixed_radix(&self.dims) {
            let v = self.counts[self.offset(&cell[..n], &cell[n..])];
            let s: Vec<usize> = order.iter().map(|&i| cell[i]).collect();
            let o: Vec<usize> = order.iter().map(|&i| cell[n + i]).collect();
            out.add(&s, &o, v);
        }
        out
    }

    /// Iterate over stored cells as (settings, outcomes, count); summed coordinates read 0.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, u64)> + '_ {
        let n = self.arity();
        mixed_radix(&self.dims).into_iter().map(move |cell| {
            let v = self.counts[self.offset(&cell[..n], &cell[n..])];
            (cell[..n].to_vec(), cell[n..].to_vec(), v)
        })
    }

    /// Stored setting tuples (summed coordinates read 0).
    pub fn stored_settings(&self) -> Vec<Vec<usize>> {
        mixed_radix(&self.dims[..self.arity()])
    }

    /// Stored outcome tuples (summed coordinates read 0).
    pub fn stored_outcomes(&self) -> Vec<Vec<usize>> {
        mixed_radix(&self.dims[self.arity()..])
    }
}

fn resolve_coord(
    kept: bool,
    label: &str,
    index: impl Fn(&str) -> Option<usize>,
    field: &str,
    record: usize,
) -> Result<usize, TableError> {
    match (kept, label) {
        (false, "*") => Ok(0),
        (true, l) => index(l).ok_or_else(|| TableError::UnknownLabel {
            record,
            field: field.to_string(),
            label: l.to_string(),
        }),
        (false, l) => Err(TableError::UnknownLabel {
            record,
            field: field.to_string(),
            label: l.to_string(),
        }),
    }
}

fn dims_for(layout: &PartyLayout, settings_kept: &[bool], outcomes_kept: &[bool]) -> Vec<usize> {
    let s = layout
        .parties
        .iter()
        .zip(settings_kept)
        .map(|(p, &k)| if k { p.settings.len() } else { 1 });
    let o = layout
        .parties
        .iter()
        .zip(outcomes_kept)
        .map(|(p, &k)| if k { p.outcomes.len() } else { 1 });
    s.chain(o).collect()
}

/// Count coincidence events into a table. Every event must conform to the layout.
pub fn build_count_table<I, S>(events: I, layout: &PartyLayout) -> Result<CountTable, TableError>
where
    I: IntoIterator<Item = (Vec<S>, Vec<S>)>,
    S: AsRef<str>,
{
    let mut t = CountTable::zeros(layout.clone());
    for (record, (s, o)) in events.into_iter().enumerate() {
        let s: Vec<&str> = s.iter().map(|x| x.as_ref()).collect();
        let o: Vec<&str> = o.iter().map(|x| x.as_ref()).collect();
        let (si, oi) = layout.resolve(&s, &o, record)?;
        t.add(&si, &oi, 1);
    }
    Ok(t)
}

/// Sum out the starred coordinates.
pub fn marginalize(
    table: &CountTable,
    pattern: &MarginalPattern,
) -> Result<CountTable, TableError> {
    let n = table.arity();
    if pattern.settings.len() != n || pattern.outcomes.len() != n {
        return Err(TableError::PatternArity {
            expected: n,
            found: if pattern.settings.len() != n {
                pattern.settings.len()
            } else {
                pattern.outcomes.len()
            },
        });
    }
    if pattern
        .settings
        .iter()
        .chain(&pattern.outcomes)
        .all(|m| *m == Mark::Star)
    {
        return Err(TableError::NothingKept);
    }
    let mut sk = Vec::with_capacity(n);
    let mut ok = Vec::with_capacity(n);
    for i in 0..n {
        for (mark, kept, out, coordinate) in [
            (
                pattern.settings[i],
                table.settings_kept[i],
                &mut sk,
                "setting",
            ),
            (
                pattern.outcomes[i],
                table.outcomes_kept[i],
                &mut ok,
                "outcome",
            ),
        ] {
            match (mark, kept) {
                (Mark::Keep, false) => {
                    return Err(TableError::AlreadySummed {
                        party: table.layout.parties[i].name.clone(),
                        coordinate,
                    })
                }
                (Mark::Keep, true) => out.push(true),
                (Mark::Star, _) => out.push(false),
            }
        }
    }
    let mut out = CountTable::zeros_with(table.layout.clone(), sk, ok);
    for (s, o, v) in table.cells() {
        let s: Vec<usize> = s
            .iter()
            .zip(&out.settings_kept)
            .map(|(&x, &k)| if k { x } else { 0 })
            .collect();
        let o: Vec<usize> = o
            .iter()
            .zip(&out.outcomes_kept)
            .map(|(&x, &k)| if k { x } else { 0 })
            .collect();
        out.add(&s, &o, v);
    }
    Ok(out)
}

/// Per-setting totals: every outcome summed.
pub fn setting_totals(table: &CountTable) -> CountTable {
    let n = table.arity();
    let mut out = CountTable::zeros_with(
        table.layout.clone(),
        table.settings_kept.clone(),
        vec![false; n],
    );
    for (s, _, v) in table.cells() {
        out.add(&s, &vec![0; n], v);
    }
    out
}

/// Anything that can answer marginal count queries.
pub trait Marginals {
    fn layout(&self) -> &PartyLayout;
    fn count(&self, settings: &[Sel], outcomes: &[Sel]) -> Result<u64, TableError>;
}

impl Marginals for CountTable {
    fn layout(&self) -> &PartyLayout {
        &self.layout
    }

    fn count(&self, settings: &[Sel], outcomes: &[Sel]) -> Result<u64, TableError> {
        CountTable::count(self, settings, outcomes)
    }
}

/// Several marginal views of one experiment over a shared layout.
#[derive(Debug, Clone)]
pub struct TableViews {
    layout: PartyLayout,
    views: Vec<CountTable>,
}

impl TableViews {
    pub fn new(views: Vec<CountTable>) -> Result<Self, TableError> {
        let layout = views
            .first()
            .ok_or(TableError::NoView("empty view set".into()))?
            .layout
            .clone();
        if views.iter().any(|v| v.layout != layout) {
            return Err(TableError::LayoutMismatch);
        }
        Ok(TableViews { layout, views })
    }

    pub fn views(&self) -> &[CountTable] {
        &self.views
    }

    /// The view that answers a query: among views able to, the one with the
    /// fewest kept coordinates (ties go to the earliest).
    pub fn select(&self, settings: &[Sel], outcomes: &[Sel]) -> Option<&CountTable> {
        self.views
            .iter()
            .filter(|v| v.can_answer(settings, outcomes))
            .min_by_key(|v| {
                v.settings_kept
                    .iter()
                    .chain(&v.outcomes_kept)
                    .filter(|&&k| k)
                    .count()
            })
    }
}

impl From<CountTable> for TableViews {
    fn from(t: CountTable) -> Self {
        TableViews {
            layout: t.layout.clone(),
            views: vec![t],
        }
    }
}

impl Marginals for TableViews {
    fn layout(&self) -> &PartyLayout {
        &self.layout
    }

    fn count(&self, settings: &[Sel], outcomes: &[Sel]) -> Result<u64, TableError> {
        match self.select(settings, outcomes) {
            Some(v) => v.count(settings, outcomes),
            None => Err(TableError::NoView(describe_query(
                &self.layout,
                settings,
                outcomes,
            ))),
        }
    }
}

pub(crate) fn describe_query(layout: &PartyLayout, settings: &[Sel], outcomes: &[Sel]) -> String {
    let fmt_sel = |labels: &[String], s: &Sel| match s {
        Sel::Any => "*".to_string(),
        Sel::At(i) => labels.get(*i).cloned().unwrap_or_else(|| format!("#{}", i)),
    };
    let o: Vec<String> = layout
        .parties
        .iter()
        .zip(outcomes)
        .map(|(p, s)| fmt_sel(&p.outcomes, s))
        .collect();
    let s: Vec<String> = layout
        .parties
        .iter()
        .zip(settings)
        .map(|(p, s)| fmt_sel(&p.settings, s))
        .collect();
    format!("N({}|{})", o.concat(), s.concat())
}

/// Dense r×c table of nonnegative reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub cells: Vec<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl Contingency {
    pub fn new(rows: usize, cols: usize, cells: Vec<f64>) -> Result<Self, TableError> {
        assert_eq!(cells.len(), rows * cols, "cell count does not match shape");
        if let Some(&bad) = cells.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(TableError::BadCell(bad));
        }
        Ok(Contingency {
            rows,
            cols,
            cells,
            row_labels: (0..rows).map(|i| format!("r{}", i)).collect(),
            col_labels: (0..cols).map(|j| format!("c{}", j)).collect(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, TableError> {
        let r = rows.len();
        let c = rows.first().map(|x| x.as_ref().len()).unwrap_or(0);
        let cells: Vec<f64> = rows
            .iter()
            .flat_map(|x| x.as_ref().iter().copied())
            .collect();
        if rows.iter().any(|x| x.as_ref().len() != c) {
            return Err(TableError::BadShape);
        }
        Contingency::new(r, c, cells)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn transpose(&self) -> Contingency {
        let mut cells = Vec::with_capacity(self.cells.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                cells.push(self.get(i, j));
            }
        }
        Contingency {
            rows: self.cols,
            cols: self.rows,
            cells,
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }
}

/// A 2×2 contingency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub cells: [[f64; 2]; 2],
    pub row_labels: [String; 2],
    pub col_labels: [String; 2],
}

impl Table2x2 {
    pub fn new(cells: [[f64; 2]; 2]) -> Result<Self, TableError> {
        if let Some(&bad) = cells.iter().flatten().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(TableError::BadCell(bad));
        }
        Ok(Table2x2 {
            cells,
            row_labels: ["r0".into(), "r1".into()],
            col_labels: ["c0".into(), "c1".into()],
        })
    }

    pub fn from_counts(a: u64, b: u64, c: u64, d: u64) -> Self {
        Table2x2::new([[a as f64, b as f64], [c as f64, d as f64]]).expect("counts are finite")
    }
}

impl From<&Table2x2> for Contingency {
    fn from(t: &Table2x2) -> Self {
        Contingency {
            rows: 2,
            cols: 2,
            cells: t.cells.iter().flatten().copied().collect(),
            row_labels: t.row_labels.to_vec(),
            col_labels: t.col_labels.to_vec(),
        }
    }
}

impl fmt::Display for Contingency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>10}", "")?;
        for l in &self.col_labels {
            write!(f, " {:>12}", l)?;
        }
        writeln!(f)?;
        for i in 0..self.rows {
            write!(f, "{:>10}", self.row_labels[i])?;
            for j in 0..self.cols {
                write!(f, " {:>12}", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Setting selection for one row of a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSpec(pub Vec<Sel>);

/// Outcome selection for one column of a slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColSpec(pub Vec<Sel>);

fn sel_label(names: &[&str], labels: &[&[String]], sels: &[Sel]) -> String {
    let mut n = Vec::new();
    let mut v = Vec::new();
    for ((name, labs), s) in names.iter().zip(labels).zip(sels) {
        if let Sel::At(i) = s {
            n.push(*name);
            v.push(labs[*i].as_str());
        }
    }
    if n.is_empty() {
        "*".to_string()
    } else {
        format!("{}={}", n.concat(), join_labels(&v))
    }
}

/// Cross rows (setting selections) with columns (outcome selections).
pub fn slice<M: Marginals + ?Sized>(
    data: &M,
    rows: &[RowSpec],
    cols: &[ColSpec],
) -> Result<Contingency, TableError> {
    if rows.len() < 2 || cols.len() < 2 {
        return Err(TableError::SliceTooSmall);
    }
    for (i, r) in rows.iter().enumerate() {
        if rows[..i].contains(r) {
            return Err(TableError::IdenticalSelections("row"));
        }
    }
    for (i, c) in cols.iter().enumerate() {
        if cols[..i].contains(c) {
            return Err(TableError::IdenticalSelections("column"));
        }
    }
    let layout = data.layout();
    let mut cells = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols {
            cells.push(data.count(&r.0, &c.0)? as f64);
        }
    }
    let set_names: Vec<&str> = layout.parties.iter().map(|p| p.setting.as_str()).collect();
    let set_labels: Vec<&[String]> = layout
        .parties
        .iter()
        .map(|p| p.settings.as_slice())
        .collect();
    let out_names: Vec<&str> = layout.parties.iter().map(|p| p.name.as_str()).collect();
    let out_labels: Vec<&[String]> = layout
        .parties
        .iter()
        .map(|p| p.outcomes.as_slice())
        .collect();
    let mut t = Contingency::new(rows.len(), cols.len(), cells)?;
    t.row_labels = rows
        .iter()
        .map(|r| sel_label(&set_names, &set_labels, &r.0))
        .collect();
    t.col_labels = cols
        .iter()
        .map(|c| sel_label(&out_names, &out_labels, &c.0))
        .collect();
    Ok(t)
}

pub fn slice_2x2<M: Marginals + ?Sized>(
    data: &M,
    rows: [RowSpec; 2],
    cols: [ColSpec; 2],
) -> Result<Table2x2, TableError> {
    let t = slice(data, &rows, &cols)?;
    Ok(Table2x2 {
        cells: [[t.get(0, 0), t.get(0, 1)], [t.get(1, 0), t.get(1, 1)]],
        row_labels: [t.row_labels[0].clone(), t.row_labels[1].clone()],
        col_labels: [t.col_labels[0].clone(), t.col_labels[1].clone()],
    })
}

/// Parse a setting or outcome tuple written either as concatenated
/// single-character labels (`"010"`) or comma-separated (`"11,0"`).
pub fn split_tuple(s: &str, arity: usize) -> Vec<String> {
    if s.contains(',') {
        s.split(',').map(|x| x.trim().to_string()).collect()
    } else if s.chars().count() == arity {
        s.chars().map(|c| c.to_string()).collect()
    } else {
        vec![s.to_string()]
    }
}

/// Selectors fixing every coordinate to the given labels (`*` = any).
pub fn settings_sel(layout: &PartyLayout, labels: &[&str]) -> Result<Vec<Sel>, TableError> {
    labels
        .iter()
        .zip(&layout.parties)
        .map(|(l, p)| {
            if *l == "*" {
                Ok(Sel::Any)
            } else {
                p.setting_index(l)
                    .map(Sel::At)
                    .ok_or_else(|| TableError::UnknownLabel {
                        record: 0,
                        field: p.setting.clone(),
                        label: l.to_string(),
                    })
            }
        })
        .collect()
}

pub fn outcomes_sel(layout: &PartyLayout, labels: &[&str]) -> Result<Vec<Sel>, TableError> {
    labels
        .iter()
        .zip(&layout.parties)
        .map(|(l, p)| {
            if *l == "*" {
                Ok(Sel::Any)
            } else {
                p.outcome_index(l)
                    .map(Sel::At)
                    .ok_or_else(|| TableError::UnknownLabel {
                        record: 0,
                        field: p.name.clone(),
                        label: l.to_string(),
                    })
            }
        })
        .collect()
}
