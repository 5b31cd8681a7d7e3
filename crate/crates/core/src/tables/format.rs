//! Structured-text table format (TOML).
//!
//! ```toml
//! id = "exp12"
//! title = "Energy-time Bell test"
//!
//! [[parties]]
//! name = "A"
//! setting = "X"
//! settings = ["0", "1"]
//! outcomes = ["0", "1"]
//!
//! [[tables]]
//! name = "amarg"
//! caption = "Counts at choices XY (rows) for A=0,1 (columns) ..."
//! summed_outcomes = ["B"]
//! columns = ["0", "1"]
//! rows = [
//!   { settings = "00", counts = [2968, 2895] },
//! ]
//! ```
//!
//! Tuples are written either as concatenated single-character labels or as
//! arrays of labels. Only kept coordinates appear in tuples: with Bob's
//! outcome summed, columns list Alice's outcome alone. A table with every
//! outcome summed omits `columns`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CountTable, Party, PartyLayout, TableError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("TOML serialization: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("table {table}: {source}")]
    Table {
        table: String,
        #[source]
        source: TableError,
    },
    #[error("table {table}, row {row}: {message}")]
    Row {
        table: String,
        row: usize,
        message: String,
    },
    #[error("table {table}: unknown party {name:?}")]
    UnknownParty { table: String, name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Tuple {
    Compact(String),
    Labels(Vec<String>),
}

impl Tuple {
    pub fn labels(&self, arity: usize) -> Vec<String> {
        match self {
            Tuple::Labels(v) => v.clone(),
            Tuple::Compact(s) if arity == 0 && s.is_empty() => Vec::new(),
            Tuple::Compact(s) if arity == 1 => vec![s.clone()],
            Tuple::Compact(s) => super::split_tuple(s, arity),
        }
    }

    pub fn from_labels(labels: &[&str]) -> Tuple {
        if labels.iter().all(|l| l.chars().count() == 1 && *l != ",") {
            Tuple::Compact(labels.concat())
        } else {
            Tuple::Labels(labels.iter().map(|s| s.to_string()).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRole {
    /// Data used for analysis.
    #[default]
    Canonical,
    /// A marginal printed alongside canonical data; kept for cross-checks.
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEntry {
    pub settings: Tuple,
    pub counts: Vec<u64>,
    /// Number of trials behind the row, where published.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    #[serde(default)]
    pub role: TableRole,
    #[serde(default)]
    pub caption: String,
    /// Setting names summed over.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summed_settings: Vec<String>,
    /// Party (outcome) names summed over.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summed_outcomes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<Tuple>,
    pub rows: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub parties: Vec<Party>,
    #[serde(default)]
    pub tables: Vec<TableEntry>,
}

impl TableEntry {
    pub fn to_table(&self, layout: &PartyLayout) -> Result<CountTable, FormatError> {
        let n = layout.arity();
        let mut sk = vec![true; n];
        let mut ok = vec![true; n];
        for name in &self.summed_settings {
            let i = layout
                .party_by_setting(name)
                .ok_or_else(|| FormatError::UnknownParty {
                    table: self.name.clone(),
                    name: name.clone(),
                })?;
            sk[i] = false;
        }
        for name in &self.summed_outcomes {
            let i = layout
                .party_by_name(name)
                .ok_or_else(|| FormatError::UnknownParty {
                    table: self.name.clone(),
                    name: name.clone(),
                })?;
            ok[i] = false;
        }
        let kept_s = sk.iter().filter(|&&k| k).count();
        let kept_o = ok.iter().filter(|&&k| k).count();
        let columns: Vec<Vec<String>> = if self.columns.is_empty() {
            vec![Vec::new()]
        } else {
            self.columns.iter().map(|c| c.labels(kept_o)).collect()
        };
        let expand = |kept: &[bool], labels: &[String]| -> Vec<String> {
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
        };
        for (j, c) in columns.iter().enumerate() {
            if c.len() != kept_o {
                return Err(FormatError::Row {
                    table: self.name.clone(),
                    row: j,
                    message: format!("column tuple has {} labels, expected {}", c.len(), kept_o),
                });
            }
        }
        let mut table = CountTable::zeros_with(layout.clone(), sk.clone(), ok.clone());
        for (r, row) in self.rows.iter().enumerate() {
            let s = row.settings.labels(kept_s);
            if s.len() != kept_s {
                return Err(FormatError::Row {
                    table: self.name.clone(),
                    row: r,
                    message: format!("settings tuple has {} labels, expected {}", s.len(), kept_s),
                });
            }
            if row.counts.len() != columns.len() {
                return Err(FormatError::Row {
                    table: self.name.clone(),
                    row: r,
                    message: format!("{} counts for {} columns", row.counts.len(), columns.len()),
                });
            }
            let s_full = expand(&sk, &s);
            let s_ref: Vec<&str> = s_full.iter().map(String::as_str).collect();
            for (c, &v) in columns.iter().zip(&row.counts) {
                let o_full = expand(&ok, c);
                let o_ref: Vec<&str> = o_full.iter().map(String::as_str).collect();
                let (si, oi) = table.resolve_stored(&s_ref, &o_ref, r).map_err(|source| {
                    FormatError::Table {
                        table: self.name.clone(),
                        source,
                    }
                })?;
                table.add(&si, &oi, v);
            }
        }
        Ok(table)
    }

    pub fn from_table(name: &str, caption: &str, table: &CountTable) -> TableEntry {
        let layout = table.layout();
        let parties = layout.parties();
        let summed_settings = parties
            .iter()
            .zip(table.settings_kept())
            .filter(|(_, &k)| !k)
            .map(|(p, _)| p.setting.clone())
            .collect();
        let summed_outcomes = parties
            .iter()
            .zip(table.outcomes_kept())
            .filter(|(_, &k)| !k)
            .map(|(p, _)| p.name.clone())
            .collect();
        let kept_labels = |idx: &[usize], kept: &[bool], outcome: bool| -> Tuple {
            let labels: Vec<&str> = idx
                .iter()
                .enumerate()
                .filter(|(i, _)| kept[*i])
                .map(|(i, &x)| {
                    let p = &parties[i];
                    if outcome {
                        p.outcomes[x].as_str()
                    } else {
                        p.settings[x].as_str()
                    }
                })
                .collect();
            Tuple::from_labels(&labels)
        };
        let outs = table.stored_outcomes();
        let any_outcome_kept = table.outcomes_kept().iter().any(|&k| k);
        let columns = if any_outcome_kept {
            outs.iter()
                .map(|o| kept_labels(o, table.outcomes_kept(), true))
                .collect()
        } else {
            Vec::new()
        };
        let rows = table
            .stored_settings()
            .iter()
            .map(|s| RowEntry {
                settings: kept_labels(s, table.settings_kept(), false),
                counts: outs
                    .iter()
                    .map(|o| table.counts[table.offset(s, o)])
                    .collect(),
                trials: None,
            })
            .collect();
        TableEntry {
            name: name.to_string(),
            role: TableRole::Canonical,
            caption: caption.to_string(),
            summed_settings,
            summed_outcomes,
            columns,
            rows,
        }
    }
}

impl TableFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, FormatError> {
        Ok(toml::to_string(self)?)
    }

    pub fn layout(&self) -> Result<PartyLayout, FormatError> {
        PartyLayout::new(self.parties.clone()).map_err(|source| FormatError::Table {
            table: "<layout>".into(),
            source,
        })
    }

    /// Single-table file holding `table` as canonical data.
    pub fn single(id: &str, caption: &str, table: &CountTable) -> TableFile {
        TableFile {
            id: id.to_string(),
            title: caption.to_string(),
            parties: table.layout().parties().to_vec(),
            tables: vec![TableEntry::from_table("full", caption, table)],
        }
    }
}
