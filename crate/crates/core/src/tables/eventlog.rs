//! Delimited event logs: one trial per line.
//!
//! ```text
//! # nosignal event log v1
//! # party A setting X settings=0,1 outcomes=0,1
//! # party B setting Y settings=0,1 outcomes=0,1
//! X,Y,A,B
//! 0,1,0,1
//! 1,0,-,1
//! ```
//!
//! Columns are the setting of every party followed by the outcome of every
//! party, in the same order. An outcome field of `-` means "no detection":
//! it maps to the party's designated no-detection label when the layout has
//! one (time-binned data with bin 0), otherwise the trial is not a
//! coincidence and only contributes to single counts.
//!
//! The `# party` preamble lines are optional. Without them the alphabets are
//! inferred from the data, sorted numerically when every label is an integer.

use std::collections::BTreeSet;
use std::io::{self, Write};

use thiserror::Error;

use super::{CountTable, Party, PartyLayout};

pub const NO_DETECTION: &str = "-";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct LogError {
    pub line: u64,
    pub column: usize,
    pub message: String,
}

impl LogError {
    fn at(line: u64, column: usize, message: impl Into<String>) -> Self {
        LogError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Detection counts per party, indexed `[party][setting][outcome]`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Singles(pub Vec<Vec<Vec<u64>>>);

impl Singles {
    pub fn zeros(layout: &PartyLayout) -> Self {
        Singles(
            layout
                .parties()
                .iter()
                .map(|p| vec![vec![0; p.outcomes.len()]; p.settings.len()])
                .collect(),
        )
    }

    pub fn party_total(&self, party: usize) -> u64 {
        self.0[party].iter().flatten().sum()
    }
}

#[derive(Debug, Clone)]
pub struct IngestedLog {
    /// Coincidences only.
    pub table: CountTable,
    pub trials: u64,
    pub non_coincidences: u64,
    pub singles: Singles,
}

/// Parse an event log. A layout passed in overrides the preamble.
pub fn parse_event_log(text: &str, layout: Option<&PartyLayout>) -> Result<IngestedLog, LogError> {
    let preamble = parse_preamble(text)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| LogError::at(csv_line(&e), 1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.len() % 2 != 0 || headers.len() < 4 {
        return Err(LogError::at(
            header_line(text),
            1,
            format!(
                "header needs settings then outcomes for ≥2 parties, got {} columns",
                headers.len()
            ),
        ));
    }
    let n = headers.len() / 2;
    let mut records: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LogError::at(csv_line(&e), 1, e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 * n {
            return Err(LogError::at(
                line,
                rec.len().min(2 * n) + 1,
                format!("expected {} fields, found {}", 2 * n, rec.len()),
            ));
        }
        records.push((line, rec.iter().map(str::to_string).collect()));
    }

    let layout = match (layout, preamble) {
        (Some(l), _) => l.clone(),
        (None, Some(parties)) => {
            PartyLayout::new(parties).map_err(|e| LogError::at(1, 1, e.to_string()))?
        }
        (None, None) => infer_layout(&headers, &records)?,
    };
    if layout.arity() != n {
        return Err(LogError::at(
            header_line(text),
            1,
            format!("header has {} parties, layout has {}", n, layout.arity()),
        ));
    }
    for (i, p) in layout.parties().iter().enumerate() {
        for (col, want) in [(i, &p.setting), (n + i, &p.name)] {
            if &headers[col] != want {
                return Err(LogError::at(
                    header_line(text),
                    col + 1,
                    format!("expected column {:?}, found {:?}", want, &headers[col]),
                ));
            }
        }
    }

    let mut table = CountTable::zeros(layout.clone());
    let mut singles = Singles::zeros(&layout);
    let mut non_coincidences = 0;
    let mut s = vec![0usize; n];
    let mut o: Vec<Option<usize>> = vec![None; n];
    for (line, fields) in &records {
        for (i, p) in layout.parties().iter().enumerate() {
            s[i] = p.setting_index(&fields[i]).ok_or_else(|| {
                LogError::at(
                    *line,
                    i + 1,
                    format!("unknown {} label {:?}", p.setting, fields[i]),
                )
            })?;
            let f = &fields[n + i];
            o[i] = if f == NO_DETECTION {
                p.no_detection_index()
            } else {
                Some(p.outcome_index(f).ok_or_else(|| {
                    LogError::at(
                        *line,
                        n + i + 1,
                        format!("unknown {} label {:?}", p.name, f),
                    )
                })?)
            };
        }
        for i in 0..n {
            if let Some(oi) = o[i] {
                if Some(oi) != layout.party(i).no_detection_index() {
                    singles.0[i][s[i]][oi] += 1;
                }
            }
        }
        if o.iter().all(Option::is_some) {
            let oi: Vec<usize> = o.iter().map(|x| x.unwrap()).collect();
            table.add(&s, &oi, 1);
        } else {
            non_coincidences += 1;
        }
    }
    Ok(IngestedLog {
        table,
        trials: records.len() as u64,
        non_coincidences,
        singles,
    })
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map(|p| p.line()).unwrap_or(0)
}

fn header_line(text: &str) -> u64 {
    text.lines()
        .position(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map(|i| i as u64 + 1)
        .unwrap_or(1)
}

fn parse_preamble(text: &str) -> Result<Option<Vec<Party>>, LogError> {
    let mut parties = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if !t.starts_with('#') {
            if t.is_empty() {
                continue;
            }
            break;
        }
        let body = t.trim_start_matches('#').trim();
        let Some(rest) = body.strip_prefix("party ") else {
            continue;
        };
        let bad = |m: &str| LogError::at(i as u64 + 1, 1, format!("party line: {}", m));
        let toks: Vec<&str> = rest.split_whitespace().collect();
        if toks.len() < 5 || toks[1] != "setting" {
            return Err(bad(
                "expected `party NAME setting NAME settings=.. outcomes=..`",
            ));
        }
        let mut p = Party {
            name: toks[0].to_string(),
            setting: toks[2].to_string(),
            settings: Vec::new(),
            outcomes: Vec::new(),
            no_detection: None,
        };
        for kv in &toks[3..] {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(kv))?;
            let list = || v.split(',').map(str::to_string).collect::<Vec<_>>();
            match k {
                "settings" => p.settings = list(),
                "outcomes" => p.outcomes = list(),
                "no-detection" => p.no_detection = Some(v.to_string()),
                _ => return Err(bad(&format!("unknown key {:?}", k))),
            }
        }
        parties.push(p);
    }
    Ok(if parties.is_empty() {
        None
    } else {
        Some(parties)
    })
}

fn infer_layout(
    headers: &csv::StringRecord,
    records: &[(u64, Vec<String>)],
) -> Result<PartyLayout, LogError> {
    let n = headers.len() / 2;
    let sorted = |col: usize| -> Vec<String> {
        let set: BTreeSet<&str> = records
            .iter()
            .map(|(_, f)| f[col].as_str())
            .filter(|s| *s != NO_DETECTION)
            .collect();
        let mut v: Vec<String> = set.into_iter().map(str::to_string).collect();
        if v.iter().all(|s| s.parse::<i64>().is_ok()) {
            v.sort_by_key(|s| s.parse::<i64>().unwrap());
        }
        v
    };
    let parties = (0..n)
        .map(|i| Party {
            name: headers[n + i].to_string(),
            setting: headers[i].to_string(),
            settings: sorted(i),
            outcomes: sorted(n + i),
            no_detection: None,
        })
        .collect();
    PartyLayout::new(parties).map_err(|e| LogError::at(1, 1, format!("cannot infer layout: {}", e)))
}

/// Streaming writer for the event-log format.
pub struct EventLogWriter<W: Write> {
    out: W,
    layout: PartyLayout,
    line: String,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(mut out: W, layout: &PartyLayout) -> io::Result<Self> {
        writeln!(out, "# nosignal event log v1")?;
        for p in layout.parties() {
            write!(
                out,
                "# party {} setting {} settings={} outcomes={}",
                p.name,
                p.setting,
                p.settings.join(","),
                p.outcomes.join(",")
            )?;
            if let Some(nd) = &p.no_detection {
                write!(out, " no-detection={}", nd)?;
            }
            writeln!(out)?;
        }
        let cols: Vec<&str> = layout
            .parties()
            .iter()
            .map(|p| p.setting.as_str())
            .chain(layout.parties().iter().map(|p| p.name.as_str()))
            .collect();
        writeln!(out, "{}", cols.join(","))?;
        Ok(EventLogWriter {
            out,
            layout: layout.clone(),
            line: String::new(),
        })
    }

    /// `None` outcomes are written as the no-detection escape.
    pub fn write(&mut self, settings: &[usize], outcomes: &[Option<usize>]) -> io::Result<()> {
        self.line.clear();
        for (p, &s) in self.layout.parties().iter().zip(settings) {
            self.line.push_str(&p.settings[s]);
            self.line.push(',');
        }
        for (i, (p, o)) in self.layout.parties().iter().zip(outcomes).enumerate() {
            match o {
                Some(o) => self.line.push_str(&p.outcomes[*o]),
                None => self.line.push_str(NO_DETECTION),
            }
            if i + 1 < outcomes.len() {
                self.line.push(',');
            }
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}
