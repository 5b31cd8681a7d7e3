//! Seeded Monte Carlo generation of coincidence data.
//!
//! Each trial samples a setting tuple, then a latent outcome tuple from the
//! model's joint distribution, then thins every party's detection
//! independently with its efficiency. Only trials where all parties detect
//! enter the coincidence table; single counts are always kept.
//!
//! Random streams: one ChaCha8 generator per purpose, all seeded from
//! `seed` and separated by stream id `(replication << 8) | k` with k = 0 for
//! settings, 1 for latent outcomes and 2 + i for detection at party i.

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nosig::{
    detector_asymmetry_check, outcome_efficiency_check, three_party_battery, two_party_battery,
    BatteryOptions, CausalGraph, CausalStatus, EfficiencyModel, EqualitySpec, NosigError,
    TestBatteryReport,
};
use crate::qmodel::{bloch_from_polarization, CorrelationModel, Direction};
use crate::tables::eventlog::Singles;
use crate::tables::{CountTable, PartyLayout, TableError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{what}: probability {value} is outside [0, 1]")]
    Probability { what: String, value: f64 },
    #[error("{what} sums to {sum}, not 1")]
    Normalization { what: String, sum: f64 },
    #[error("{what}: expected {expected} entries, found {found}")]
    Shape {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Model(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// One deterministic local strategy with its mixture weight. Responses are
/// outcome indices per own setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub weight: f64,
    pub responses: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LhvModel {
    /// Mixture of deterministic strategies.
    Strategies(Vec<Strategy>),
    /// A hidden unit vector λ, uniform on the sphere; A = sign(a·λ), B = −sign(b·λ).
    HiddenDirection {
        alice: Vec<Direction>,
        bob: Vec<Direction>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeModel {
    /// Two-party singlet; outcome index 0 is +1, index 1 is −1.
    Quantum(CorrelationModel),
    Lhv(LhvModel),
    /// Each party answers independently with p_i(o | own setting), `[party][setting][outcome]`.
    Product(Vec<Vec<Vec<f64>>>),
    /// Explicit p(outcomes | settings), `[setting tuple][outcome tuple]` in layout order.
    Signaling(Vec<Vec<f64>>),
}

/// Detection probability of one party, indexed by the full setting tuple and
/// the party's own outcome: `[setting tuple][own outcome]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable(pub Vec<Vec<f64>>);

impl EfficiencyTable {
    pub fn constant(layout: &PartyLayout, party: usize, eta: f64) -> Self {
        let k = layout.party(party).outcomes.len();
        EfficiencyTable(vec![vec![eta; k]; layout.setting_tuples()])
    }

    /// η depends on the party's own setting only.
    pub fn setting_local(layout: &PartyLayout, party: usize, eta: &[f64]) -> Self {
        let k = layout.party(party).outcomes.len();
        EfficiencyTable(
            layout
                .enumerate_settings()
                .iter()
                .map(|s| vec![eta[s[party]]; k])
                .collect(),
        )
    }

    /// η depends on the party's own setting and outcome, `eta[setting][outcome]`.
    pub fn combined(layout: &PartyLayout, party: usize, eta: &[Vec<f64>]) -> Self {
        EfficiencyTable(
            layout
                .enumerate_settings()
                .iter()
                .map(|s| eta[s[party]].clone())
                .collect(),
        )
    }

    /// Multiply η by `factor` wherever setting `remote` of party `remote_party`
    /// is in force and the own outcome is `outcome`.
    pub fn skewed(
        mut self,
        layout: &PartyLayout,
        remote_party: usize,
        remote: usize,
        outcome: usize,
        factor: f64,
    ) -> Self {
        for (row, s) in self.0.iter_mut().zip(layout.enumerate_settings()) {
            if s[remote_party] == remote {
                row[outcome] *= factor;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub layout: PartyLayout,
    pub model: OutcomeModel,
    /// One table per party.
    pub efficiency: Vec<EfficiencyTable>,
    /// Probability of each setting tuple in layout order.
    pub settings: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub table: CountTable,
    pub singles: Singles,
    /// Trials where some but not all parties detected.
    pub partial: u64,
    /// Trials where no party detected.
    pub lost: u64,
}

impl SimulationOutput {
    pub fn coincidences(&self) -> u64 {
        self.table.total()
    }
}

fn check_prob(what: impl Fn() -> String, v: f64) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(SimError::Probability {
            what: what(),
            value: v,
        });
    }
    Ok(())
}

fn check_dist(what: impl Fn() -> String, d: &[f64]) -> Result<(), SimError> {
    for &v in d {
        check_prob(&what, v)?;
    }
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(SimError::Normalization { what: what(), sum });
    }
    Ok(())
}

fn shape(what: &str, expected: usize, found: usize) -> Result<(), SimError> {
    if expected != found {
        return Err(SimError::Shape {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

impl SimulationConfig {
    /// p(outcome tuple | setting tuple) for every setting tuple.
    pub fn joint_distribution(&self) -> Result<Vec<Vec<f64>>, SimError> {
        let layout = &self.layout;
        let settings = layout.enumerate_settings();
        let outcomes = layout.enumerate_outcomes();
        let n = layout.arity();
        let joint: Vec<Vec<f64>> = match &self.model {
            OutcomeModel::Quantum(m) => {
                binary_pair(layout)?;
                shape(
                    "alice directions",
                    layout.party(0).settings.len(),
                    m.alice.len(),
                )?;
                shape(
                    "bob directions",
                    layout.party(1).settings.len(),
                    m.bob.len(),
                )?;
                settings
                    .iter()
                    .map(|s| m.joint(s[0], s[1]).iter().flatten().copied().collect())
                    .collect()
            }
            OutcomeModel::Lhv(LhvModel::HiddenDirection { alice, bob }) => {
                binary_pair(layout)?;
                shape(
                    "alice directions",
                    layout.party(0).settings.len(),
                    alice.len(),
                )?;
                shape("bob directions", layout.party(1).settings.len(), bob.len())?;
                settings
                    .iter()
                    .map(|s| {
                        // P(sign a·λ ≠ sign b·λ) = θ/π for λ uniform on the sphere.
                        let theta = alice[s[0]].dot(&bob[s[1]]).clamp(-1.0, 1.0).acos();
                        let same = theta / std::f64::consts::PI / 2.0;
                        let diff = 0.5 - same;
                        vec![same, diff, diff, same]
                    })
                    .collect()
            }
            OutcomeModel::Lhv(LhvModel::Strategies(list)) => {
                let total: f64 = list.iter().map(|s| s.weight).sum();
                if list.is_empty() || total <= 0.0 {
                    return Err(SimError::Model("strategy mixture has no weight".into()));
                }
                let mut out = vec![vec![0.0; outcomes.len()]; settings.len()];
                for st in list {
                    if st.weight < 0.0 {
                        return Err(SimError::Model("negative strategy weight".into()));
                    }
                    shape("strategy responses", n, st.responses.len())?;
                    for (si, s) in settings.iter().enumerate() {
                        let o: Vec<usize> = (0..n).map(|i| st.responses[i][s[i]]).collect();
                        let oi = outcomes.iter().position(|x| *x == o).ok_or_else(|| {
                            SimError::Model(format!("strategy response {o:?} is not an outcome"))
                        })?;
                        out[si][oi] += st.weight / total;
                    }
                }
                out
            }
            OutcomeModel::Product(p) => {
                shape("product model parties", n, p.len())?;
                for (i, party) in p.iter().enumerate() {
                    shape(
                        "product model settings",
                        layout.party(i).settings.len(),
                        party.len(),
                    )?;
                    for (s, d) in party.iter().enumerate() {
                        shape(
                            "product model outcomes",
                            layout.party(i).outcomes.len(),
                            d.len(),
                        )?;
                        check_dist(|| format!("product model party {i} setting {s}"), d)?;
                    }
                }
                settings
                    .iter()
                    .map(|s| {
                        outcomes
                            .iter()
                            .map(|o| (0..n).map(|i| p[i][s[i]][o[i]]).product())
                            .collect()
                    })
                    .collect()
            }
            OutcomeModel::Signaling(t) => {
                shape("signaling table rows", settings.len(), t.len())?;
                for r in t {
                    shape("signaling table columns", outcomes.len(), r.len())?;
                }
                t.clone()
            }
        };
        for (si, d) in joint.iter().enumerate() {
            check_dist(
                || {
                    format!(
                        "outcome distribution at {}",
                        layout.settings_label(&settings[si])
                    )
                },
                d,
            )?;
        }
        Ok(joint)
    }

    pub fn validate(&self) -> Result<Vec<Vec<f64>>, SimError> {
        let layout = &self.layout;
        shape(
            "setting distribution",
            layout.setting_tuples(),
            self.settings.len(),
        )?;
        check_dist(|| "setting distribution".into(), &self.settings)?;
        shape("efficiency tables", layout.arity(), self.efficiency.len())?;
        for (i, t) in self.efficiency.iter().enumerate() {
            shape("efficiency rows", layout.setting_tuples(), t.0.len())?;
            for row in &t.0 {
                shape(
                    "efficiency columns",
                    layout.party(i).outcomes.len(),
                    row.len(),
                )?;
                for &v in row {
                    check_prob(
                        || format!("efficiency of party {}", layout.party(i).name),
                        v,
                    )?;
                }
            }
        }
        self.joint_distribution()
    }
}

fn binary_pair(layout: &PartyLayout) -> Result<(), SimError> {
    if layout.arity() != 2 || layout.parties().iter().any(|p| p.outcomes.len() != 2) {
        return Err(SimError::Model(
            "this model needs two parties with binary outcomes".into(),
        ));
    }
    Ok(())
}

fn stream(seed: u64, replication: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 8) | k);
    rng
}

pub fn simulate(config: &SimulationConfig) -> Result<SimulationOutput, SimError> {
    run(config, 0, |_, _| {})
}

/// As [`simulate`], calling `sink` with every trial's settings and detected outcomes.
pub fn simulate_with<F>(config: &SimulationConfig, sink: F) -> Result<SimulationOutput, SimError>
where
    F: FnMut(&[usize], &[Option<usize>]),
{
    run(config, 0, sink)
}

fn run<F>(
    config: &SimulationConfig,
    replication: u64,
    mut sink: F,
) -> Result<SimulationOutput, SimError>
where
    F: FnMut(&[usize], &[Option<usize>]),
{
    let joint = config.validate()?;
    let layout = &config.layout;
    let n = layout.arity();
    if n > 254 {
        return Err(SimError::Model("too many parties".into()));
    }
    let settings = layout.enumerate_settings();
    let outcomes = layout.enumerate_outcomes();
    let mut table = CountTable::zeros(layout.clone());
    let mut singles = Singles::zeros(layout);
    let (mut partial, mut lost) = (0, 0);
    if config.trials == 0 {
        return Ok(SimulationOutput {
            table,
            singles,
            partial,
            lost,
        });
    }
    let setting_dist =
        WeightedIndex::new(&config.settings).map_err(|e| SimError::Model(e.to_string()))?;
    let outcome_dist: Vec<Option<WeightedIndex<f64>>> =
        joint.iter().map(|d| WeightedIndex::new(d).ok()).collect();
    let detect: Vec<Vec<Vec<Bernoulli>>> = config
        .efficiency
        .iter()
        .map(|t| {
            t.0.iter()
                .map(|row| {
                    row.iter()
                        .map(|&p| Bernoulli::new(p).expect("validated"))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut rng_s = stream(config.seed, replication, 0);
    let mut rng_o = stream(config.seed, replication, 1);
    let mut rng_d: Vec<ChaCha8Rng> = (0..n)
        .map(|i| stream(config.seed, replication, 2 + i as u64))
        .collect();
    let mut seen: Vec<Option<usize>> = vec![None; n];
    for _ in 0..config.trials {
        let si = setting_dist.sample(&mut rng_s);
        let dist = outcome_dist[si]
            .as_ref()
            .ok_or_else(|| SimError::Model("setting tuple with zero outcome weight".into()))?;
        let oi = dist.sample(&mut rng_o);
        let s = &settings[si];
        let o = &outcomes[oi];
        let mut hits = 0;
        for i in 0..n {
            let d = detect[i][si][o[i]].sample(&mut rng_d[i]);
            seen[i] = d.then_some(o[i]);
            if d {
                hits += 1;
                singles.0[i][s[i]][o[i]] += 1;
            }
        }
        match hits {
            h if h == n => table.add(s, o, 1),
            0 => lost += 1,
            _ => partial += 1,
        }
        sink(s, &seen);
    }
    Ok(SimulationOutput {
        table,
        singles,
        partial,
        lost,
    })
}

/// Test family evaluated by [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Battery {
    TwoParty(BatteryOptions),
    ThreeParty(CausalGraph, BatteryOptions),
    OutcomeEfficiency(EqualitySpec),
    DetectorAsymmetry,
}

impl Battery {
    pub fn run(&self, table: &CountTable) -> Result<TestBatteryReport, NosigError> {
        match self {
            Battery::TwoParty(o) => two_party_battery(table, EfficiencyModel::SettingLocal, o),
            Battery::ThreeParty(g, o) => three_party_battery(table, g, o),
            Battery::DetectorAsymmetry => detector_asymmetry_check(table),
            Battery::OutcomeEfficiency(spec) => TestBatteryReport::from_checks(
                "outcome efficiency check",
                vec![outcome_efficiency_check(table, spec)?],
                CausalStatus::Forbidden,
                None,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRate {
    pub descriptor: String,
    pub rejections: u64,
    pub aborted: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub alpha: f64,
    pub replications: u64,
    pub tests: Vec<TestRate>,
    /// Fraction of replications whose smallest corrected p-value is at most alpha.
    pub family_rate: f64,
}

fn rejects(p: f64, alpha: f64) -> bool {
    alpha > 0.0 && p <= alpha
}

/// Replicate the simulation and record how often each test rejects at `alpha`.
/// Replication r draws from streams offset by r (see module docs).
pub fn calibrate(
    config: &SimulationConfig,
    battery: &Battery,
    alpha: f64,
    replications: u64,
) -> Result<CalibrationReport, SimError> {
    config.validate()?;
    let reports: Vec<TestBatteryReport> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let out = run(config, r, |_, _| {})?;
            battery
                .run(&out.table)
                .map_err(|e| SimError::Model(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut tests: Vec<TestRate> = Vec::new();
    let mut family = 0u64;
    for rep in &reports {
        for (k, e) in rep.entries.iter().enumerate() {
            if tests.len() <= k {
                tests.push(TestRate {
                    descriptor: e.descriptor(),
                    rejections: 0,
                    aborted: 0,
                    rate: 0.0,
                });
            }
            match e.chi2() {
                Some(r) if rejects(r.p_raw, alpha) => tests[k].rejections += 1,
                Some(_) => {}
                None => tests[k].aborted += 1,
            }
        }
        if rep.min_corrected_p().is_some_and(|p| rejects(p, alpha)) {
            family += 1;
        }
    }
    let n = replications.max(1) as f64;
    for t in &mut tests {
        t.rate = t.rejections as f64 / n;
    }
    Ok(CalibrationReport {
        alpha,
        replications,
        tests,
        family_rate: family as f64 / n,
    })
}

/// Ready-made configurations.
pub mod presets {
    use super::*;

    fn uniform(layout: &PartyLayout) -> Vec<f64> {
        let k = layout.setting_tuples();
        vec![1.0 / k as f64; k]
    }

    /// Polarizer angles of a standard CHSH configuration (degrees).
    pub const CHSH_ALICE: [f64; 2] = [0.0, 45.0];
    pub const CHSH_BOB: [f64; 2] = [-22.5, -67.5];

    /// Ideal singlet at the standard CHSH polarizer angles with perfect detection.
    pub fn singlet(trials: u64, seed: u64) -> SimulationConfig {
        singlet_with_efficiency(trials, seed, |layout, i| {
            EfficiencyTable::constant(layout, i, 1.0)
        })
    }

    pub fn singlet_with_efficiency(
        trials: u64,
        seed: u64,
        eff: impl Fn(&PartyLayout, usize) -> EfficiencyTable,
    ) -> SimulationConfig {
        let layout = PartyLayout::binary(2).expect("two parties");
        let model = CorrelationModel::singlet(
            1.0,
            CHSH_ALICE
                .iter()
                .map(|&a| bloch_from_polarization(a))
                .collect(),
            CHSH_BOB
                .iter()
                .map(|&b| bloch_from_polarization(b))
                .collect(),
        )
        .expect("valid visibility");
        SimulationConfig {
            efficiency: (0..2).map(|i| eff(&layout, i)).collect(),
            settings: uniform(&layout),
            model: OutcomeModel::Quantum(model),
            layout,
            trials,
            seed,
        }
    }

    /// Independent parties whose outcome bias and efficiency depend only on
    /// the local setting: the no-signaling null.
    pub fn factorized_null(parties: usize, trials: u64, seed: u64) -> SimulationConfig {
        let layout = PartyLayout::binary(parties).expect("two to four parties");
        let p: Vec<Vec<Vec<f64>>> = (0..parties)
            .map(|i| {
                (0..2)
                    .map(|s| {
                        let q = 0.35 + 0.1 * i as f64 + 0.2 * s as f64;
                        vec![q, 1.0 - q]
                    })
                    .collect()
            })
            .collect();
        let efficiency = (0..parties)
            .map(|i| EfficiencyTable::setting_local(&layout, i, &[0.8 - 0.05 * i as f64, 0.6]))
            .collect();
        SimulationConfig {
            settings: uniform(&layout),
            model: OutcomeModel::Product(p),
            efficiency,
            layout,
            trials,
            seed,
        }
    }

    /// Singlet with setting-local efficiencies plus Bob's efficiency for B=0
    /// scaled by `1 - skew` whenever X=1.
    pub fn signaling(trials: u64, seed: u64, skew: f64) -> SimulationConfig {
        singlet_with_efficiency(trials, seed, |layout, i| {
            let t = EfficiencyTable::setting_local(layout, i, &[0.8, 0.75]);
            if i == 1 {
                t.skewed(layout, 0, 1, 0, 1.0 - skew)
            } else {
                t
            }
        })
    }

    /// Hidden-direction local model at the standard CHSH angles.
    pub fn lhv(trials: u64, seed: u64) -> SimulationConfig {
        let mut c = singlet(trials, seed);
        c.model = OutcomeModel::Lhv(LhvModel::HiddenDirection {
            alice: CHSH_ALICE
                .iter()
                .map(|&a| bloch_from_polarization(a))
                .collect(),
            bob: CHSH_BOB
                .iter()
                .map(|&b| bloch_from_polarization(b))
                .collect(),
        });
        c
    }
}

/// Empirical correlation E = (N_same − N_diff)/N at one setting pair.
pub fn empirical_correlation(table: &CountTable, x: usize, y: usize) -> f64 {
    use crate::tables::Sel;
    let mut same = 0.0;
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let c = table
                .count(&[Sel::At(x), Sel::At(y)], &[Sel::At(a), Sel::At(b)])
                .expect("full two-party table") as f64;
            total += c;
            if a == b {
                same += c;
            } else {
                same -= c;
            }
        }
    }
    same / total
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn zero_trials_give_empty_table() {
        let out = simulate(&singlet(0, 1)).unwrap();
        assert_eq!(out.table.total(), 0);
        assert_eq!(out.partial + out.lost, 0);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let a = simulate(&signaling(5000, 7, 0.05)).unwrap();
        let b = simulate(&signaling(5000, 7, 0.05)).unwrap();
        let c = simulate(&signaling(5000, 8, 0.05)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.table, c.table);
    }

    #[test]
    fn trial_accounting() {
        let cfg = factorized_null(3, 20_000, 3);
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.coincidences() + out.partial + out.lost, 20_000);
        assert!(out.lost > 0 && out.partial > 0);
        let detected_a: u64 = out.singles.party_total(0);
        assert!(detected_a >= out.coincidences());
    }

    #[test]
    fn sink_sees_every_trial() {
        let mut n = 0;
        let mut misses = 0;
        let out = simulate_with(&signaling(2000, 1, 0.0), |_, o| {
            n += 1;
            if o.iter().any(|x| x.is_none()) {
                misses += 1;
            }
        })
        .unwrap();
        assert_eq!(n, 2000);
        assert_eq!(misses, out.partial + out.lost);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let mut c = singlet(10, 1);
        c.settings = vec![0.5, 0.5, 0.5, -0.5];
        assert!(matches!(simulate(&c), Err(SimError::Probability { .. })));
        let mut c = singlet(10, 1);
        c.settings = vec![0.3; 4];
        assert!(matches!(simulate(&c), Err(SimError::Normalization { .. })));
        let mut c = singlet(10, 1);
        c.efficiency[0].0[0][0] = 1.5;
        assert!(matches!(simulate(&c), Err(SimError::Probability { .. })));
        let mut c = singlet(10, 1);
        c.model = OutcomeModel::Signaling(vec![vec![0.25; 4]; 3]);
        assert!(matches!(simulate(&c), Err(SimError::Shape { .. })));
    }

    #[test]
    fn strategy_mixture_joint() {
        let layout = PartyLayout::binary(2).unwrap();
        let c = SimulationConfig {
            efficiency: (0..2)
                .map(|i| EfficiencyTable::constant(&layout, i, 1.0))
                .collect(),
            settings: vec![0.25; 4],
            model: OutcomeModel::Lhv(LhvModel::Strategies(vec![Strategy {
                weight: 1.0,
                responses: vec![vec![0, 1], vec![1, 1]],
            }])),
            layout,
            trials: 400,
            seed: 2,
        };
        let out = simulate(&c).unwrap();
        // A answers 0 at X=0 and 1 at X=1; B always answers 1.
        let at_x1 = out.table.get(&["1", "0"], &["1", "1"]).unwrap()
            + out.table.get(&["1", "1"], &["1", "1"]).unwrap();
        let at_x0 = out.table.get(&["0", "0"], &["0", "1"]).unwrap()
            + out.table.get(&["0", "1"], &["0", "1"]).unwrap();
        assert_eq!(at_x0 + at_x1, 400);
    }

    #[test]
    fn hidden_direction_matches_linear_correlation() {
        let c = lhv(1, 1);
        let j = c.joint_distribution().unwrap();
        // Equal directions: θ = 0, outcomes always opposite.
        let a = bloch_from_polarization(0.0);
        let mut c2 = c.clone();
        c2.model = OutcomeModel::Lhv(LhvModel::HiddenDirection {
            alice: vec![a, a],
            bob: vec![a, a],
        });
        let j2 = c2.joint_distribution().unwrap();
        assert_eq!(j2[0], vec![0.0, 0.5, 0.5, 0.0]);
        for row in j {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_extremes() {
        let cfg = factorized_null(2, 2000, 11);
        let b = Battery::TwoParty(BatteryOptions::default());
        let zero = calibrate(&cfg, &b, 0.0, 20).unwrap();
        assert!(zero.tests.iter().all(|t| t.rate == 0.0));
        let one = calibrate(&cfg, &b, 1.0, 20).unwrap();
        assert!(one.tests.iter().all(|t| t.rate == 1.0));
        assert_eq!(one.family_rate, 1.0);
    }
}
