use nosignal_core::nosig::{two_party_battery, BatteryOptions, EfficiencyModel};
use nosignal_core::simulator::{
    calibrate, empirical_correlation, presets, simulate, simulate_with, Battery,
};
use nosignal_core::tables::eventlog::{parse_event_log, EventLogWriter};
use nosignal_core::tables::{CountTable, Sel};

/// Singlet correlation for polarizer angles in degrees.
fn oracle_correlation(alice: f64, bob: f64) -> f64 {
    -(2.0 * (alice - bob).to_radians()).cos()
}

fn pair_count(t: &CountTable, x: usize, y: usize) -> f64 {
    t.count(&[Sel::At(x), Sel::At(y)], &[Sel::Any, Sel::Any])
        .unwrap() as f64
}

#[test]
fn singlet_correlations_match_quantum_prediction() {
    let out = simulate(&presets::singlet(400_000, 11)).unwrap();
    let mut s = 0.0;
    let mut var = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let want = oracle_correlation(presets::CHSH_ALICE[x], presets::CHSH_BOB[y]);
            let got = empirical_correlation(&out.table, x, y);
            let sd = ((1.0 - want * want) / pair_count(&out.table, x, y)).sqrt();
            assert!(
                (got - want).abs() <= 4.0 * sd,
                "E{x}{y} = {got}, want {want}"
            );
            s += if (x, y) == (0, 0) { -got } else { got };
            var += sd * sd;
        }
    }
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;
    assert!((s - tsirelson).abs() <= 3.0 * var.sqrt(), "S = {s}");
}

#[test]
fn local_model_respects_chsh_bound() {
    let out = simulate(&presets::lhv(400_000, 12)).unwrap();
    let e: Vec<f64> = (0..4)
        .map(|k| empirical_correlation(&out.table, k / 2, k % 2))
        .collect();
    let sd = (4.0 / 100_000.0f64).sqrt();
    for neg in 0..4 {
        let s: f64 = e
            .iter()
            .enumerate()
            .map(|(k, v)| if k == neg { -v } else { *v })
            .sum();
        assert!(
            s.abs() <= 2.0 + 3.0 * sd,
            "placement {neg}: |S| = {}",
            s.abs()
        );
    }
}

#[test]
fn singlet_marginals_are_unbiased() {
    let out = simulate(&presets::singlet(200_000, 13)).unwrap();
    let n = out.table.total() as f64;
    for party in 0..2 {
        let mut o = [Sel::Any, Sel::Any];
        o[party] = Sel::At(0);
        let k = out.table.count(&[Sel::Any, Sel::Any], &o).unwrap() as f64;
        assert!(
            (k / n - 0.5).abs() <= 4.0 * (0.25 / n).sqrt(),
            "party {party}: {}",
            k / n
        );
    }
}

#[test]
fn same_seed_same_output_and_seeds_differ() {
    let a = simulate(&presets::factorized_null(3, 20_000, 5)).unwrap();
    let b = simulate(&presets::factorized_null(3, 20_000, 5)).unwrap();
    let c = simulate(&presets::factorized_null(3, 20_000, 6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.table, c.table);
    assert_eq!(a.coincidences() + a.partial + a.lost, 20_000);
}

#[test]
fn event_log_round_trip_reproduces_table() {
    let config = presets::signaling(30_000, 9, 0.05);
    let mut writer = EventLogWriter::new(Vec::new(), &config.layout).unwrap();
    let out = simulate_with(&config, |s, o| writer.write(s, o).unwrap()).unwrap();
    let bytes = writer.finish().unwrap();
    let log = parse_event_log(std::str::from_utf8(&bytes).unwrap(), Some(&config.layout)).unwrap();
    assert_eq!(log.table, out.table);
    assert_eq!(log.trials, 30_000);
    assert_eq!(log.non_coincidences, out.partial + out.lost);
}

#[test]
fn null_battery_rates_near_alpha() {
    let config = presets::factorized_null(2, 20_000, 3);
    let report = calibrate(
        &config,
        &Battery::TwoParty(BatteryOptions::default()),
        0.05,
        400,
    )
    .unwrap();
    assert_eq!(report.tests.len(), 4);
    for t in &report.tests {
        // 4 binomial standard deviations at n = 400.
        assert!(
            (t.rate - 0.05).abs() <= 0.044,
            "{}: {}",
            t.descriptor,
            t.rate
        );
        assert_eq!(t.aborted, 0);
    }
    assert!(report.family_rate <= 0.05 + 0.044);
}

#[test]
fn planted_signal_is_found_by_the_forbidden_test() {
    let out = simulate(&presets::signaling(1_000_000, 4, 0.05)).unwrap();
    let report = two_party_battery(
        &out.table,
        EfficiencyModel::SettingLocal,
        &BatteryOptions::default(),
    )
    .unwrap();
    let p = |d: &str| report.get(d).and_then(|e| e.chi2()).unwrap().p_corrected;
    assert!(p("X~B | Y=0") < 1e-6);
    assert!(p("X~B | Y=1") < 1e-6);
    assert!(p("Y~A | X=0") > 1e-3);
    assert!(p("Y~A | X=1") > 1e-3);
}

#[test]
fn calibration_is_deterministic() {
    let config = presets::factorized_null(2, 5_000, 77);
    let battery = Battery::TwoParty(BatteryOptions::default());
    let a = calibrate(&config, &battery, 0.05, 64).unwrap();
    let b = calibrate(&config, &battery, 0.05, 64).unwrap();
    assert_eq!(a, b);
}
