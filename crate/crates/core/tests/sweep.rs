mod common;

use common::*;
use meanscore::cli::ingest::numeric_column;
use meanscore::cli::{
    dataset_from_table, impute_baseline_mean, render, run_sweep, summarize, ConfigFile, Pattern, RawTable, RunConfig,
    SweepRow,
};
use meanscore::demo::{DemoManifest, DEMO_BINARY_CONFIG, DEMO_CONTINUOUS_CONFIG, DEMO_CSV};

fn config(text: &str) -> RunConfig {
    RunConfig::from_file(ConfigFile::from_toml(text).unwrap()).unwrap()
}

fn demo_rows(cfg_text: &str) -> (meanscore::TrialDataset, Vec<SweepRow>) {
    let cfg = config(cfg_text);
    let d = dataset_from_table(&RawTable::from_csv_str(DEMO_CSV).unwrap(), &cfg).unwrap();
    let rows = run_sweep(&d, &cfg).unwrap();
    (d, rows)
}

fn curve(rows: &[SweepRow], p: Pattern) -> Vec<&SweepRow> {
    rows.iter().filter(|r| r.pattern == p).collect()
}

#[test]
fn demo_file_matches_manifest() {
    let m = DemoManifest::bundled().unwrap();
    let table = RawTable::from_csv_str(DEMO_CSV).unwrap();
    let d = dataset_from_table(&table, &config(DEMO_CONTINUOUS_CONFIG)).unwrap();
    let s = summarize(&d);
    assert_eq!(s.n, m.rows);
    assert_eq!(s.intervention.n, m.intervention.rows);
    assert_eq!(s.control.n, m.control.rows);
    assert_eq!(s.intervention.n_mis, m.intervention.outcome_missing);
    assert_eq!(s.control.n_mis, m.control.outcome_missing);
    let na = vec![String::new(), "NA".to_string()];
    let bin = numeric_column(&table, "mcs12_gt40", &na).unwrap();
    let arm = numeric_column(&table, "arm", &na).unwrap();
    let above = |a: f64| bin.iter().zip(&arm).filter(|(y, z)| **y == Some(1.0) && **z == Some(a)).count();
    assert_eq!(above(1.0), m.intervention.outcome_above_40);
    assert_eq!(above(0.0), m.control.outcome_above_40);
}

#[test]
fn demo_baseline_imputation_fills_and_preserves_mean() {
    let m = DemoManifest::bundled().unwrap();
    let table = RawTable::from_csv_str(DEMO_CSV).unwrap();
    let mut col = numeric_column(&table, &m.baseline_column, &[String::new(), "NA".to_string()]).unwrap();
    let observed: Vec<f64> = col.iter().flatten().copied().collect();
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    assert!(rel_err(mean, m.baseline_observed_mean) < 1e-12);
    assert_eq!(impute_baseline_mean(&mut col, &m.baseline_column).unwrap(), m.baseline_missing);
    assert!(col.iter().all(Option::is_some));
    let filled = col.iter().flatten().sum::<f64>() / col.len() as f64;
    assert!(rel_err(filled, mean) < 1e-12);
    let d = dataset_from_table(&table, &config(DEMO_CONTINUOUS_CONFIG)).unwrap();
    assert!(d.xs().iter().all(|v| v.is_finite()));
}

#[test]
fn mar_point_reproduces_complete_case_analysis() {
    for (text, logit) in [(DEMO_CONTINUOUS_CONFIG, false), (DEMO_BINARY_CONFIG, true)] {
        let (d, rows) = demo_rows(text);
        let (y, x) = complete_cases(&d);
        let (est, se, lo, hi) = oracle_interval(&y, &x, logit, 1, 0.95);
        for r in rows.iter().filter(|r| r.delta == 0.0) {
            assert!(rel_err(r.estimate, est) < 1e-8);
            assert!(rel_err(r.se, se) < 1e-8);
            assert!(rel_err(r.ci_low, lo) < 1e-8);
            assert!(rel_err(r.ci_high, hi) < 1e-8);
        }
    }
}

#[test]
fn demo_curves_meet_at_mar_and_diverge() {
    for text in [DEMO_CONTINUOUS_CONFIG, DEMO_BINARY_CONFIG] {
        let (_, rows) = demo_rows(text);
        let at0: Vec<&SweepRow> = rows.iter().filter(|r| r.delta == 0.0).collect();
        assert_eq!(at0.len(), 3);
        assert!(at0.windows(2).all(|w| w[0].estimate == w[1].estimate && w[0].se == w[1].se));
        let mar = at0[0].estimate;
        for p in Pattern::ALL {
            let c = curve(&rows, p);
            let dev: Vec<f64> = c.iter().map(|r| (r.estimate - mar).abs()).collect();
            assert!(dev.windows(2).all(|w| w[0] >= w[1]), "{p}: departure not monotone in |delta|");
        }
        let shift = |p: Pattern| (curve(&rows, p)[0].estimate - mar).abs();
        assert!(shift(Pattern::InterventionOnly) > shift(Pattern::ControlOnly));
    }
}

#[test]
fn logit_demo_neff_rises_toward_n() {
    let (d, rows) = demo_rows(DEMO_BINARY_CONFIG);
    for p in Pattern::ALL {
        let c = curve(&rows, p);
        assert!(c.windows(2).all(|w| w[0].n_eff >= w[1].n_eff - 1e-9), "{p}");
        assert!(c.iter().all(|r| r.n_eff >= d.n_obs() as f64 - 1e-9 && r.n_eff <= d.n() as f64 + 1e-9));
    }
    let both = curve(&rows, Pattern::BothArms);
    assert!(both[0].n_eff > 0.9 * d.n() as f64, "n_eff at delta=-6 is {}", both[0].n_eff);
}

#[test]
fn intervention_only_is_affine_with_missing_fraction_slope() {
    let text = "outcome = \"mcs12\"\narm = \"arm\"\ndelta_grid = \"-10:0:3\"\npattern = \"arm1\"\n";
    let (d, rows) = demo_rows(text);
    assert_eq!(rows.len(), 3);
    let e: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
    assert!((e[0] - 2.0 * e[1] + e[2]).abs() < 1e-10);
    let slope = (e[2] - e[0]) / 10.0;
    assert!((slope - d.missing_fraction(1)).abs() < 1e-10);
    let full = run_sweep(&d, &config(&format!("{text}engine = \"full\"\n"))).unwrap();
    for (a, b) in rows.iter().zip(&full) {
        assert!((a.estimate - b.estimate).abs() < 1e-10);
    }
}

#[test]
fn grid_zero_gives_three_identical_rows() {
    let (_, rows) = demo_rows("outcome = \"mcs12\"\narm = \"arm\"\n");
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| (w[0].estimate, w[0].se, w[0].n_eff) == (w[1].estimate, w[1].se, w[1].n_eff)));
}

#[test]
fn output_round_trips() {
    let (_, rows) = demo_rows(DEMO_CONTINUOUS_CONFIG);
    let text = render(&rows);
    assert_eq!(text.lines().count(), rows.len() + 1);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (rec, row) in rdr.records().zip(&rows) {
        let rec = rec.unwrap();
        assert_eq!(&rec[0], row.pattern.name());
        let vals: Vec<f64> = (1..7).map(|j| rec[j].parse().unwrap()).collect();
        let want = [row.delta, row.estimate, row.se, row.ci_low, row.ci_high, row.n_eff];
        for (a, b) in vals.iter().zip(want) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300));
        }
    }
}

#[test]
fn reason_specific_departures() {
    let csv_text = "y,z,why\n1.0,0,\n2.0,1,\n,0,lost\n,1,refused\n1.5,0,\n2.5,1,\n,1,lost\n0.5,0,\n3.0,1,\n,0,lost\n";
    let table = RawTable::from_csv_str(csv_text).unwrap();
    let text = "outcome = \"y\"\narm = \"z\"\nreason = \"why\"\ndelta_grid = \"-4:0:2\"\npattern = \"both\"\n[reasons]\nlost = 0\nrefused = \"delta\"\n";
    let cfg = config(text);
    let d = dataset_from_table(&table, &cfg).unwrap();
    let rows = run_sweep(&d, &cfg).unwrap();
    let refused = [0.0, 1.0];
    let n_arm = [5.0, 5.0];
    let expected = -4.0 * (refused[1] / n_arm[1] - refused[0] / n_arm[0]);
    assert!((rows[0].estimate - rows[1].estimate - expected).abs() < 1e-10);
}
