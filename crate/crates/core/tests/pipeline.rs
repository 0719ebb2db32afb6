//! Forward model, sampled records and the analysis chained together.

use dlcz_core::config::ExperimentConfig;
use dlcz_core::detection::{
    read_records_csv, read_records_json, sample_counts, write_records_csv, write_records_json, CountRecord,
};
use dlcz_core::entanglement::{concurrence_restricted, concurrence_with_uncertainty, ChannelBudget, Plane, RestrictedSigma};
use dlcz_core::fock::{DensityOperator, C64};
use dlcz_core::layout::{layout_probabilities, EfficiencyModel, Setting};
use dlcz_core::protocol::{full_experiment, sample_outcome, simulation_efficiency, EnsembleParams};
use dlcz_core::tomography::{
    analyze_records, embed, field_register, restrict, restricted_state, AnalysisOptions, MleOptions,
    RestrictedDensity,
};

fn records_of(cfg: &ExperimentConfig) -> (dlcz_core::protocol::ExperimentOutcome, Vec<CountRecord>) {
    let out = full_experiment(cfg).unwrap();
    let (d, f) = sample_outcome(&out, cfg.trials, cfg.seed).unwrap();
    let records = d.into_iter().chain(f).collect();
    (out, records)
}

#[test]
fn records_survive_csv_and_json() {
    let mut cfg = ExperimentConfig::ideal();
    cfg.ensembles.left.chi = 0.05;
    cfg.ensembles.right.chi = 0.05;
    cfg.trials = 20_000;
    let (_, records) = records_of(&cfg);
    assert_eq!(records.len(), 14);
    let mut csv = Vec::new();
    write_records_csv(&records, &mut csv).unwrap();
    assert_eq!(read_records_csv(csv.as_slice()).unwrap(), records);
    let mut json = Vec::new();
    write_records_json(&records, &mut json).unwrap();
    assert_eq!(read_records_json(json.as_slice()).unwrap(), records);
}

/// Weakly pumped, lossy configuration analysed with the efficiencies it was
/// simulated with: the estimate is referenced at the ensemble output. The
/// two-stage estimate sets `p20 = 0`, so the pump is kept low enough for the
/// two-photon weight to stay below the counting noise.
#[test]
fn weak_pumping_recovers_the_ensemble_output_state() {
    let mut cfg = ExperimentConfig::ideal();
    cfg.channel = ChannelBudget::paper();
    cfg.ensembles.left = EnsembleParams { chi: 0.002, xi: 0.5 };
    cfg.ensembles.right = EnsembleParams { chi: 0.002, xi: 0.45 };
    cfg.interferometer.overlap = 0.9;
    cfg.detectors.d2a = 0.32;
    cfg.detectors.d2b = 0.4;
    cfg.detectors.d2c = 0.4;
    cfg.trials = 10_000_000;
    let (out, records) = records_of(&cfg);
    let truth = restrict(out.plane(Plane::Z2)).unwrap();
    let (res, _) = analyze_records(&records, &simulation_efficiency(&cfg), &AnalysisOptions::default()).unwrap();
    let u = &res.uncertainties;
    for (name, est, sigma, t) in [
        ("p10", res.p10, u.p10, truth.p10),
        ("p01", res.p01, u.p01, truth.p01),
        ("p11", res.p11, u.p11, truth.p11),
        ("|d|", res.d_abs, u.d_abs, truth.d_abs()),
    ] {
        assert!((est - t).abs() < 5.0 * sigma, "{name}: {est:e} ± {sigma:e} vs {t:e}");
    }
    let c = concurrence_restricted(&res.restricted()).concurrence;
    let ct = concurrence_restricted(&truth).concurrence;
    assert!(ct > 0.0 && (c - ct).abs() < 0.1 * ct, "{c} vs {ct}");
}

/// A detector-plane state with the D1a populations and 70 % visibility,
/// measured through the efficiencies behind the corrected plane.
#[test]
fn likelihood_and_two_stage_concurrences_agree_on_table_like_data() {
    let (p10, p01, p11) = (7.38e-3, 7.51e-3, 1.7e-5);
    let d = 0.35 * (p10 + p01);
    let rd = RestrictedDensity::new(1.0 - p10 - p01 - p11, p01, p10, p11, C64::new(d, 0.0)).unwrap();
    let m = restricted_state(&rd, 0.0, 0.0);
    let rho = DensityOperator::new(field_register(), embed(&m)).unwrap();
    let eff = EfficiencyModel { eta_2a: 0.8, eta_2b: 0.8, eta_2c: 0.8, ..EfficiencyModel::unit() };
    let mut records = Vec::new();
    let trials = 20_000_000;
    let diag = layout_probabilities(&rho, &eff, Setting::Diagonal).unwrap();
    records.push(sample_counts(&diag, trials, 11).unwrap());
    for k in 0..13 {
        let phi = std::f64::consts::TAU * k as f64 / 12.0;
        let jp = layout_probabilities(&rho, &eff, Setting::Fringe { phi }).unwrap();
        let mut r = sample_counts(&jp, trials / 13, 100 + k).unwrap();
        r.phase = Some(phi);
        records.push(r);
    }
    let opts = AnalysisOptions { mle: Some(MleOptions::default()), ..AnalysisOptions::default() };
    let (res, est) = analyze_records(&records, &eff, &opts).unwrap();
    let est = est.unwrap();
    let mle = res.mle.as_ref().unwrap();
    assert!(mle.log_likelihood >= mle.two_stage_log_likelihood);

    let u = &res.uncertainties;
    let ts = concurrence_with_uncertainty(&res.restricted(), &RestrictedSigma { p00: u.p00, p11: u.p11, d_abs: u.d_abs }, 0, 0);
    let s = &mle.sigma;
    let ml = concurrence_with_uncertainty(&est.restricted, &RestrictedSigma { p00: s.p00, p11: s.p11, d_abs: s.d_abs }, 0, 0);
    let (c_ts, s_ts, c_mle, s_mle) = (ts.concurrence, ts.sigma, ml.concurrence, ml.sigma);
    let truth = concurrence_restricted(&rd).concurrence;
    assert!((c_ts - c_mle).abs() < s_ts.hypot(s_mle), "{c_ts:e} vs {c_mle:e}");
    assert!((c_ts - truth).abs() < 5.0 * s_ts);
}
