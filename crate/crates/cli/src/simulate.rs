use std::fmt::Write as _;

use dlcz_core::config::LayoutChoice;
use dlcz_core::detection::{write_records_csv, write_records_json, CountRecord, JointProbabilities};
use dlcz_core::entanglement::Plane;
use dlcz_core::fock::DensityOperator;
use dlcz_core::protocol::{full_experiment, sample_outcome, Herald};
use dlcz_core::tomography::{fit_fringe, phase_difference, restrict, FringeFit, FringeScan, RestrictedDensity};
use serde::Serialize;

use crate::error::CliError;
use crate::output::OutDir;
use crate::{run_config, RunArgs, SimulateArgs};

#[derive(Serialize)]
struct PlaneSnapshot {
    plane: Plane,
    n_modes: usize,
    cutoff: usize,
    restricted: RestrictedDensity,
    /// Row-major real and imaginary parts.
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl PlaneSnapshot {
    fn new(plane: Plane, rho: &DensityOperator) -> Result<Self, CliError> {
        let m = rho.matrix();
        let rows = |f: fn(&dlcz_core::fock::C64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Ok(Self {
            plane,
            n_modes: rho.register().n_modes(),
            cutoff: rho.register().cutoff(),
            restricted: restrict(rho)?,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        })
    }
}

#[derive(Serialize)]
struct StateSnapshots {
    herald: Herald,
    exclusive: bool,
    herald_probability: f64,
    truncation_deficit: f64,
    planes: Vec<PlaneSnapshot>,
}

fn probability_rows(out: &mut String, layout: &str, phi: Option<f64>, jp: &JointProbabilities) {
    let phi = phi.map(|p| format!("{p:.15e}")).unwrap_or_default();
    for (pattern, p) in &jp.probabilities {
        let _ = writeln!(out, "{layout},{phi},{pattern},{p:.15e}");
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let cfg = run_config(&args.run)?;
    let mut out = OutDir::create(&args.run.out, "simulate")?;
    let canonical = cfg.to_json();
    out.set_config(&canonical, Some(cfg.seed));
    out.write("config.json", format!("{canonical}\n").as_bytes())?;

    let outcome = full_experiment(&cfg)?;
    let planes = outcome
        .planes
        .iter()
        .map(|(p, rho)| PlaneSnapshot::new(*p, rho))
        .collect::<Result<Vec<_>, _>>()?;
    let det = planes.iter().find(|p| p.plane == Plane::Detector).map(|p| p.restricted);
    out.write_json(
        "states.json",
        &StateSnapshots {
            herald: cfg.herald.which,
            exclusive: cfg.herald.exclusive,
            herald_probability: outcome.field.herald_probability,
            truncation_deficit: outcome.field.truncation_deficit,
            planes,
        },
    )?;

    let mut csv = format!("# detectors={}\nlayout,phase_phi_radians,pattern_bits,probability\n", detector_ids(&outcome));
    if let Some(jp) = &outcome.diagonal {
        probability_rows(&mut csv, "diagonal", None, jp);
    }
    for (phi, jp) in &outcome.fringe {
        probability_rows(&mut csv, "fringe", Some(*phi), jp);
    }
    out.write("probabilities.csv", csv.as_bytes())?;

    if !args.no_records {
        let (diagonal, fringe) = sample_outcome(&outcome, cfg.trials, cfg.seed)?;
        let records: Vec<CountRecord> = diagonal.into_iter().chain(fringe).collect();
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf)?;
        out.write("records.csv", &buf)?;
        let mut buf = Vec::new();
        write_records_json(&records, &mut buf)?;
        buf.push(b'\n');
        out.write("records.json", &buf)?;
    }
    let manifest = out.finish()?;

    say!("herald {} probability {:.4e}", cfg.herald.which, outcome.field.herald_probability);
    if let Some(r) = det {
        say!(
            "detector plane: p00 {:.5} p10 {:.3e} p01 {:.3e} p11 {:.3e} |d| {:.3e}",
            r.p00,
            r.p10,
            r.p01,
            r.p11,
            r.d_abs()
        );
    }
    for o in &manifest.outputs {
        say!("wrote {}", args.run.out.join(&o.path).display());
    }
    Ok(())
}

fn detector_ids(outcome: &dlcz_core::protocol::ExperimentOutcome) -> String {
    outcome
        .diagonal
        .as_ref()
        .or(outcome.fringe.first().map(|f| &f.1))
        .map(|jp| jp.detectors.join(";"))
        .unwrap_or_default()
}

#[derive(Serialize)]
struct HeraldScan {
    herald: Herald,
    herald_probability: f64,
    trials: u64,
    /// Fit of the sampled counts.
    fit: FringeFit,
    /// Fit of the expected counts.
    expected_fit: FringeFit,
}

#[derive(Serialize)]
struct FringeReport {
    heralds: Vec<HeraldScan>,
    /// Arm-A phase of the D1b fringe minus that of the D1a fringe.
    phase_offset: f64,
    sigma_phase_offset: f64,
}

pub fn fringe_scan(args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = run_config(args)?;
    cfg.layout = LayoutChoice::Fringe;
    let mut out = OutDir::create(&args.out, "fringe-scan")?;
    let canonical = cfg.to_json();
    out.set_config(&canonical, Some(cfg.seed));

    let mut csv = String::from("herald,phase_phi_radians,arm,counts,expected,trials\n");
    let mut heralds = Vec::new();
    for h in Herald::BOTH {
        cfg.herald.which = h;
        let outcome = full_experiment(&cfg)?;
        let (_, records) = sample_outcome(&outcome, cfg.trials, cfg.seed)?;
        let sampled = FringeScan::from_records(&records)?;
        let expected = FringeScan::from_probabilities(&outcome.fringe, cfg.trials as f64);
        for (arm, pick) in [("2a", 0), ("2b+2c", 1)] {
            for (s, e) in sampled.points.iter().zip(&expected.points) {
                let (n, m) = if pick == 0 { (s.arm_a, e.arm_a) } else { (s.arm_b, e.arm_b) };
                let _ = writeln!(csv, "{h},{:.15e},{arm},{n},{m:.6e},{}", s.phi, cfg.trials);
            }
        }
        heralds.push(HeraldScan {
            herald: h,
            herald_probability: outcome.field.herald_probability,
            trials: cfg.trials,
            fit: fit_fringe(&sampled)?,
            expected_fit: fit_fringe(&expected)?,
        });
    }
    let (a, b) = (&heralds[0].fit.arm_a, &heralds[1].fit.arm_a);
    let report = FringeReport {
        phase_offset: phase_difference(b.phase, a.phase),
        sigma_phase_offset: a.sigma_phase.hypot(b.sigma_phase),
        heralds,
    };
    out.write("fringe.csv", csv.as_bytes())?;
    out.write_json("fringe_fit.json", &report)?;
    out.finish()?;

    for s in &report.heralds {
        say!(
            "{}: V = {:.4} ± {:.4} (arm 2a {:.4}, arm 2b+2c {:.4}), phase {:.4}",
            s.herald, s.fit.visibility, s.fit.sigma_visibility, s.fit.arm_a.visibility, s.fit.arm_b.visibility, s.fit.phase
        );
    }
    say!("phase offset d1b − d1a = {:.4} ± {:.4} rad", report.phase_offset, report.sigma_phase_offset);
    Ok(())
}
