use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use dlcz_core::detection::{read_records_csv, read_records_json, CountRecord};
use dlcz_core::entanglement::{
    backpropagate_with_uncertainty, concurrence_restricted, concurrence_with_uncertainty, witnesses,
    write_plane_csv, BackpropOptions, ChannelBudget, CoherenceRule, ConcurrenceResult, InputSigma, LossInversion,
    PairStats, Plane, PlaneEstimate, PlaneRow, RestrictedSigma, WitnessReport,
};
use dlcz_core::layout::EfficiencyModel;
use dlcz_core::rng;
use dlcz_core::tomography::{analyze_records, AnalysisOptions, CoherenceMode, MleOptions, TomographyResult};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::OutDir;
use crate::{load_config, parse_coherence, parse_plane, ConfigArgs};

#[derive(Args, Clone, Debug)]
pub struct AnalyzeArgs {
    /// Count records, CSV or JSON (by extension).
    #[arg(long)]
    pub records: PathBuf,
    /// Supplies the channel budget.
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Efficiency model JSON; defaults to the budget seen from `--reference`.
    #[arg(long)]
    pub eff: Option<PathBuf>,
    /// Plane the records are analyzed at.
    #[arg(long, default_value = "detector", value_parser = parse_plane)]
    pub reference: Plane,
    /// Plane to report as the headline result (z0, z1, z2 or detector).
    #[arg(long, value_parser = parse_plane)]
    pub plane: Option<Plane>,
    /// Also run the likelihood fit.
    #[arg(long)]
    pub mle: bool,
    #[arg(long, default_value = "full-inversion", value_parser = parse_coherence)]
    pub coherence: CoherenceMode,
    /// Label for the herald in tables.
    #[arg(long, default_value = "record")]
    pub herald: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Parametric resamples for the uncertainty cross-checks (0 disables).
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap: usize,
}

#[derive(Args, Clone, Debug)]
pub struct BackpropArgs {
    /// `result.json` from `analyze`, or a bare tomography result.
    #[arg(long)]
    pub input: PathBuf,
    /// Supplies the channel budget.
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Plane of the input; read from an `analyze` result when present.
    #[arg(long, value_parser = parse_plane)]
    pub from: Option<Plane>,
    #[arg(long, default_value = "z2", value_parser = parse_plane)]
    pub plane: Plane,
    /// `d / √(α_L α_R)` instead of constant visibility.
    #[arg(long)]
    pub scale_amplitude: bool,
    /// First-order loss inversion instead of the exact one.
    #[arg(long)]
    pub first_order: bool,
    #[arg(long, default_value = "record")]
    pub herald: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap: usize,
}

#[derive(Serialize, Deserialize)]
pub struct AnalysisReport {
    pub herald: String,
    pub reference_plane: Plane,
    pub tomography: TomographyResult,
    pub concurrence: ConcurrenceResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mle_concurrence: Option<ConcurrenceResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessReport>,
    /// The reference plane and every plane upstream of it.
    pub planes: Vec<PlaneEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PlaneEstimate>,
}

fn read_records(path: &Path) -> Result<(Vec<u8>, Vec<CountRecord>), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let records = if json { read_records_json(bytes.as_slice())? } else { read_records_csv(bytes.as_slice())? };
    Ok((bytes, records))
}

fn budget(args: &ConfigArgs, out: &mut OutDir) -> Result<ChannelBudget, CliError> {
    let cfg = load_config(args)?;
    out.set_config(&cfg.to_json(), None);
    Ok(cfg.channel)
}

fn input_sigma(t: &TomographyResult) -> InputSigma {
    let u = &t.uncertainties;
    let s = t.p10 + t.p01;
    InputSigma {
        p00: u.p00,
        p01: u.p01,
        p10: u.p10,
        p11: u.p11,
        d_abs: u.d_abs,
        // the implied visibility carries the uncertainty of |d|
        visibility: if s > 0.0 { 2.0 * u.d_abs / s } else { 0.0 },
    }
}

fn upstream_planes(
    t: &TomographyResult,
    budget: &ChannelBudget,
    from: Plane,
    opts: &BackpropOptions,
    samples: usize,
    seed: u64,
) -> Result<Vec<PlaneEstimate>, CliError> {
    let mut planes: Vec<Plane> = Plane::ALL.into_iter().filter(|p| *p <= from).collect();
    planes.sort_by(|a, b| b.cmp(a));
    planes
        .into_iter()
        .map(|to| {
            let s = rng::derive_seed(seed, &format!("cli/backprop/{to}"));
            Ok(backpropagate_with_uncertainty(&t.restricted(), &input_sigma(t), budget, from, to, opts, samples, s)?)
        })
        .collect()
}

fn write_planes(out: &mut OutDir, herald: &str, planes: &[PlaneEstimate]) -> Result<(), CliError> {
    let rows: Vec<PlaneRow> = planes.iter().map(|p| PlaneRow::new(herald, p)).collect();
    let mut buf = Vec::new();
    write_plane_csv(&rows, &mut buf)?;
    out.write("planes.csv", &buf)
}

fn print_planes(planes: &[PlaneEstimate]) {
    say!("{:<9} {:>11} {:>10} {:>10} {:>10} {:>10}", "plane", "C", "sigma_C", "p10", "p01", "|d|");
    for p in planes {
        let r = &p.restricted;
        say!(
            "{:<9} {:>11.4e} {:>10.2e} {:>10.3e} {:>10.3e} {:>10.3e}",
            p.plane.to_string(),
            p.concurrence.concurrence,
            p.concurrence.sigma,
            r.p10,
            r.p01,
            r.d_abs()
        );
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let mut out = OutDir::create(&args.out, "analyze")?;
    let budget = budget(&args.config, &mut out)?;
    let (bytes, records) = read_records(&args.records)?;
    out.add_input(&args.records, &bytes);
    let eff = match &args.eff {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let eff: EfficiencyModel = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            out.add_input(p, text.as_bytes());
            eff
        }
        None => EfficiencyModel::from_budget(&budget, args.reference),
    };
    if let Some(target) = args.plane {
        if target > args.reference {
            return Err(CliError::Usage(format!("--plane {target} is downstream of --reference {}", args.reference)));
        }
    }

    let opts = AnalysisOptions {
        coherence: args.coherence,
        mle: args.mle.then(MleOptions::default),
        ..AnalysisOptions::default()
    };
    let (tomo, mle) = analyze_records(&records, &eff, &opts)?;
    let u = &tomo.uncertainties;
    let samples = if args.bootstrap > 1 { args.bootstrap } else { 0 };
    let mut concurrence = concurrence_with_uncertainty(
        &tomo.restricted(),
        &RestrictedSigma { p00: u.p00, p11: u.p11, d_abs: u.d_abs },
        samples,
        rng::derive_seed(args.seed, "cli/concurrence"),
    );
    concurrence.herald = Some(args.herald.clone());
    let mle_concurrence = mle.as_ref().zip(tomo.mle.as_ref()).map(|(est, s)| {
        let mut c = concurrence_with_uncertainty(
            &est.restricted,
            &RestrictedSigma { p00: s.sigma.p00, p11: s.sigma.p11, d_abs: s.sigma.d_abs },
            0,
            0,
        );
        c.herald = Some(args.herald.clone());
        c
    });
    let witness = witnesses(&PairStats { p10: tomo.p10, p01: tomo.p01, p11: tomo.p11, sigma: [u.p10, u.p01, u.p11] }, None, None).ok();
    let planes = upstream_planes(&tomo, &budget, args.reference, &BackpropOptions::default(), args.bootstrap, args.seed)?;
    let target = args.plane.and_then(|p| planes.iter().find(|e| e.plane == p).cloned());

    let report = AnalysisReport {
        herald: args.herald.clone(),
        reference_plane: args.reference,
        tomography: tomo,
        concurrence,
        mle_concurrence,
        witness,
        planes,
        target,
    };
    out.write_json("result.json", &report)?;
    write_planes(&mut out, &args.herald, &report.planes)?;
    out.finish()?;
    print_report(&report);
    Ok(())
}

fn print_report(r: &AnalysisReport) {
    let t = &r.tomography;
    let u = &t.uncertainties;
    say!("{} at {} ({:?} coherence)", r.herald, r.reference_plane, t.coherence_mode);
    for (name, v, s) in [
        ("p00", t.p00, u.p00),
        ("p10", t.p10, u.p10),
        ("p01", t.p01, u.p01),
        ("p11", t.p11, u.p11),
        ("p02", t.p02, u.p02),
        ("|d|", t.d_abs, u.d_abs),
        ("V", t.visibility, u.visibility),
    ] {
        say!("  {name:<4} {v:>12.5e} ± {s:.1e}");
    }
    if let Some(w) = &r.witness {
        say!("  h_c2 {:>12.4} ± {:.4}", w.h_c2, w.sigma_h_c2);
    }
    say!("  C    {:>12.4e} ± {:.1e}", r.concurrence.concurrence, r.concurrence.sigma);
    if let (Some(m), Some(c)) = (&t.mle, &r.mle_concurrence) {
        say!("  MLE: C {:.4e} ± {:.1e}, log-likelihood gain {:.3}", c.concurrence, c.sigma, m.log_likelihood - m.two_stage_log_likelihood);
    }
    for f in &t.flags {
        say!("  flag: {f}");
    }
    print_planes(&r.planes);
    if let Some(p) = &r.target {
        say!("{}: C = {:.4e} ± {:.1e}", p.plane, p.concurrence.concurrence, p.concurrence.sigma);
    }
}

pub fn backprop(args: &BackpropArgs) -> Result<(), CliError> {
    let mut out = OutDir::create(&args.out, "backprop")?;
    let budget = budget(&args.config, &mut out)?;
    let text = fs::read_to_string(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    out.add_input(&args.input, text.as_bytes());
    let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", args.input.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let (tomo, stored_plane) = if value.get("tomography").is_some() {
        let r: AnalysisReport = serde_json::from_value(value).map_err(bad)?;
        (r.tomography, Some(r.reference_plane))
    } else {
        (serde_json::from_value::<TomographyResult>(value).map_err(bad)?, None)
    };
    let from = args.from.or(stored_plane).unwrap_or(Plane::Detector);
    if args.plane > from {
        return Err(CliError::Usage(format!("--plane {} is downstream of the input plane {from}", args.plane)));
    }
    let opts = BackpropOptions {
        inversion: if args.first_order { LossInversion::FirstOrder } else { LossInversion::Exact },
        coherence: if args.scale_amplitude { CoherenceRule::ScaleAmplitude } else { CoherenceRule::ConstantVisibility },
        visibility: None,
    };
    let planes: Vec<PlaneEstimate> = upstream_planes(&tomo, &budget, from, &opts, args.bootstrap, args.seed)?
        .into_iter()
        .filter(|p| p.plane >= args.plane)
        .collect();
    out.write_json("backprop.json", &planes)?;
    write_planes(&mut out, &args.herald, &planes)?;
    out.finish()?;
    say!("{} from {from}: C = {:.4e}", args.herald, concurrence_restricted(&tomo.restricted()).concurrence);
    print_planes(&planes);
    Ok(())
}
