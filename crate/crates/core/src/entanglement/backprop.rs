use std::io::Write;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    concurrence_restricted, ChannelBudget, ConcurrenceResult, EntanglementError,
    PathBudget, Plane,
};
use crate::fock::C64;
use crate::rng;
use crate::tomography::RestrictedDensity;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossInversion {
    /// Inverse of the two-mode attenuation channel on the restricted block,
    /// including the feed of `p11` into the single-photon populations.
    #[default]
    Exact,
    /// `p10/α_L`, `p01/α_R`, `p11/(α_L α_R)`.
    FirstOrder,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceRule {
    /// `|d| = V (p10 + p01) / 2` at the target plane.
    #[default]
    ConstantVisibility,
    /// `d / √(α_L α_R)`, the exact inverse for the coherence.
    ScaleAmplitude,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BackpropOptions {
    pub inversion: LossInversion,
    pub coherence: CoherenceRule,
    /// Visibility held constant; defaults to the one implied by the input,
    /// `2|d| / (p10 + p01)`.
    pub visibility: Option<f64>,
}

/// The restricted parameters upstream of two path attenuations `(α_L, α_R)`.
pub fn invert_attenuation(
    rd: &RestrictedDensity,
    (al, ar): (f64, f64),
    opts: &BackpropOptions,
) -> Result<RestrictedDensity, EntanglementError> {
    if !(al > 0.0 && al <= 1.0 && ar > 0.0 && ar <= 1.0) {
        return Err(EntanglementError::Budget(format!("attenuations ({al}, {ar}) outside (0, 1]")));
    }
    let p11 = rd.p11 / (al * ar);
    let (p10, p01) = match opts.inversion {
        LossInversion::Exact => ((rd.p10 - al * (1.0 - ar) * p11) / al, (rd.p01 - ar * (1.0 - al) * p11) / ar),
        LossInversion::FirstOrder => (rd.p10 / al, rd.p01 / ar),
    };
    let p00 = rd.p_tilde - p10 - p01 - p11;
    for (name, v) in [("p00", p00), ("p01", p01), ("p10", p10), ("p11", p11)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(EntanglementError::Unphysical(format!("{name} = {v:.4e}")));
        }
    }
    let phase = if rd.d_abs() > 0.0 { rd.d / rd.d_abs() } else { C64::new(1.0, 0.0) };
    let d = match opts.coherence {
        CoherenceRule::ConstantVisibility => {
            let s_in = rd.p10 + rd.p01;
            let v = match opts.visibility {
                Some(v) => v,
                None if s_in > 0.0 => 2.0 * rd.d_abs() / s_in,
                None => 0.0,
            };
            phase * (0.5 * v * (p10 + p01))
        }
        CoherenceRule::ScaleAmplitude => rd.d / (al * ar).sqrt(),
    };
    Ok(RestrictedDensity { p00, p01, p10, p11, d, p_tilde: rd.p_tilde })
}

fn check_direction(from: Plane, to: Plane) -> Result<(), EntanglementError> {
    // upstream planes order first
    if to > from {
        return Err(EntanglementError::Budget(format!("{to} is downstream of {from}")));
    }
    Ok(())
}

/// Moves a restricted state referenced at `from` back to the upstream
/// plane `to` through the budget components in between.
pub fn backpropagate(
    rd: &RestrictedDensity,
    budget: &ChannelBudget,
    from: Plane,
    to: Plane,
    opts: &BackpropOptions,
) -> Result<RestrictedDensity, EntanglementError> {
    check_direction(from, to)?;
    budget.validate().map_err(EntanglementError::Budget)?;
    invert_attenuation(rd, budget.segment(to, from), opts)
}

/// Standard errors of the restricted inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputSigma {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub d_abs: f64,
    pub visibility: f64,
}

/// Back-propagated state at one plane with its concurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneEstimate {
    pub plane: Plane,
    pub restricted: RestrictedDensity,
    pub concurrence: ConcurrenceResult,
    /// From counting statistics alone.
    pub sigma_counts: f64,
    /// From the budget component errors alone.
    pub sigma_budget: f64,
    /// Spread over parametric resamples of both.
    pub sigma_bootstrap: Option<f64>,
}

const N_INPUTS: usize = 6;

fn inputs(rd: &RestrictedDensity, opts: &BackpropOptions) -> [f64; N_INPUTS] {
    let s = rd.p10 + rd.p01;
    let v = opts.visibility.unwrap_or(if s > 0.0 { 2.0 * rd.d_abs() / s } else { 0.0 });
    [rd.p00, rd.p01, rd.p10, rd.p11, rd.d_abs(), v]
}

fn components(to: Plane, from: Plane) -> Vec<(bool, usize)> {
    PathBudget::segment_indices(to, from).flat_map(|i| [(false, i), (true, i)]).collect()
}

fn perturbed(budget: &ChannelBudget, which: (bool, usize), delta: f64) -> ChannelBudget {
    let mut b = *budget;
    let path = if which.0 { &mut b.right } else { &mut b.left };
    let c = match which.1 {
        0 => &mut path.filter_cell,
        1 => &mut path.fiber_coupling,
        2 => &mut path.filter_1064,
        _ => &mut path.detector,
    };
    c.value = (c.value + delta).clamp(1e-9, 1.0);
    b
}

fn component_error(budget: &ChannelBudget, which: (bool, usize)) -> f64 {
    let p = if which.0 { &budget.right } else { &budget.left };
    p.components()[which.1].error
}

/// `C` at `to` as a function of the inputs and the budget.
fn target_c(
    x: &[f64; N_INPUTS],
    budget: &ChannelBudget,
    from: Plane,
    to: Plane,
    opts: &BackpropOptions,
) -> Result<f64, EntanglementError> {
    let rd = RestrictedDensity::new(x[0], x[1], x[2], x[3], C64::new(x[4].abs(), 0.0))?;
    let o = BackpropOptions { visibility: Some(x[5]), ..*opts };
    let up = invert_attenuation(&rd, budget.segment(to, from), &o)?;
    Ok(concurrence_restricted(&up).concurrence)
}

/// [`backpropagate`] with counting and budget uncertainties on `C`,
/// combined in quadrature, and a `samples`-draw parametric bootstrap when
/// `samples > 1`.
#[allow(clippy::too_many_arguments)]
pub fn backpropagate_with_uncertainty(
    rd: &RestrictedDensity,
    sigma: &InputSigma,
    budget: &ChannelBudget,
    from: Plane,
    to: Plane,
    opts: &BackpropOptions,
    samples: usize,
    seed: u64,
) -> Result<PlaneEstimate, EntanglementError> {
    let up = backpropagate(rd, budget, from, to, opts)?;
    let x0 = inputs(rd, opts);
    let sig = [sigma.p00, sigma.p01, sigma.p10, sigma.p11, sigma.d_abs, sigma.visibility];
    let mut var_counts = 0.0;
    for k in 0..N_INPUTS {
        if sig[k] == 0.0 {
            continue;
        }
        let h = (sig[k] * 1e-3).max(1e-12);
        let mut a = x0;
        let mut b = x0;
        a[k] += h;
        b[k] -= h;
        let g = (target_c(&a, budget, from, to, opts)? - target_c(&b, budget, from, to, opts)?) / (2.0 * h);
        var_counts += (g * sig[k]).powi(2);
    }
    let mut var_budget = 0.0;
    for w in components(to, from) {
        let e = component_error(budget, w);
        if e == 0.0 {
            continue;
        }
        let h = 1e-6;
        let g = (target_c(&x0, &perturbed(budget, w, h), from, to, opts)?
            - target_c(&x0, &perturbed(budget, w, -h), from, to, opts)?)
            / (2.0 * h);
        var_budget += (g * e).powi(2);
    }
    let sigma_bootstrap = (samples > 1).then(|| {
        let mut r = rng::stream(seed, &format!("entanglement/backprop/{to}"));
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let comps = components(to, from);
        let mut draws = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut x = x0;
            for k in 0..N_INPUTS {
                x[k] += sig[k] * std.sample(&mut r);
            }
            let mut b = *budget;
            for &w in &comps {
                b = perturbed(&b, w, component_error(budget, w) * std.sample(&mut r));
            }
            if let Ok(c) = target_c(&x, &b, from, to, opts) {
                draws.push(c);
            }
        }
        let n = draws.len().max(2) as f64;
        let mean = draws.iter().sum::<f64>() / n;
        (draws.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    let mut conc = concurrence_restricted(&up);
    conc.sigma = (var_counts + var_budget).sqrt();
    conc.sigma_mc = sigma_bootstrap;
    Ok(PlaneEstimate {
        plane: to,
        restricted: up,
        concurrence: conc,
        sigma_counts: var_counts.sqrt(),
        sigma_budget: var_budget.sqrt(),
        sigma_bootstrap,
    })
}

/// One row of the per-plane table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneRow {
    pub plane: Plane,
    pub herald: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma_c: f64,
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub d_abs: f64,
}

impl PlaneRow {
    pub fn new(herald: &str, est: &PlaneEstimate) -> Self {
        let r = &est.restricted;
        Self {
            plane: est.plane,
            herald: herald.to_string(),
            c: est.concurrence.concurrence,
            sigma_c: est.concurrence.sigma,
            p00: r.p00,
            p01: r.p01,
            p10: r.p10,
            p11: r.p11,
            d_abs: r.d_abs(),
        }
    }
}

/// Writes rows as CSV with the header
/// `plane,herald,C,sigma_C,p00,p01,p10,p11,d_abs`.
pub fn write_plane_csv<W: Write>(rows: &[PlaneRow], w: W) -> Result<(), EntanglementError> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| EntanglementError::Csv(e.to_string());
    wr.write_record(["plane", "herald", "C", "sigma_C", "p00", "p01", "p10", "p11", "d_abs"]).map_err(err)?;
    for r in rows {
        wr.write_record([
            r.plane.to_string(),
            r.herald.clone(),
            format!("{:.6e}", r.c),
            format!("{:.6e}", r.sigma_c),
            format!("{:.8e}", r.p00),
            format!("{:.8e}", r.p01),
            format!("{:.8e}", r.p10),
            format!("{:.8e}", r.p11),
            format!("{:.8e}", r.d_abs),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| EntanglementError::Csv(e.to_string()))
}
