use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::diagonal::canonical_tally;
use super::restricted::{effects, restrict_matrix, RestrictedDensity, I00, I01, I02, I10, I11, I20};
use super::TomographyError;
use crate::detection::CountRecord;
use crate::fock::C64;
use crate::layout::{EfficiencyModel, Setting};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once the certified distance to the maximum log-likelihood
    /// (count-weighted, natural log) falls below this.
    pub tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iterations: 50_000, tol: 1e-4 }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<(), TomographyError> {
        if !(self.tol > 0.0) || self.max_iterations == 0 {
            return Err(TomographyError::Option("MLE needs tol > 0 and at least one iteration".into()));
        }
        Ok(())
    }
}

/// Observed counts paired with their POVM elements over the two-photon
/// basis, for records of both layouts. A record with a phase is a fringe
/// setting, one without is the diagonal setting.
///
/// Patterns no state of the basis can produce (three clicks) are left out
/// and counted in [`excluded`](Self::excluded).
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    terms: Vec<(DMatrix<C64>, f64)>,
    total: f64,
    excluded: u64,
}

impl MeasurementModel {
    pub fn from_records(records: &[CountRecord], eff: &EfficiencyModel) -> Result<Self, TomographyError> {
        if records.is_empty() {
            return Err(TomographyError::NoData("no records for the likelihood".into()));
        }
        eff.validate()?;
        let mut cache: BTreeMap<Option<u64>, BTreeMap<_, DMatrix<C64>>> = BTreeMap::new();
        let mut terms = Vec::new();
        let mut total = 0.0;
        let mut excluded = 0;
        for r in records {
            let key = r.phase.map(f64::to_bits);
            if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(key) {
                let setting = match r.phase {
                    Some(phi) => Setting::Fringe { phi },
                    None => Setting::Diagonal,
                };
                e.insert(effects(eff, setting)?);
            }
            let e = &cache[&key];
            for (p, c) in canonical_tally(r)? {
                if c == 0 {
                    continue;
                }
                if e[&p].iter().all(|z| z.norm() < 1e-15) {
                    excluded += c;
                    continue;
                }
                terms.push((e[&p].clone(), c as f64));
                total += c as f64;
            }
        }
        Ok(Self { terms, total, excluded })
    }

    /// Counts of patterns outside the reach of the two-photon basis.
    pub fn excluded(&self) -> u64 {
        self.excluded
    }

    pub fn trials(&self) -> f64 {
        self.total
    }

    fn prob(e: &DMatrix<C64>, rho: &DMatrix<C64>) -> f64 {
        // Tr(ρ E) = Σ ρ_ij E_ji
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                s += (rho[(i, j)] * e[(j, i)]).re;
            }
        }
        s
    }

    /// `Σ n log p` for a 6×6 state over the two-photon basis; the state is
    /// normalised first.
    pub fn log_likelihood(&self, rho: &DMatrix<C64>) -> f64 {
        let tr = rho.trace().re;
        self.terms
            .iter()
            .map(|(e, n)| {
                let p = Self::prob(e, rho) / tr;
                if p > 0.0 { n * p.ln() } else { f64::NEG_INFINITY }
            })
            .sum()
    }

    /// Standard errors of `(p00, p01, p10, p11, |d|)` at a unit-trace state,
    /// from the observed information over the real parameters of the block
    /// form (`p00` eliminated by the trace). A two-photon population worth
    /// fewer than ten counts is taken to sit on the positivity boundary:
    /// it and the coherences it bounds are held fixed. Unidentified
    /// directions are dropped by a pseudo-inverse.
    pub fn restricted_sigma(&self, rho: &DMatrix<C64>) -> [f64; 5] {
        let pinned = |k: usize| k >= I02 && rho[(k, k)].re * self.total < 10.0;
        let dirs: Vec<DMatrix<C64>> =
            block_directions().into_iter().filter(|(a, b, _)| !pinned(*a) && !pinned(*b)).map(|x| x.2).collect();
        let k = dirs.len();
        let mut info = DMatrix::<f64>::zeros(k, k);
        for (e, n) in &self.terms {
            let p = Self::prob(e, rho);
            if !(p > 0.0) {
                continue;
            }
            let g: Vec<f64> = dirs.iter().map(|b| Self::prob(e, b)).collect();
            for i in 0..k {
                for j in 0..k {
                    info[(i, j)] += n * g[i] * g[j] / (p * p);
                }
            }
        }
        let eig = SymmetricEigen::new(info);
        let cutoff = eig.eigenvalues.max() * 1e-12;
        let mut cov = DMatrix::<f64>::zeros(k, k);
        for (m, &l) in eig.eigenvalues.iter().enumerate() {
            if l > cutoff {
                let v = eig.eigenvectors.column(m);
                cov += v * v.transpose() / l;
            }
        }
        // populations come first, 01, 10 and 11 leading, then d
        let pops = dirs.iter().take_while(|b| b[(I00, I00)].re != 0.0).count();
        let d = rho[(I10, I01)];
        let r = d.norm();
        let mut grads = vec![vec![0.0; k]; 5];
        for g in &mut grads[0][..pops] {
            *g = -1.0;
        }
        for (row, col) in [(1, 0), (2, 1), (3, 2)] {
            grads[row][col] = 1.0;
        }
        if r > 0.0 {
            grads[4][pops] = d.re / r;
            grads[4][pops + 1] = d.im / r;
        } else {
            grads[4][pops] = 1.0;
        }
        let mut out = [0.0; 5];
        for (o, g) in out.iter_mut().zip(&grads) {
            let g = DVector::from_column_slice(g);
            *o = (g.transpose() * &cov * &g)[0].max(0.0).sqrt();
        }
        out
    }

    fn probabilities(&self, rho: &DMatrix<C64>) -> Vec<f64> {
        self.terms.iter().map(|(e, _)| Self::prob(e, rho)).collect()
    }

    /// `R = Σ (n/N) E / p`.
    fn r_operator(&self, p: &[f64]) -> DMatrix<C64> {
        let mut r = DMatrix::zeros(6, 6);
        for ((e, n), p) in self.terms.iter().zip(p) {
            r += e * C64::new(n / (self.total * p), 0.0);
        }
        r
    }

    /// `LL(new) − LL(old)` without the cancellation of two large sums.
    fn delta(&self, new: &[f64], old: &[f64]) -> f64 {
        let mut s = 0.0;
        for (((_, n), a), b) in self.terms.iter().zip(new).zip(old) {
            if !(*a > 0.0) {
                return f64::NEG_INFINITY;
            }
            s += n * ((a - b) / b).ln_1p();
        }
        s
    }
}

/// Tangent directions of the block form, each tagged with the two basis
/// states it touches: populations of 01, 10, 11, 02 and 20 against 00, then
/// real and imaginary parts of `d`, `e`, `f`, `g`.
fn block_directions() -> Vec<(usize, usize, DMatrix<C64>)> {
    let mut out = Vec::new();
    for k in [I01, I10, I11, I02, I20] {
        let mut b = DMatrix::zeros(6, 6);
        b[(k, k)] = C64::new(1.0, 0.0);
        b[(I00, I00)] = C64::new(-1.0, 0.0);
        out.push((k, k, b));
    }
    for (a, c) in [(I10, I01), (I11, I02), (I11, I20), (I02, I20)] {
        let mut re = DMatrix::zeros(6, 6);
        re[(a, c)] = C64::new(1.0, 0.0);
        re[(c, a)] = C64::new(1.0, 0.0);
        let mut im = DMatrix::zeros(6, 6);
        im[(a, c)] = C64::new(0.0, 1.0);
        im[(c, a)] = C64::new(0.0, -1.0);
        out.push((a, c, re));
        out.push((a, c, im));
    }
    out
}

/// Maximum-likelihood state and its restriction.
#[derive(Clone, Debug, PartialEq)]
pub struct MleEstimate {
    /// Unit-trace state over the two-photon basis.
    pub rho: DMatrix<C64>,
    pub restricted: RestrictedDensity,
    pub p02: f64,
    pub p20: f64,
    pub log_likelihood: f64,
    /// Certified bound on `max LL − LL`.
    pub duality_gap: f64,
    pub iterations: usize,
}

fn estimate(rho: DMatrix<C64>, ll: f64, gap: f64, iterations: usize) -> Result<MleEstimate, TomographyError> {
    Ok(MleEstimate {
        restricted: restrict_matrix(&rho)?,
        p02: rho[(I02, I02)].re,
        p20: rho[(I20, I20)].re,
        rho,
        log_likelihood: ll,
        duality_gap: gap,
        iterations,
    })
}

/// Largest eigenvalue of the Hermitian part and its eigenvector.
fn top_eigenpair(m: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let k = eig.eigenvalues.imax();
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Exact line search along `ρ → (1 − s) ρ + s v v†`, whose slope at
/// `s = 0` is the duality gap. The log-likelihood is concave in `s`, so the
/// maximiser is the root of its derivative.
fn frank_wolfe_step(model: &MeasurementModel, rho: &DMatrix<C64>, v: &DVector<C64>, p: &[f64]) -> (DMatrix<C64>, Vec<f64>) {
    let q = model.probabilities(&(v * v.adjoint()));
    let slope = |s: f64| -> f64 {
        model.terms.iter().zip(p).zip(&q).map(|(((_, n), a), b)| n * (b - a) / (a + s * (b - a))).sum()
    };
    let s = if slope(1.0) >= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let cand = rho * C64::new(1.0 - s, 0.0) + v * v.adjoint() * C64::new(s, 0.0);
    let pc = p.iter().zip(&q).map(|(a, b)| a + s * (b - a)).collect();
    (cand, pc)
}

/// [`mle_fit_from`] starting from the maximally mixed state.
pub fn mle_fit(model: &MeasurementModel, opts: &MleOptions) -> Result<MleEstimate, TomographyError> {
    let start = DMatrix::<C64>::identity(6, 6) / C64::new(6.0, 0.0);
    mle_fit_from(model, &start, opts)
}

/// Maximises the multinomial likelihood of both layouts jointly over
/// positive unit-trace states.
///
/// Each step is the congruence `ρ → G ρ G† / Tr` with `G = I + t (R − I)`,
/// which keeps `ρ` positive; `t = 1` is the classic `RρR` update. The step
/// length grows after every accepted step and is halved until the
/// likelihood increases, so the likelihood never decreases. When no
/// congruence step improves, a Frank-Wolfe step towards the top eigenvector
/// of `R` is taken instead. The iteration
/// stops on the concavity bound `max LL − LL ≤ N (λ_max(R) − 1)`, or when
/// neither step improves the likelihood in floating point; the bound at the
/// final iterate is reported either way.
///
/// Because every POVM element is block diagonal in total photon number, a
/// block-diagonal start stays block diagonal.
pub fn mle_fit_from(
    model: &MeasurementModel,
    start: &DMatrix<C64>,
    opts: &MleOptions,
) -> Result<MleEstimate, TomographyError> {
    opts.validate()?;
    if start.shape() != (6, 6) {
        return Err(TomographyError::Option("MLE start must be 6×6".into()));
    }
    let id = DMatrix::<C64>::identity(6, 6);
    let mut rho = start / C64::new(start.trace().re, 0.0);
    if !model.log_likelihood(&rho).is_finite() {
        return Err(TomographyError::Option("MLE start assigns zero probability to observed events".into()));
    }
    let mut p = model.probabilities(&rho);
    let mut r = model.r_operator(&p);
    let mut t = 1.0f64;
    let mut gap = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let (lmax, v) = top_eigenpair(&r);
        gap = (model.total * (lmax - 1.0)).max(0.0);
        if gap < opts.tol {
            let ll = model.log_likelihood(&rho);
            return estimate(rho, ll, gap, it);
        }
        let step = &r - &id;
        let mut moved = false;
        while t >= 1e-12 {
            let g = &id + &step * C64::new(t, 0.0);
            let mut cand = &g * &rho * g.adjoint();
            cand = (&cand + cand.adjoint()) * C64::new(0.5, 0.0);
            cand /= C64::new(cand.trace().re, 0.0);
            let pc = model.probabilities(&cand);
            let d = model.delta(&pc, &p);
            if d > 0.0 {
                rho = cand;
                p = pc;
                t = (t * 2.0).min(1e6);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // the congruence cannot revive directions that have collapsed;
            // step towards the top eigenvector instead
            let (cand, pc) = frank_wolfe_step(model, &rho, &v, &p);
            let d = model.delta(&pc, &p);
            if !(d > 0.0) {
                // no representable improvement left: the remaining gain is
                // below rounding even where the linear bound is loose
                let ll = model.log_likelihood(&rho);
                return estimate(rho, ll, gap, it);
            }
            rho = cand;
            p = pc;
            t = 1.0;
        }
        r = model.r_operator(&p);
    }
    let ll = model.log_likelihood(&rho);
    let best = estimate(rho, ll, gap, opts.max_iterations)?;
    Err(TomographyError::NotConverged { iterations: opts.max_iterations, gap, best: Box::new(best) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::sample_counts;
    use crate::fock::DensityOperator;
    use crate::layout::layout_probabilities;
    use crate::tomography::restricted::{embed, field_register};

    fn state(p: [f64; 4], d: C64) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(6, 6);
        for (i, v) in [(I00, p[0]), (I01, p[1]), (I10, p[2]), (I11, p[3])] {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m[(I10, I01)] = d;
        m[(I01, I10)] = d.conj();
        m
    }

    fn records(m6: &DMatrix<C64>, eff: &EfficiencyModel, trials: u64) -> Vec<CountRecord> {
        let rho = DensityOperator::new(field_register(), embed(m6)).unwrap();
        let mut out = vec![sample_counts(&layout_probabilities(&rho, eff, Setting::Diagonal).unwrap(), trials, 1).unwrap()];
        for k in 0..12 {
            let phi = std::f64::consts::TAU * k as f64 / 12.0;
            let jp = layout_probabilities(&rho, eff, Setting::Fringe { phi }).unwrap();
            let mut r = sample_counts(&jp, trials / 12, 100 + k).unwrap();
            r.phase = Some(phi);
            out.push(r);
        }
        out
    }

    #[test]
    fn vacuum_data_gives_vacuum() {
        let eff = EfficiencyModel { eta_l: 0.5, eta_r: 0.5, ..EfficiencyModel::unit() };
        let recs = records(&state([1.0, 0.0, 0.0, 0.0], C64::new(0.0, 0.0)), &eff, 10_000);
        let opts = MleOptions { tol: 1e-3, ..MleOptions::default() };
        let est = match mle_fit(&MeasurementModel::from_records(&recs, &eff).unwrap(), &opts) {
            Ok(e) => e,
            Err(TomographyError::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        assert!(est.rho[(I00, I00)].re > 1.0 - 1e-3);
    }

    #[test]
    fn recovers_an_entangled_state() {
        let eff = EfficiencyModel { eta_l: 0.6, eta_r: 0.7, eta_2b: 0.8, ..EfficiencyModel::unit() };
        let truth = state([0.6, 0.2, 0.15, 0.05], C64::from_polar(0.15, 0.7));
        let recs = records(&truth, &eff, 10_000_000);
        let model = MeasurementModel::from_records(&recs, &eff).unwrap();
        let est = mle_fit(&model, &MleOptions::default()).unwrap();
        let fid = crate::fock::fidelity(
            &DensityOperator::new(field_register(), embed(&est.rho)).unwrap(),
            &DensityOperator::new(field_register(), embed(&truth)).unwrap(),
        )
        .unwrap();
        assert!(fid > 0.999, "fidelity {fid}");
        assert!(model.log_likelihood(&est.rho) >= model.log_likelihood(&truth));
        assert!((est.restricted.d - truth[(I10, I01)]).norm() < 0.01);
    }
}
