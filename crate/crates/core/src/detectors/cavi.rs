//! Coordinate-ascent variational inference of the activity pattern.
//!
//! Active symbols are modelled as unit-variance complex Gaussians after
//! dividing the observation by `sigma_s`, so the composite covariance is
//! `C = sum_t chi_t a_t a_t^H + gamma^{-1} I`. For index `l` the two
//! hypotheses `x_l in {0, 1}` replace `chi_l` by `x_l`; the update sets
//! `chi_l` to the normalized `exp(-r^H R_l(x)^{-1} r - log det R_l(x))`.
//!
//! `C^{-1}`, `log det C` and `C^{-1} r` are carried across updates with
//! Sherman-Morrison and the matrix determinant lemma, so one sweep costs
//! `O(L^2 N)`.

use crate::error::{invalid, Result, ScimError};
use crate::linalg::{dotc, hpd_inverse_logdet, CMatrix, C64};
use crate::precoding::MeasurementModel;

use super::select_support;

/// Smallest admissible `1 - chi alpha` / `1 + delta alpha` before the
/// carried inverse is rebuilt from scratch.
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaviOptions {
    pub n_run: usize,
    pub subblock: Option<usize>,
}

/// Variational state after some number of coordinate updates.
#[derive(Debug, Clone, PartialEq)]
pub struct CaviState {
    pub chi_bar: Vec<f64>,
    /// Inverse of `sum_t chi_t a_t a_t^H + gamma^{-1} I`.
    pub inv_cov: CMatrix,
    pub logdet: f64,
    /// Completed sweeps.
    pub iteration: usize,
}

/// One coordinate update, reported to an observer.
#[derive(Debug)]
pub struct CaviStep<'a> {
    /// Sweep number, starting at 1.
    pub iteration: usize,
    pub index: usize,
    /// `chi_l` before the update.
    pub previous: f64,
    /// Unnormalized `log chi_l(x)` for `x = 0` and `x = 1`.
    pub log_chi: [f64; 2],
    /// State after the update.
    pub state: &'a CaviState,
    /// Whether the carried inverse had to be rebuilt densely for this step.
    pub rebuilt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaviOutput {
    /// Selected global column indices per device, ascending.
    pub supports: Vec<Vec<usize>>,
    pub state: CaviState,
}

/// Runs CAVI on `model` and selects `q_per_device` active indices per device.
pub fn cavi(r: &[C64], model: &MeasurementModel, q_per_device: usize, opts: &CaviOptions) -> Result<CaviOutput> {
    let q_total = q_per_device * model.devices();
    let state = cavi_activity(
        r,
        model.matrix(),
        model.gamma(),
        model.symbol_energy(),
        q_total,
        opts.n_run,
        None,
    )?;
    let mut supports = Vec::with_capacity(model.devices());
    for range in model.layout() {
        let local = select_support(&state.chi_bar[range.clone()], q_per_device, opts.subblock)?;
        supports.push(local.into_iter().map(|j| j + range.start).collect());
    }
    Ok(CaviOutput { supports, state })
}

/// Activity probabilities after `n_run` ascending sweeps, starting from the
/// uniform value `q_total / N`.
pub fn cavi_activity(
    r: &[C64],
    a: &CMatrix,
    gamma: f64,
    symbol_energy: f64,
    q_total: usize,
    n_run: usize,
    mut observer: Option<&mut dyn FnMut(&CaviStep<'_>)>,
) -> Result<CaviState> {
    let (rows, cols) = a.shape();
    if r.len() != rows {
        return Err(ScimError::DimensionMismatch(format!(
            "observation length {} vs {rows} rows",
            r.len()
        )));
    }
    if n_run == 0 {
        return Err(invalid("CAVI needs n_run >= 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma must be positive and finite, got {gamma}")));
    }
    if !(symbol_energy > 0.0) {
        return Err(invalid("symbol energy must be positive"));
    }
    if q_total == 0 || q_total > cols {
        return Err(invalid(format!("{q_total} active indices among {cols} columns")));
    }

    let scale = 1.0 / symbol_energy.sqrt();
    let obs: Vec<C64> = r.iter().map(|z| z * scale).collect();
    let mut work = Workspace::new(a, &obs, vec![q_total as f64 / cols as f64; cols], 1.0 / gamma)?;
    let data = a.as_slice();
    let mut w = vec![C64::new(0.0, 0.0); rows];

    for iteration in 1..=n_run {
        for l in 0..cols {
            let col = &data[l * rows..(l + 1) * rows];
            let c = work.state.chi_bar[l];
            work.apply_inverse(col, &mut w);
            let mut alpha = dotc(col, &w).re;
            let mut rebuilt = false;
            if 1.0 - c * alpha <= PIVOT_EPS {
                work.rebuild()?;
                work.apply_inverse(col, &mut w);
                alpha = dotc(col, &w).re;
                rebuilt = true;
                if 1.0 - c * alpha <= PIVOT_EPS {
                    return Err(ScimError::NotPositiveDefinite);
                }
            }
            let pivot = 1.0 - c * alpha;
            let r_w = dotc(&obs, &w);
            let beta = alpha / pivot;
            let rho2 = r_w.norm_sqr() / (pivot * pivot);
            let quad0 = work.quad + c * r_w.norm_sqr() / pivot;
            let logdet0 = work.state.logdet + pivot.ln();
            let gain = rho2 / (1.0 + beta);
            let log_ratio = gain - (1.0 + beta).ln();
            let log_chi = [-quad0 - logdet0, -(quad0 - gain) - (logdet0 + (1.0 + beta).ln())];

            let updated = logistic(log_ratio);
            let delta = updated - c;
            if delta != 0.0 {
                let denom = 1.0 + delta * alpha;
                if denom <= PIVOT_EPS {
                    work.state.chi_bar[l] = updated;
                    work.rebuild()?;
                    rebuilt = true;
                } else {
                    work.rank_one(&w, r_w, delta / denom);
                    work.state.logdet += denom.ln();
                    work.state.chi_bar[l] = updated;
                }
            }
            if let Some(obs_fn) = observer.as_deref_mut() {
                obs_fn(&CaviStep {
                    iteration,
                    index: l,
                    previous: c,
                    log_chi,
                    state: &work.state,
                    rebuilt,
                });
            }
        }
        work.state.iteration = iteration;
    }
    Ok(work.state)
}

/// Numerically safe `1 / (1 + e^{-x})`.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sum_t chi_t a_t a_t^H + noise_var I`, built densely.
pub fn dense_covariance(a: &CMatrix, chi_bar: &[f64], noise_var: f64) -> CMatrix {
    let rows = a.nrows();
    let mut scaled = a.clone();
    for (j, &c) in chi_bar.iter().enumerate() {
        let s = c.sqrt();
        for x in scaled.column_mut(j).iter_mut() {
            *x *= s;
        }
    }
    let mut cov = &scaled * scaled.adjoint();
    for i in 0..rows {
        cov[(i, i)] += C64::new(noise_var, 0.0);
    }
    cov
}

struct Workspace<'a> {
    a: &'a CMatrix,
    obs: &'a [C64],
    noise_var: f64,
    state: CaviState,
    /// `C^{-1} r`.
    inv_obs: Vec<C64>,
    /// `r^H C^{-1} r`.
    quad: f64,
}

impl<'a> Workspace<'a> {
    fn new(a: &'a CMatrix, obs: &'a [C64], chi_bar: Vec<f64>, noise_var: f64) -> Result<Self> {
        let rows = a.nrows();
        let mut ws = Workspace {
            a,
            obs,
            noise_var,
            state: CaviState {
                chi_bar,
                inv_cov: CMatrix::zeros(rows, rows),
                logdet: 0.0,
                iteration: 0,
            },
            inv_obs: vec![C64::new(0.0, 0.0); rows],
            quad: 0.0,
        };
        ws.rebuild()?;
        Ok(ws)
    }

    fn rebuild(&mut self) -> Result<()> {
        let cov = dense_covariance(self.a, &self.state.chi_bar, self.noise_var);
        let (inv, logdet) = hpd_inverse_logdet(&cov)?;
        self.state.inv_cov = inv;
        self.state.logdet = logdet;
        let mut v = vec![C64::new(0.0, 0.0); self.obs.len()];
        self.apply_inverse(self.obs, &mut v);
        self.quad = dotc(self.obs, &v).re;
        self.inv_obs = v;
        Ok(())
    }

    fn apply_inverse(&self, x: &[C64], out: &mut [C64]) {
        let rows = x.len();
        out.fill(C64::new(0.0, 0.0));
        let data = self.state.inv_cov.as_slice();
        for (j, &xj) in x.iter().enumerate() {
            let col = &data[j * rows..(j + 1) * rows];
            for (o, m) in out.iter_mut().zip(col) {
                *o += m * xj;
            }
        }
    }

    /// `C^{-1} <- C^{-1} - f w w^H` with `w = C^{-1} a`, `r_w = r^H w`.
    fn rank_one(&mut self, w: &[C64], r_w: C64, f: f64) {
        let rows = w.len();
        let data = self.state.inv_cov.as_mut_slice();
        for (j, wj) in w.iter().enumerate() {
            let s = wj.conj() * f;
            let col = &mut data[j * rows..(j + 1) * rows];
            for (m, wi) in col.iter_mut().zip(w) {
                *m -= wi * s;
            }
        }
        // C^{-1} r loses f w (w^H r)
        let w_r = r_w.conj() * f;
        for (v, wi) in self.inv_obs.iter_mut().zip(w) {
            *v -= wi * w_r;
        }
        self.quad -= f * r_w.norm_sqr();
    }
}
