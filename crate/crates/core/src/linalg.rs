//! Small dense complex linear-algebra helpers shared by the detectors.
//!
//! Matrices are `nalgebra` column-major `DMatrix<C64>`; FFTs go through
//! `rustfft` with per-thread cached plans.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, ScimError};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance below which an orthogonalized column is treated as dependent.
pub const RANK_TOL: f64 = 1e-10;

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(len: usize) -> Plans {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry(len)
            .or_insert_with(|| (planner.plan_fft_forward(len), planner.plan_fft_inverse(len)))
            .clone()
    })
}

/// Unnormalized forward DFT in place: `X_m = sum_l x_l e^{-j 2 pi m l / L}`.
pub fn fft_in_place(buf: &mut [C64]) {
    if buf.len() > 1 {
        plans(buf.len()).0.process(buf);
    }
}

/// Unnormalized inverse DFT in place (no `1/L` factor).
pub fn ifft_in_place(buf: &mut [C64]) {
    if buf.len() > 1 {
        plans(buf.len()).1.process(buf);
    }
}

/// The unitary DFT matrix `[F]_{m,l} = e^{-j 2 pi m l / L} / sqrt(L)`.
pub fn unitary_dft(len: usize) -> CMatrix {
    let scale = 1.0 / (len as f64).sqrt();
    CMatrix::from_fn(len, len, |m, l| {
        let phase = -2.0 * std::f64::consts::PI * ((m * l) % len) as f64 / len as f64;
        C64::from_polar(scale, phase)
    })
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `sum conj(a_i) b_i`
#[inline]
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

/// Incrementally built thin QR factorization (modified Gram-Schmidt with one
/// re-orthogonalization pass). Used by OMP and by the least-squares helper.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    q: Vec<Vec<C64>>,
    // r[j] holds column j of the upper-triangular factor (length j + 1).
    r: Vec<Vec<C64>>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.q
    }

    /// Appends a column. Fails if it is numerically in the span of the
    /// columns already present. `label` is reported in the error.
    pub fn push(&mut self, column: &[C64], label: usize) -> Result<()> {
        assert_eq!(column.len(), self.rows);
        let mut v = column.to_vec();
        let mut coeffs = vec![C64::new(0.0, 0.0); self.q.len() + 1];
        for _pass in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let c = dotc(qj, &v);
                coeffs[j] += c;
                for (vi, qi) in v.iter_mut().zip(qj) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = norm_sqr(&v).sqrt();
        let reference = norm_sqr(column).sqrt();
        if reference == 0.0 || norm <= RANK_TOL * reference {
            return Err(ScimError::RankDeficient(label));
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        coeffs[self.q.len()] = C64::new(norm, 0.0);
        self.q.push(v);
        self.r.push(coeffs);
        Ok(())
    }

    /// Solves `min ||b - Q R x||` for the columns pushed so far.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let k = self.q.len();
        let mut rhs: Vec<C64> = self.q.iter().map(|qj| dotc(qj, b)).collect();
        let mut x = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..k {
                acc -= self.r[j][i] * x[j];
            }
            x[i] = acc / self.r[i][i];
            rhs[i] = acc;
        }
        x
    }
}

/// Least-squares amplitudes of `b` on the listed columns of `a`.
pub fn least_squares(a: &CMatrix, columns: &[usize], b: &[C64]) -> Result<Vec<C64>> {
    let mut qr = IncrementalQr::new(a.nrows());
    for &c in columns {
        qr.push(a.column(c).as_slice(), c)?;
    }
    Ok(qr.solve(b))
}

/// Hermitian positive-definite inverse and log-determinant via Cholesky.
pub fn hpd_inverse_logdet(m: &CMatrix) -> Result<(CMatrix, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(ScimError::NotPositiveDefinite)?;
    let logdet = 2.0 * (0..m.nrows()).map(|i| chol.l_dirty()[(i, i)].re.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return Err(ScimError::NotPositiveDefinite);
    }
    Ok((chol.inverse(), logdet))
}
