//! Single-tap MMSE equalization in the DFT domain.

use crate::error::{invalid, Result, ScimError};
use crate::linalg::{fft_in_place, ifft_in_place, C64};

/// `W_l = conj(H_l) / (|H_l|^2 + L / (Q gamma))`.
pub fn mmse_weights(freq: &[C64], gamma: f64, q: usize) -> Result<Vec<C64>> {
    if !(gamma > 0.0) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if q == 0 {
        return Err(invalid("Q must be at least 1"));
    }
    let reg = freq.len() as f64 / (q as f64 * gamma);
    Ok(freq.iter().map(|h| h.conj() / (h.norm_sqr() + reg)).collect())
}

/// `F^H W F r` for an arbitrary time-domain block `r`.
pub fn mmse_front_end(r: &[C64], freq: &[C64], gamma: f64, q: usize) -> Result<Vec<C64>> {
    if r.len() != freq.len() {
        return Err(ScimError::DimensionMismatch(format!(
            "block length {} vs {} frequency bins",
            r.len(),
            freq.len()
        )));
    }
    let w = mmse_weights(freq, gamma, q)?;
    let mut buf = r.to_vec();
    fft_in_place(&mut buf);
    for (x, wl) in buf.iter_mut().zip(&w) {
        *x *= wl;
    }
    ifft_in_place(&mut buf);
    let scale = 1.0 / r.len() as f64;
    for x in &mut buf {
        *x *= scale;
    }
    Ok(buf)
}

/// Equalized estimate of an unprecoded SCIM block.
pub fn mmse_fde(r: &[C64], freq: &[C64], gamma: f64, q: usize) -> Result<Vec<C64>> {
    mmse_front_end(r, freq, gamma, q)
}
