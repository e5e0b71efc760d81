//! Block-fading multipath channel with a cyclic prefix.
//!
//! After CP removal the channel acts on a block as the circulant matrix whose
//! first column is the zero-padded tap vector, so it is diagonalized by the
//! DFT: `F H F^H = diag(H_0, ..., H_{L-1})` with `H_l = sum_p h_p e^{-j2 pi p l / L}`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result, ScimError};
use crate::linalg::{fft_in_place, ifft_in_place, CMatrix, C64};

/// Below this tap count the direct circular convolution is cheaper than FFTs.
const DIRECT_TAP_LIMIT: usize = 16;

/// Draws a circularly symmetric complex Gaussian sample with the given total variance.
pub fn cscg<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<C64>,
    block_len: usize,
    freq: Vec<C64>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<C64>, block_len: usize) -> Result<Self> {
        if taps.is_empty() || taps.len() > block_len {
            return Err(invalid(format!(
                "need 1 <= P <= L, got P = {}, L = {block_len}",
                taps.len()
            )));
        }
        let mut freq = vec![C64::new(0.0, 0.0); block_len];
        freq[..taps.len()].copy_from_slice(&taps);
        fft_in_place(&mut freq);
        Ok(Self {
            taps,
            block_len,
            freq,
        })
    }

    /// The single-tap unit channel.
    pub fn identity(block_len: usize) -> Self {
        Self::from_taps(vec![C64::new(1.0, 0.0)], block_len).expect("L >= 1")
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// `H_l` for `l = 0..L`.
    pub fn freq_response(&self) -> &[C64] {
        &self.freq
    }

    /// Explicit `L x L` circulant matrix, `[H]_{i,j} = h_{(i-j) mod L}`.
    pub fn circulant_matrix(&self) -> CMatrix {
        let l = self.block_len;
        CMatrix::from_fn(l, l, |i, j| {
            let p = (i + l - j) % l;
            self.taps.get(p).copied().unwrap_or_default()
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.block_len {
            return Err(ScimError::DimensionMismatch(format!(
                "input length {len} vs block length {}",
                self.block_len
            )));
        }
        Ok(())
    }

    pub fn circulant_apply_direct(&self, d: &[C64]) -> Result<Vec<C64>> {
        self.check_len(d.len())?;
        let l = self.block_len;
        let mut out = vec![C64::new(0.0, 0.0); l];
        for (p, &h) in self.taps.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += h * d[(i + l - p) % l];
            }
        }
        Ok(out)
    }

    pub fn circulant_apply_fft(&self, d: &[C64]) -> Result<Vec<C64>> {
        self.check_len(d.len())?;
        let mut buf = d.to_vec();
        fft_in_place(&mut buf);
        let scale = 1.0 / self.block_len as f64;
        for (b, h) in buf.iter_mut().zip(&self.freq) {
            *b *= h * scale;
        }
        ifft_in_place(&mut buf);
        Ok(buf)
    }

    /// `H d`, picking the cheaper of the two equivalent evaluation paths.
    pub fn circulant_apply(&self, d: &[C64]) -> Result<Vec<C64>> {
        if self.taps.len() <= DIRECT_TAP_LIMIT {
            self.circulant_apply_direct(d)
        } else {
            self.circulant_apply_fft(d)
        }
    }

    /// `H M` column by column.
    pub fn apply_to_matrix(&self, m: &CMatrix) -> Result<CMatrix> {
        self.check_len(m.nrows())?;
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = self.circulant_apply(m.column(j).as_slice())?;
            out.column_mut(j).copy_from_slice(&col);
        }
        Ok(out)
    }
}

/// `P` i.i.d. taps `h_p ~ CN(0, 1/P)`.
pub fn draw_channel<R: Rng + ?Sized>(p: usize, l: usize, rng: &mut R) -> Result<ChannelRealization> {
    if p == 0 || p > l {
        return Err(invalid(format!("need 1 <= P <= L, got P = {p}, L = {l}")));
    }
    let taps = (0..p).map(|_| cscg(rng, 1.0 / p as f64)).collect();
    ChannelRealization::from_taps(taps, l)
}

/// Complex AWGN with total variance `N0` per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    n0: f64,
}

impl NoiseSpec {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(invalid(format!("N0 must be positive and finite, got {n0}")));
        }
        Ok(Self { n0 })
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn draw<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<C64> {
        (0..len).map(|_| cscg(rng, self.n0)).collect()
    }
}

/// `r = H d + n`. Passing `None` for the noise gives the noiseless observation.
pub fn transmit<R: Rng + ?Sized>(
    d: &[C64],
    ch: &ChannelRealization,
    noise: Option<&NoiseSpec>,
    rng: &mut R,
) -> Result<Vec<C64>> {
    let mut r = ch.circulant_apply(d)?;
    if let Some(noise) = noise {
        for (ri, ni) in r.iter_mut().zip(noise.draw(d.len(), rng)) {
            *ri += ni;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{unitary_dft, CVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
        (0..len).map(|_| cscg(rng, 1.0)).collect()
    }

    fn rel_err(a: &[C64], b: &[C64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn identity_channel_passes_block() {
        let ch = ChannelRealization::identity(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_vec(&mut rng, 8);
        assert_eq!(ch.circulant_apply(&d).unwrap(), d);
        assert!(ch.freq_response().iter().all(|h| (h - C64::new(1.0, 0.0)).norm() < 1e-15));
        let r = transmit(&d, &ch, None, &mut rng).unwrap();
        assert_eq!(r, d);
    }

    #[test]
    fn delayed_tap_is_cyclic_shift() {
        let ch = ChannelRealization::from_taps(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)], 6).unwrap();
        let d: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 0.0)).collect();
        let out = ch.circulant_apply(&d).unwrap();
        let expected: Vec<C64> = (0..6).map(|i| d[(i + 5) % 6]).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn matches_explicit_circulant_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = draw_channel(3, 8, &mut rng).unwrap();
        let d = random_vec(&mut rng, 8);
        // layout from the block model: first row h0, h_{L-1}, ..., h1
        let h = |p: usize| ch.taps().get(p % 8).copied().unwrap_or_default();
        let mut explicit = vec![C64::new(0.0, 0.0); 8];
        for (row, e) in explicit.iter_mut().enumerate() {
            for (col, dc) in d.iter().enumerate() {
                *e += h((row + 8 - col) % 8) * dc;
            }
        }
        assert!(rel_err(&ch.circulant_apply_direct(&d).unwrap(), &explicit) < 1e-12);
        assert!(rel_err(&ch.circulant_apply_fft(&d).unwrap(), &explicit) < 1e-12);
        let m = &ch.circulant_matrix() * CVector::from_vec(d.clone());
        assert!(rel_err(m.as_slice(), &explicit) < 1e-12);
    }

    #[test]
    fn dft_diagonalizes_circulant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for l in [4usize, 8, 13, 16] {
            let ch = draw_channel(l.min(4), l, &mut rng).unwrap();
            let f = unitary_dft(l);
            let diag = &f * ch.circulant_matrix() * f.adjoint();
            for i in 0..l {
                for j in 0..l {
                    if i == j {
                        assert!((diag[(i, i)] - ch.freq_response()[i]).norm() < 1e-10);
                    } else {
                        assert!(diag[(i, j)].norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = draw_channel(5, 32, &mut rng).unwrap();
        let freq: f64 = ch.freq_response().iter().map(|h| h.norm_sqr()).sum::<f64>() / 32.0;
        let taps: f64 = ch.taps().iter().map(|h| h.norm_sqr()).sum();
        assert!((freq - taps).abs() < 1e-12);
    }

    #[test]
    fn tap_energy_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [1usize, 4] {
            let trials = 100_000;
            let total: f64 = (0..trials)
                .map(|_| draw_channel(p, 16, &mut rng).unwrap().taps().iter().map(|h| h.norm_sqr()).sum::<f64>())
                .sum();
            let mean = total / trials as f64;
            assert!((mean - 1.0).abs() < 0.02, "P={p}: {mean}");
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let a = draw_channel(4, 16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_channel(4, 16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(draw_channel(9, 8, &mut rng).is_err());
        assert!(draw_channel(0, 8, &mut rng).is_err());
        let ch = draw_channel(2, 8, &mut rng).unwrap();
        assert!(ch.circulant_apply(&[C64::new(1.0, 0.0); 7]).is_err());
        assert!(NoiseSpec::new(0.0).is_err());
    }

    #[test]
    fn noise_calibration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n0 = 0.37;
        let noise = NoiseSpec::new(n0).unwrap();
        let ch = draw_channel(4, 100, &mut rng).unwrap();
        let mut samples = Vec::with_capacity(100_000);
        for _ in 0..1000 {
            samples.extend(transmit(&[C64::new(0.0, 0.0); 100], &ch, Some(&noise), &mut rng).unwrap());
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<C64>() / n;
        let powers: Vec<f64> = samples.iter().map(|z| z.norm_sqr()).collect();
        let var = powers.iter().sum::<f64>() / n;
        // |n|^2 is exponential with mean N0, so its standard deviation is N0
        let se_var = n0 / n.sqrt();
        assert!((var - n0).abs() < 3.0 * se_var, "{var}");
        assert!((var - n0).abs() / n0 < 0.02);
        // each component of the mean has standard error sqrt(N0 / 2n)
        let se_mean = (n0 / 2.0 / n).sqrt();
        assert!(mean.re.abs() < 3.0 * se_mean && mean.im.abs() < 3.0 * se_mean);
        let re_var = samples.iter().map(|z| z.re * z.re).sum::<f64>() / n;
        assert!((re_var - n0 / 2.0).abs() < 0.02 * n0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn fft_and_direct_paths_agree(l in 4usize..=128, p_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = 1 + ((l - 1) as f64 * p_frac) as usize;
            let ch = draw_channel(p, l, &mut rng).unwrap();
            let d = random_vec(&mut rng, l);
            let direct = ch.circulant_apply_direct(&d).unwrap();
            let fft = ch.circulant_apply_fft(&d).unwrap();
            prop_assert!(rel_err(&fft, &direct) < 1e-10);
        }
    }
}
