//! Precoders, the stacked multi-device measurement model and compressive
//! sensing diagnostics (coherence, RIP bound, recovery condition, PAPR).
//!
//! FTN precoders sample the Nyquist sinc pulse on the integer receive grid:
//! column `n` of device `k` is the pulse delayed to that column's slot time
//! `m xi`, with `xi = L / (total columns)`. A single device uses slot `m = n`;
//! `K` devices interleave so that with equal rates device `k` (0-based) owns
//! slots `n K + k`.

use std::ops::Range;

use crate::channel::{ChannelRealization, NoiseSpec};
use crate::error::{invalid, Result, ScimError};
use crate::imcodec::SparseBlock;
use crate::linalg::{dotc, unitary_dft, CMatrix, C64};

/// `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Exact time-squeezing factor `samples / slots`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSqueeze {
    pub samples: usize,
    pub slots: usize,
}

impl TimeSqueeze {
    pub fn value(&self) -> f64 {
        self.samples as f64 / self.slots as f64
    }
}

/// Number of FTN slots for a user-facing squeeze factor: `floor(L / xi)`.
pub fn slots_for_xi(l: usize, xi: f64) -> Result<usize> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid(format!("time-squeezing factor must be positive, got {xi}")));
    }
    // the epsilon keeps 64 / 0.8 from rounding down to 79
    let n = (l as f64 / xi + 1e-9).floor() as usize;
    if n == 0 {
        return Err(invalid(format!("xi = {xi} leaves no symbols for L = {l}")));
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderKind {
    Identity,
    DftHermitian,
    Ftn,
    FtnMultiAccess,
}

impl PrecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrecoderKind::Identity => "identity",
            PrecoderKind::DftHermitian => "dft",
            PrecoderKind::Ftn => "ftn",
            PrecoderKind::FtnMultiAccess => "ftn_ma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceSlot {
    /// 0-based device index.
    pub index: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    matrix: CMatrix,
    kind: PrecoderKind,
    xi: Option<TimeSqueeze>,
    device: Option<DeviceSlot>,
    // pulse delay of each column in receive-sample units (FTN kinds)
    offsets: Vec<f64>,
}

impl Precoder {
    pub fn identity(l: usize) -> Self {
        Self {
            matrix: CMatrix::identity(l, l),
            kind: PrecoderKind::Identity,
            xi: None,
            device: None,
            offsets: Vec::new(),
        }
    }

    /// `Psi = F^H`, which turns the block into OFDM-IM.
    pub fn dft_hermitian(l: usize) -> Self {
        Self {
            matrix: unitary_dft(l).adjoint(),
            kind: PrecoderKind::DftHermitian,
            xi: None,
            device: None,
            offsets: Vec::new(),
        }
    }

    /// Single-device FTN precoder, entry `(l, n) = sinc(l - n xi)` with `xi = L / N`.
    pub fn ftn(l: usize, n: usize) -> Result<Self> {
        if l == 0 || n == 0 {
            return Err(invalid(format!("FTN precoder needs L, N >= 1, got L = {l}, N = {n}")));
        }
        let xi = TimeSqueeze { samples: l, slots: n };
        let offsets: Vec<f64> = (0..n).map(|col| col as f64 * xi.value()).collect();
        Ok(Self {
            matrix: sinc_matrix(l, &offsets),
            kind: PrecoderKind::Ftn,
            xi: Some(xi),
            device: None,
            offsets,
        })
    }

    /// FTN precoder of one device in a `K`-device interleaved access scheme.
    ///
    /// `n_per_device[k]` is device `k`'s column count. With equal counts the
    /// entries are `sinc(l - (n K + k) xi)`, `xi = L / (N K)`; unequal counts
    /// spread each device's slots evenly over the common `sum N_k` slot grid.
    pub fn ftn_multi_access(l: usize, n_per_device: &[usize], device: usize) -> Result<Self> {
        let count = n_per_device.len();
        if device >= count {
            return Err(invalid(format!("device index {device} out of range for K = {count}")));
        }
        if l == 0 || n_per_device.iter().any(|&n| n == 0) {
            return Err(invalid("FTN precoder needs L >= 1 and every N_k >= 1"));
        }
        let slots: usize = n_per_device.iter().sum();
        let xi = TimeSqueeze { samples: l, slots };
        let assignment = interleave_slots(n_per_device);
        let offsets: Vec<f64> = assignment[device].iter().map(|&m| m as f64 * xi.value()).collect();
        Ok(Self {
            matrix: sinc_matrix(l, &offsets),
            kind: if count == 1 {
                PrecoderKind::Ftn
            } else {
                PrecoderKind::FtnMultiAccess
            },
            xi: Some(xi),
            device: Some(DeviceSlot { index: device, count }),
            offsets,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> PrecoderKind {
        self.kind
    }

    /// System time-squeezing factor (FTN kinds).
    pub fn xi(&self) -> Option<TimeSqueeze> {
        self.xi
    }

    /// Effective squeeze factor seen by this device alone: `L / N_k`.
    pub fn device_xi(&self) -> Option<f64> {
        self.xi.map(|_| self.rows() as f64 / self.cols() as f64)
    }

    pub fn device(&self) -> Option<DeviceSlot> {
        self.device
    }

    /// Pulse delay of each column, in receive samples (empty for non-FTN kinds).
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `d = Psi s`.
    pub fn apply(&self, s: &SparseBlock) -> Result<Vec<C64>> {
        if s.len() != self.cols() {
            return Err(ScimError::DimensionMismatch(format!(
                "block length {} vs precoder width {}",
                s.len(),
                self.cols()
            )));
        }
        let mut d = vec![C64::new(0.0, 0.0); self.rows()];
        for (&n, &v) in s.support().iter().zip(s.symbols()) {
            for (di, psi) in d.iter_mut().zip(self.matrix.column(n).iter()) {
                *di += psi * v;
            }
        }
        Ok(d)
    }

    /// Continuous-time FTN waveform `sum_n s_n g(t - offset_n)` at the given times.
    pub fn waveform(&self, s: &SparseBlock, times: &[f64]) -> Result<Vec<C64>> {
        if self.offsets.is_empty() {
            return Err(invalid(format!("{} precoder has no pulse waveform", self.kind.name())));
        }
        if s.len() != self.cols() {
            return Err(ScimError::DimensionMismatch(format!(
                "block length {} vs precoder width {}",
                s.len(),
                self.cols()
            )));
        }
        Ok(times
            .iter()
            .map(|&t| {
                s.support()
                    .iter()
                    .zip(s.symbols())
                    .map(|(&n, &v)| v * sinc(t - self.offsets[n]))
                    .sum()
            })
            .collect())
    }
}

fn sinc_matrix(l: usize, offsets: &[f64]) -> CMatrix {
    CMatrix::from_fn(l, offsets.len(), |row, col| C64::new(sinc(row as f64 - offsets[col]), 0.0))
}

/// Slot indices on the common grid for each device's columns.
///
/// Column `n` of device `k` has nominal time `(n + k/K) / N_k` (in units of
/// the block); columns are ordered by that time, ties by device index.
pub fn interleave_slots(n_per_device: &[usize]) -> Vec<Vec<usize>> {
    let k_count = n_per_device.len();
    let mut order: Vec<(usize, usize)> = n_per_device
        .iter()
        .enumerate()
        .flat_map(|(k, &nk)| (0..nk).map(move |n| (k, n)))
        .collect();
    order.sort_by(|&(k1, n1), &(k2, n2)| {
        let lhs = (n1 * k_count + k1) as u128 * n_per_device[k2] as u128;
        let rhs = (n2 * k_count + k2) as u128 * n_per_device[k1] as u128;
        lhs.cmp(&rhs).then(k1.cmp(&k2))
    });
    let mut slots: Vec<Vec<usize>> = n_per_device.iter().map(|&nk| vec![0; nk]).collect();
    for (slot, (k, n)) in order.into_iter().enumerate() {
        slots[k][n] = slot;
    }
    slots
}

/// The stacked observation model `r = A z + n` with `A = [H_1 Psi_1 ... H_K Psi_K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    matrix: CMatrix,
    layout: Vec<Range<usize>>,
    noise: NoiseSpec,
    symbol_energy: f64,
}

pub fn compose_measurement(
    channels: &[ChannelRealization],
    precoders: &[Precoder],
    noise: NoiseSpec,
    symbol_energy: f64,
) -> Result<MeasurementModel> {
    if channels.is_empty() || channels.len() != precoders.len() {
        return Err(ScimError::DimensionMismatch(format!(
            "{} channels for {} precoders",
            channels.len(),
            precoders.len()
        )));
    }
    if !(symbol_energy > 0.0) {
        return Err(invalid("symbol energy must be positive"));
    }
    let l = precoders[0].rows();
    if precoders.iter().any(|p| p.rows() != l) || channels.iter().any(|c| c.block_len() != l) {
        return Err(ScimError::DimensionMismatch("devices disagree on block length L".into()));
    }
    let total: usize = precoders.iter().map(Precoder::cols).sum();
    let mut matrix = CMatrix::zeros(l, total);
    let mut layout = Vec::with_capacity(precoders.len());
    let mut start = 0;
    for (ch, pre) in channels.iter().zip(precoders) {
        let block = ch.apply_to_matrix(pre.matrix())?;
        matrix.columns_mut(start, pre.cols()).copy_from(&block);
        layout.push(start..start + pre.cols());
        start += pre.cols();
    }
    Ok(MeasurementModel {
        matrix,
        layout,
        noise,
        symbol_energy,
    })
}

impl MeasurementModel {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &[Range<usize>] {
        &self.layout
    }

    pub fn devices(&self) -> usize {
        self.layout.len()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy
    }

    /// `gamma = sigma_s^2 / N0`.
    pub fn gamma(&self) -> f64 {
        self.symbol_energy / self.noise.n0()
    }

    /// Noiseless observation `A z` for one block per device.
    pub fn signal(&self, blocks: &[SparseBlock]) -> Result<Vec<C64>> {
        if blocks.len() != self.layout.len() {
            return Err(ScimError::DimensionMismatch(format!(
                "{} blocks for {} devices",
                blocks.len(),
                self.layout.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.rows()];
        for (block, range) in blocks.iter().zip(&self.layout) {
            if block.len() != range.len() {
                return Err(ScimError::DimensionMismatch(format!(
                    "block length {} vs device width {}",
                    block.len(),
                    range.len()
                )));
            }
            for (&n, &v) in block.support().iter().zip(block.symbols()) {
                for (o, a) in out.iter_mut().zip(self.matrix.column(range.start + n).iter()) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }
}

/// Mutual coherence: the largest normalized `|a_n^H a_m|` over distinct columns.
pub fn coherence(a: &CMatrix) -> Result<f64> {
    if a.ncols() < 2 {
        return Err(invalid("coherence needs at least two columns"));
    }
    let columns: Vec<Vec<C64>> = (0..a.ncols())
        .map(|j| {
            let col = a.column(j);
            let norm = col.norm();
            if norm == 0.0 {
                Err(ScimError::ZeroColumn(j))
            } else {
                Ok(col.iter().map(|z| z / norm).collect())
            }
        })
        .collect::<Result<_>>()?;
    let mut mu: f64 = 0.0;
    for n in 0..columns.len() {
        for m in n + 1..columns.len() {
            mu = mu.max(dotc(&columns[n], &columns[m]).norm());
        }
    }
    Ok(mu.min(1.0))
}

/// RIP constant bound `delta_k = (k - 1) mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipBound {
    pub delta: f64,
    /// `delta < 1`; otherwise the bound certifies nothing.
    pub guaranteed: bool,
}

pub fn rip_from_coherence(k: usize, mu: f64) -> Result<RipBound> {
    if k == 0 || !(0.0..=1.0).contains(&mu) {
        return Err(invalid(format!("need k >= 1 and mu in [0, 1], got k = {k}, mu = {mu}")));
    }
    let delta = (k - 1) as f64 * mu;
    Ok(RipBound {
        delta,
        guaranteed: delta < 1.0,
    })
}

/// Measurement-count condition `L >= C Q ln(N / Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryCheck {
    pub satisfied: bool,
    pub required: f64,
    pub margin: f64,
}

/// Constant commonly quoted for the measurement-count bound.
pub const DEFAULT_RECOVERY_CONSTANT: f64 = 0.28;

pub fn recovery_condition(l: usize, n: usize, q: usize, c: f64) -> Result<RecoveryCheck> {
    if q == 0 || n <= q || !(c > 0.0) {
        return Err(invalid(format!("need N > Q >= 1 and C > 0, got N = {n}, Q = {q}, C = {c}")));
    }
    let required = c * q as f64 * (n as f64 / q as f64).ln();
    let margin = l as f64 - required;
    Ok(RecoveryCheck {
        satisfied: margin >= 0.0,
        required,
        margin,
    })
}

/// Smallest squeeze factor allowed by the recovery condition at a fixed `tau = N / Q`.
pub fn min_xi_for_ratio(tau: f64, c: f64) -> f64 {
    c * tau.ln() / tau
}

/// Peak-to-average power ratio `max |d_l|^2 / mean |d_l|^2`.
pub fn papr(d: &[C64]) -> Result<f64> {
    let peak = d.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(ScimError::ZeroBlock);
    }
    let mean = d.iter().map(|z| z.norm_sqr()).sum::<f64>() / d.len() as f64;
    Ok(peak / mean)
}

/// `(xi, mu(Psi))` for single-device FTN precoders with `N = floor(L / xi)`.
pub fn coherence_sweep(l: usize, xis: &[f64]) -> Result<Vec<(f64, f64)>> {
    xis.iter()
        .map(|&xi| {
            let n = slots_for_xi(l, xi)?;
            Ok((xi, coherence(Precoder::ftn(l, n)?.matrix())?))
        })
        .collect()
}
