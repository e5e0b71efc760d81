//! Receivers for (multi-device) precoded SCIM blocks.
//!
//! * [`mmse`]: single-tap MMSE frequency-domain equalization;
//! * [`omp`]: orthogonal matching pursuit on `A = [H_k Psi_k]`;
//! * OMP-MMSE: MMSE front end followed by OMP against `Psi`;
//! * [`cavi`]: mean-field variational inference of the activity pattern;
//! * [`ml`]: exhaustive maximum-likelihood search, used as an oracle.

pub mod cavi;
pub mod ml;
pub mod mmse;
pub mod omp;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::channel::ChannelRealization;
use crate::error::{invalid, Result, ScimError};
use crate::imcodec::Constellation;
use crate::linalg::{least_squares, CMatrix, C64};
use crate::precoding::{MeasurementModel, Precoder, PrecoderKind};

pub use cavi::{cavi, cavi_activity, dense_covariance, logistic, CaviOptions, CaviOutput, CaviState, CaviStep};
pub use ml::{ml_exhaustive, ml_exhaustive_grouped, MlOutput, SupportGroup, ML_SEARCH_LIMIT};
pub use mmse::{mmse_fde, mmse_front_end, mmse_weights};
pub use omp::{omp, omp_mmse, OmpOutput, PickLimit};

/// Output of one detector on one received block.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Detected support of each device, in that device's local column indices.
    pub supports: Vec<Vec<usize>>,
    /// Hard symbol decisions aligned with `supports`.
    pub symbols: Vec<Vec<C64>>,
    /// Posterior activity probabilities over all stacked columns (CAVI only).
    pub activity_probs: Option<Vec<f64>>,
    pub elapsed: Duration,
}

/// Indices of the `q` largest values (ties to the lower index), or the
/// argmax of every length-`d` subblock when `subblock = Some(d)`.
/// The result is sorted.
pub fn select_support(values: &[f64], q: usize, subblock: Option<usize>) -> Result<Vec<usize>> {
    match subblock {
        Some(d) => {
            if d == 0 || values.len() % d != 0 {
                return Err(invalid(format!(
                    "length {} is not a multiple of subblock length {d}",
                    values.len()
                )));
            }
            Ok(values
                .chunks(d)
                .enumerate()
                .map(|(b, chunk)| b * d + argmax(chunk))
                .collect())
        }
        None => {
            if q > values.len() {
                return Err(invalid(format!("cannot pick {q} of {} entries", values.len())));
            }
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
            let mut picked = order[..q].to_vec();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Least-squares amplitudes on `support`, snapped to the nearest constellation points.
pub fn decide_symbols(
    r: &[C64],
    a: &CMatrix,
    support: &[usize],
    constellation: &Constellation,
) -> Result<Vec<C64>> {
    let amplitudes = least_squares(a, support, r)?;
    Ok(amplitudes.into_iter().map(|z| constellation.nearest(z)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Mmse,
    Omp,
    OmpMmse,
    Cavi,
    Ml,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Mmse,
        DetectorKind::Omp,
        DetectorKind::OmpMmse,
        DetectorKind::Cavi,
        DetectorKind::Ml,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Mmse => "mmse",
            DetectorKind::Omp => "omp",
            DetectorKind::OmpMmse => "omp_mmse",
            DetectorKind::Cavi => "cavi",
            DetectorKind::Ml => "ml",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = ScimError;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| invalid(format!("unknown detector {s:?}")))
    }
}

/// Everything a detector may look at for one received block.
#[derive(Debug, Clone, Copy)]
pub struct DetectionInput<'a> {
    pub received: &'a [C64],
    pub model: &'a MeasurementModel,
    pub channels: &'a [ChannelRealization],
    pub precoders: &'a [Precoder],
    pub q_per_device: usize,
    /// Structured IM subblock length, if the structure is enforced.
    pub subblock: Option<usize>,
    pub constellation: &'a Constellation,
}

impl DetectionInput<'_> {
    fn check(&self) -> Result<()> {
        if self.received.len() != self.model.rows() {
            return Err(ScimError::DimensionMismatch(format!(
                "received length {} vs {} model rows",
                self.received.len(),
                self.model.rows()
            )));
        }
        if self.channels.len() != self.model.devices() || self.precoders.len() != self.model.devices() {
            return Err(ScimError::DimensionMismatch("device count disagrees with model layout".into()));
        }
        Ok(())
    }

    /// OMP pick limit matching the block structure.
    fn pick_limit(&self) -> PickLimit {
        match self.subblock {
            Some(d) => PickLimit::PerGroup { group_len: d, capacity: 1 },
            None if self.model.devices() > 1 => PickLimit::PerDevice {
                layout: self.model.layout().to_vec(),
                capacity: self.q_per_device,
            },
            None => PickLimit::None,
        }
    }

    fn split(&self, global: &[usize], symbols: &[C64]) -> (Vec<Vec<usize>>, Vec<Vec<C64>>) {
        let layout = self.model.layout();
        let mut supports = vec![Vec::new(); layout.len()];
        let mut values = vec![Vec::new(); layout.len()];
        let mut pairs: Vec<(usize, C64)> = global.iter().copied().zip(symbols.iter().copied()).collect();
        pairs.sort_by_key(|p| p.0);
        for (idx, sym) in pairs {
            let dev = layout.iter().position(|r| r.contains(&idx)).expect("index inside layout");
            supports[dev].push(idx - layout[dev].start);
            values[dev].push(sym);
        }
        (supports, values)
    }

    fn require_single_device(&self, name: &str) -> Result<()> {
        if self.model.devices() != 1 {
            return Err(invalid(format!("{name} detector needs a single device")));
        }
        Ok(())
    }
}

/// A configured detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detector {
    pub kind: DetectorKind,
    /// CAVI sweeps.
    pub n_run: usize,
}

impl Detector {
    pub fn new(kind: DetectorKind) -> Self {
        Self { kind, n_run: 4 }
    }

    pub fn with_iterations(kind: DetectorKind, n_run: usize) -> Self {
        Self { kind, n_run }
    }

    /// Checks that the detector can run on the given system layout.
    pub fn supports(&self, devices: usize, precoder: PrecoderKind) -> Result<()> {
        match self.kind {
            DetectorKind::Mmse if devices != 1 || precoder != PrecoderKind::Identity => {
                Err(invalid("mmse detector needs one device with the identity precoder"))
            }
            DetectorKind::OmpMmse if devices != 1 => {
                Err(invalid("omp_mmse detector is not applicable to superposed devices"))
            }
            DetectorKind::Cavi if self.n_run == 0 => Err(invalid("CAVI needs n_run >= 1")),
            _ => Ok(()),
        }
    }

    /// Runs the detector; `elapsed` covers this call only.
    pub fn detect(&self, input: &DetectionInput<'_>) -> Result<DetectionResult> {
        input.check()?;
        let start = Instant::now();
        let a = input.model.matrix();
        let q_total = input.q_per_device * input.model.devices();
        let (global, symbols, probs) = match self.kind {
            DetectorKind::Mmse => {
                input.require_single_device("mmse")?;
                if input.precoders[0].kind() != PrecoderKind::Identity {
                    return Err(invalid("mmse detector needs the identity precoder"));
                }
                let s_hat = mmse_fde(
                    input.received,
                    input.channels[0].freq_response(),
                    input.model.gamma(),
                    input.q_per_device,
                )?;
                let mags: Vec<f64> = s_hat.iter().map(|z| z.norm()).collect();
                let support = select_support(&mags, input.q_per_device, input.subblock)?;
                let symbols = decide_symbols(input.received, a, &support, input.constellation)?;
                (support, symbols, None)
            }
            DetectorKind::Omp => {
                let out = omp(input.received, a, q_total, &input.pick_limit())?;
                let symbols = out.amplitudes.iter().map(|&z| input.constellation.nearest(z)).collect();
                (out.support, symbols, None)
            }
            DetectorKind::OmpMmse => {
                input.require_single_device("omp_mmse")?;
                let out = omp_mmse(
                    input.received,
                    &input.channels[0],
                    &input.precoders[0],
                    input.model.gamma(),
                    input.q_per_device,
                    &input.pick_limit(),
                )?;
                let symbols = decide_symbols(input.received, a, &out.support, input.constellation)?;
                (out.support, symbols, None)
            }
            DetectorKind::Cavi => {
                let out = cavi(
                    input.received,
                    input.model,
                    input.q_per_device,
                    &CaviOptions {
                        n_run: self.n_run,
                        subblock: input.subblock,
                    },
                )?;
                let support: Vec<usize> = out.supports.iter().flatten().copied().collect();
                let symbols = decide_symbols(input.received, a, &support, input.constellation)?;
                (support, symbols, Some(out.state.chi_bar))
            }
            DetectorKind::Ml => {
                let out = match input.subblock {
                    None if input.model.devices() > 1 => {
                        let groups: Vec<SupportGroup> = input
                            .model
                            .layout()
                            .iter()
                            .map(|range| SupportGroup {
                                columns: range.clone(),
                                picks: input.q_per_device,
                            })
                            .collect();
                        ml_exhaustive_grouped(input.received, a, &groups, input.constellation)?
                    }
                    _ => ml_exhaustive(input.received, a, q_total, input.constellation, input.subblock)?,
                };
                (out.support, out.symbols, None)
            }
        };
        let elapsed = start.elapsed();
        let (supports, symbols) = input.split(&global, &symbols);
        Ok(DetectionResult {
            supports,
            symbols,
            activity_probs: probs,
            elapsed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cscg, NoiseSpec};
    use crate::precoding::compose_measurement;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn top_q_selection() {
        assert_eq!(select_support(&[0.0, 3.0, 1.0, 2.0], 2, None).unwrap(), vec![1, 3]);
        assert_eq!(select_support(&[0.0, 3.0, 1.0, 2.0], 2, Some(2)).unwrap(), vec![1, 3]);
        assert_eq!(select_support(&[1.0; 5], 2, None).unwrap(), vec![0, 1]);
        assert_eq!(select_support(&[1.0; 4], 2, Some(2)).unwrap(), vec![0, 2]);
        assert!(select_support(&[1.0; 5], 2, Some(2)).is_err());
    }

    #[test]
    fn snapping_to_constellation() {
        let c = Constellation::new(4, 2.0).unwrap();
        let a = CMatrix::identity(4, 4);
        let r = [C64::new(0.9, 0.8), C64::new(0.0, 0.0), C64::new(-1.2, -0.4), C64::new(0.0, 0.0)];
        assert_eq!(
            decide_symbols(&r, &a, &[0, 2], &c).unwrap(),
            vec![C64::new(1.0, 1.0), C64::new(-1.0, -1.0)]
        );
    }

    #[test]
    fn decisions_match_pseudo_inverse() {
        // independent route: x = (B^H B)^{-1} B^H r with an explicit inverse
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = CMatrix::from_fn(8, 10, |_, _| cscg(&mut rng, 1.0));
        let r: Vec<C64> = (0..8).map(|_| cscg(&mut rng, 2.0)).collect();
        let support = [1usize, 4, 7];
        let b = CMatrix::from_fn(8, 3, |i, j| a[(i, support[j])]);
        let pinv = (b.adjoint() * &b).try_inverse().unwrap() * b.adjoint();
        let x = pinv * crate::linalg::CVector::from_column_slice(&r);
        let c = Constellation::new(4, 2.0).unwrap();
        let expected: Vec<C64> = x.iter().map(|&z| c.nearest(z)).collect();
        assert_eq!(decide_symbols(&r, &a, &support, &c).unwrap(), expected);
        let ls = least_squares(&a, &support, &r).unwrap();
        for (u, v) in ls.iter().zip(x.iter()) {
            assert!((u - v).norm() < 1e-10);
        }
    }

    #[test]
    fn detector_names_round_trip() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
        }
        assert_eq!("OMP-MMSE".parse::<DetectorKind>().unwrap(), DetectorKind::OmpMmse);
        assert!("lasso".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn applicability_rules() {
        let mmse = Detector::new(DetectorKind::Mmse);
        assert!(mmse.supports(1, PrecoderKind::Identity).is_ok());
        assert!(mmse.supports(1, PrecoderKind::Ftn).is_err());
        assert!(Detector::new(DetectorKind::OmpMmse).supports(2, PrecoderKind::FtnMultiAccess).is_err());
        assert!(Detector::with_iterations(DetectorKind::Cavi, 0).supports(1, PrecoderKind::Ftn).is_err());
    }

    #[test]
    fn all_detectors_exact_on_noiseless_identity_system() {
        let l = 8;
        let model = compose_measurement(
            &[ChannelRealization::identity(l)],
            &[Precoder::identity(l)],
            NoiseSpec::new(1e-9).unwrap(),
            2.0,
        )
        .unwrap();
        let c = Constellation::new(4, 2.0).unwrap();
        let truth = [1usize, 6];
        let syms = [C64::new(1.0, -1.0), C64::new(-1.0, -1.0)];
        let mut r = vec![C64::new(0.0, 0.0); l];
        r[truth[0]] = syms[0];
        r[truth[1]] = syms[1];
        let channels = [ChannelRealization::identity(l)];
        let precoders = [Precoder::identity(l)];
        let input = DetectionInput {
            received: &r,
            model: &model,
            channels: &channels,
            precoders: &precoders,
            q_per_device: 2,
            subblock: Some(4),
            constellation: &c,
        };
        for kind in DetectorKind::ALL {
            let res = Detector::new(kind).detect(&input).unwrap();
            assert_eq!(res.supports, vec![truth.to_vec()], "{kind}");
            assert_eq!(res.symbols, vec![syms.to_vec()], "{kind}");
        }
    }
}
