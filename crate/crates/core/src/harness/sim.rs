//! Monte Carlo trials, sweep orchestration and aggregation.
//!
//! Trial `t` of every point draws from `ChaCha8(seed)` on stream `t`, so
//! results do not depend on scheduling and sweep points share channel,
//! payload and (unit-variance) noise draws.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{cscg, draw_channel, ChannelRealization, NoiseSpec};
use crate::detectors::{DetectionInput, DetectionResult, DetectorKind};
use crate::error::{invalid, Result, ScimError};
use crate::imcodec::{encode, BitPayload, ImConfig, ImMode, SparseBlock};
use crate::linalg::C64;
use crate::precoding::compose_measurement;

use super::config::{ChannelModel, IerRule, ResolvedSystem, SimConfig};
use super::metrics::{snr_to_noise, PowerMoments, RateEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Snr,
    Q,
    K,
    L,
    P,
    Xi,
    NRun,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::Snr,
        SweepAxis::Q,
        SweepAxis::K,
        SweepAxis::L,
        SweepAxis::P,
        SweepAxis::Xi,
        SweepAxis::NRun,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Q => "Q",
            SweepAxis::K => "K",
            SweepAxis::L => "L",
            SweepAxis::P => "P",
            SweepAxis::Xi => "xi",
            SweepAxis::NRun => "n_run",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = ScimError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s || a.name().eq_ignore_ascii_case(s))
            .or_else(|| s.eq_ignore_ascii_case("snr_db").then_some(SweepAxis::Snr))
            .ok_or_else(|| invalid(format!("unknown sweep axis {s:?}")))
    }
}

/// Aggregated result of one detector at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub detector: DetectorKind,
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub snr_db: f64,
    pub n0: f64,
    pub ier: RateEstimate,
    /// Bit errors over payload bits.
    pub ber: RateEstimate,
    pub mean_detect_seconds: f64,
    pub blocks_run: u64,
    /// Trials where the detector returned a numerical error (scored as wrong).
    pub failures: u64,
    /// Per-sample power of the added noise.
    pub noise: PowerMoments,
}

impl RunRow {
    pub fn ier_ci95(&self) -> f64 {
        self.ier.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub axis_value: f64,
    pub snr_db: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<RunRow>,
    pub failures: Vec<PointFailure>,
}

impl RunSummary {
    pub fn row(&self, detector: DetectorKind, axis_value: f64, snr_db: f64) -> Option<&RunRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.axis_value == axis_value && r.snr_db == snr_db)
    }
}

#[derive(Debug, Clone)]
struct Outcome {
    device_errors: Vec<bool>,
    bit_errors: u64,
    seconds: f64,
    failed: bool,
}

#[derive(Debug, Clone)]
struct TrialRecord {
    outcomes: Vec<Outcome>,
    noise: PowerMoments,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    errors: u64,
    trials: u64,
    bit_errors: u64,
    bits: u64,
    seconds: f64,
    failures: u64,
}

/// One detector row per configured detector at `snr_db`.
pub fn run_point(cfg: &SimConfig, snr_db: f64) -> Result<Vec<RunRow>> {
    run_point_on_axis(cfg, snr_db, SweepAxis::Snr, snr_db)
}

fn run_point_on_axis(cfg: &SimConfig, snr_db: f64, axis: SweepAxis, axis_value: f64) -> Result<Vec<RunRow>> {
    let sys = cfg.resolve()?;
    let n0 = snr_to_noise(&sys.im, snr_db)?;
    let noise = NoiseSpec::new(n0)?;
    let work = || simulate(cfg, &sys, noise);
    let (tallies, noise_stats, blocks) = if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?
            .install(work)?
    } else {
        work()?
    };
    Ok(sys
        .detectors
        .iter()
        .zip(tallies)
        .map(|(det, t)| RunRow {
            detector: det.kind,
            axis,
            axis_value,
            snr_db,
            n0,
            ier: RateEstimate::new(t.errors, t.trials),
            ber: RateEstimate::new(t.bit_errors, t.bits),
            mean_detect_seconds: if blocks == 0 { 0.0 } else { t.seconds / blocks as f64 },
            blocks_run: blocks,
            failures: t.failures,
            noise: noise_stats,
        })
        .collect())
}

fn simulate(cfg: &SimConfig, sys: &ResolvedSystem, noise: NoiseSpec) -> Result<(Vec<Tally>, PowerMoments, u64)> {
    let base = cfg.n_blocks as u64;
    let cap = base.saturating_mul(cfg.max_blocks_factor as u64);
    let mut tallies = vec![Tally::default(); sys.detectors.len()];
    let mut noise_stats = PowerMoments::default();
    let mut done = 0u64;
    while done < cap {
        if done >= base && tallies.iter().map(|t| t.errors).min().unwrap_or(0) >= cfg.target_errors {
            break;
        }
        let size = if done < base { base - done } else { cfg.batch_size as u64 };
        let end = (done + size).min(cap);
        for chunk_start in (done..end).step_by(cfg.batch_size.max(1)) {
            let chunk_end = (chunk_start + cfg.batch_size as u64).min(end);
            let records: Vec<Result<TrialRecord>> = (chunk_start..chunk_end)
                .into_par_iter()
                .map(|t| run_trial(cfg, sys, noise, t))
                .collect();
            for rec in records {
                let rec = rec?;
                noise_stats.merge(&rec.noise);
                for (tally, out) in tallies.iter_mut().zip(&rec.outcomes) {
                    match cfg.ier_rule {
                        IerRule::PerDevice => {
                            tally.errors += out.device_errors.iter().filter(|&&e| e).count() as u64;
                            tally.trials += out.device_errors.len() as u64;
                        }
                        IerRule::Union => {
                            tally.errors += u64::from(out.device_errors.iter().any(|&e| e));
                            tally.trials += 1;
                        }
                    }
                    tally.bit_errors += out.bit_errors;
                    tally.bits += (sys.im.n_bits_total() * sys.devices()) as u64;
                    tally.seconds += out.seconds;
                    tally.failures += u64::from(out.failed);
                }
            }
        }
        done = end;
    }
    Ok((tallies, noise_stats, done))
}

/// Generator for trial `trial` under master seed `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn random_block<R: Rng>(im: &ImConfig, rng: &mut R) -> Result<SparseBlock> {
    let bits = BitPayload((0..im.n_bits_total()).map(|_| rng.random::<bool>()).collect());
    encode(&bits, im)
}

fn run_trial(cfg: &SimConfig, sys: &ResolvedSystem, noise: NoiseSpec, trial: u64) -> Result<TrialRecord> {
    let mut rng = trial_rng(cfg.seed, trial);
    let l = cfg.l;
    let mut channels = Vec::with_capacity(sys.devices());
    let mut blocks = Vec::with_capacity(sys.devices());
    for _ in 0..sys.devices() {
        channels.push(match cfg.channel {
            ChannelModel::Rayleigh => draw_channel(cfg.p, l, &mut rng)?,
            ChannelModel::Identity => ChannelRealization::identity(l),
        });
        blocks.push(random_block(&sys.im, &mut rng)?);
    }
    let model = compose_measurement(&channels, &sys.precoders, noise, sys.im.symbol_energy())?;
    let mut received = model.signal(&blocks)?;
    let mut noise_stats = PowerMoments::default();
    if cfg.noise {
        for r in received.iter_mut() {
            let n: C64 = cscg(&mut rng, noise.n0());
            noise_stats.push(n.norm_sqr());
            *r += n;
        }
    }
    let input = DetectionInput {
        received: &received,
        model: &model,
        channels: &channels,
        precoders: &sys.precoders,
        q_per_device: sys.im.q(),
        subblock: sys.subblock,
        constellation: sys.im.constellation(),
    };
    let mut outcomes = Vec::with_capacity(sys.detectors.len());
    for det in &sys.detectors {
        outcomes.push(match det.detect(&input) {
            Ok(res) => score(&res, &blocks, &sys.im, cfg.timing),
            Err(ScimError::RankDeficient(_) | ScimError::NotPositiveDefinite | ScimError::ZeroColumn(_)) => {
                Outcome {
                    device_errors: vec![true; blocks.len()],
                    bit_errors: (sys.im.n_bits_total() * blocks.len()) as u64,
                    seconds: 0.0,
                    failed: true,
                }
            }
            Err(e) => return Err(e),
        });
    }
    Ok(TrialRecord {
        outcomes,
        noise: noise_stats,
    })
}

fn score(res: &DetectionResult, truth: &[SparseBlock], im: &ImConfig, timing: bool) -> Outcome {
    let mut device_errors = Vec::with_capacity(truth.len());
    let mut bit_errors = 0u64;
    for ((block, support), symbols) in truth.iter().zip(&res.supports).zip(&res.symbols) {
        device_errors.push(block.support() != support.as_slice());
        bit_errors += block_bit_errors(block, support, symbols, im);
    }
    Outcome {
        device_errors,
        bit_errors,
        seconds: if timing { res.elapsed.as_secs_f64() } else { 0.0 },
        failed: false,
    }
}

/// Payload bit errors of one device block. Symbol bits are compared only
/// where the index is right; a wrong index costs all bits it governs
/// (its subblock in structured mode, the whole block otherwise).
pub fn block_bit_errors(truth: &SparseBlock, support: &[usize], symbols: &[C64], im: &ImConfig) -> u64 {
    let constellation = im.constellation();
    let sym_bits = constellation.bits_per_symbol();
    let label_errors = |a: C64, b: C64| {
        (constellation.nearest_label(a) ^ constellation.nearest_label(b)).count_ones() as u64
    };
    if truth.support() == support {
        return truth
            .symbols()
            .iter()
            .zip(symbols)
            .map(|(&a, &b)| label_errors(a, b))
            .sum();
    }
    match im.mode() {
        ImMode::Combinatorial => im.n_bits_total() as u64,
        ImMode::Structured => {
            let d = im.d();
            let index_bits = d.ilog2() as u64;
            truth
                .support()
                .iter()
                .zip(truth.symbols())
                .map(|(&t, &sym)| {
                    let sub = t / d;
                    let mut hits = support.iter().zip(symbols).filter(|(&j, _)| j / d == sub);
                    match (hits.next(), hits.next()) {
                        (Some((&j, &est)), None) if j == t => label_errors(sym, est),
                        _ => index_bits + sym_bits as u64,
                    }
                })
                .sum()
        }
    }
}

/// Returns a copy of `cfg` with `axis` set to `value`.
pub fn apply_axis(cfg: &SimConfig, axis: SweepAxis, value: f64) -> Result<SimConfig> {
    let count = || -> Result<usize> {
        if value.fract() != 0.0 || value < 1.0 {
            return Err(invalid(format!("{} axis needs positive integers, got {value}", axis.name())));
        }
        Ok(value as usize)
    };
    let mut out = cfg.clone();
    match axis {
        SweepAxis::Snr => out.snr_db = vec![value],
        SweepAxis::Q => out.q = count()?,
        SweepAxis::K => out.k = count()?,
        SweepAxis::L => out.l = count()?,
        SweepAxis::P => out.p = count()?,
        SweepAxis::NRun => out.n_run = count()?,
        SweepAxis::Xi => {
            out.xi = Some(value);
            out.n = None;
            out.d = None;
        }
    }
    Ok(out)
}

/// Runs every axis value (at every configured SNR for non-SNR axes).
/// Failing points are recorded and skipped.
pub fn run_sweep(cfg: &SimConfig, axis: SweepAxis, values: &[f64]) -> RunSummary {
    let mut summary = RunSummary::default();
    for &value in values {
        let point = match apply_axis(cfg, axis, value) {
            Ok(c) => c,
            Err(e) => {
                summary.failures.push(PointFailure {
                    axis_value: value,
                    snr_db: f64::NAN,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for &snr in &point.snr_db {
            match run_point_on_axis(&point, snr, axis, value) {
                Ok(rows) => summary.rows.extend(rows),
                Err(e) => summary.failures.push(PointFailure {
                    axis_value: value,
                    snr_db: snr,
                    message: e.to_string(),
                }),
            }
        }
    }
    summary
}
