//! CSV emission.

use std::io::{self, Write};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::imcodec::{encode, BitPayload};
use crate::linalg::C64;

use super::config::SimConfig;
use super::sim::{trial_rng, RunRow};

pub const SUMMARY_HEADER: &str = "detector,axis,axis_value,snr_db,ier,ier_ci95,mean_detect_seconds,blocks_run";
pub const COHERENCE_HEADER: &str = "xi,coherence";
pub const WAVEFORM_HEADER: &str = "t,device,amplitude_real,amplitude_imag";

/// Decimal text with at least `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64 + 1;
    let decimals = (digits as i64 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn num(x: f64) -> String {
    fmt_sig(x, 6)
}

pub fn write_summary<W: Write>(out: &mut W, rows: &[RunRow]) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.detector.name(),
            r.axis.name(),
            num(r.axis_value),
            num(r.snr_db),
            num(r.ier.rate),
            num(r.ier_ci95()),
            num(r.mean_detect_seconds),
            r.blocks_run
        )?;
    }
    Ok(())
}

pub fn summary_csv(rows: &[RunRow]) -> String {
    let mut buf = Vec::new();
    write_summary(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ASCII output")
}

pub fn coherence_csv(points: &[(f64, f64)]) -> String {
    let mut s = format!("{COHERENCE_HEADER}\n");
    for (xi, mu) in points {
        s.push_str(&format!("{},{}\n", num(*xi), num(*mu)));
    }
    s
}

/// One waveform sample of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSample {
    pub t: f64,
    pub device: usize,
    pub amplitude: C64,
}

/// Continuous-time FTN waveforms of every device for one random payload
/// (drawn from trial 0 of `cfg.seed`), sampled `oversample` times per
/// Nyquist interval over `[0, L)`.
pub fn waveform_samples(cfg: &SimConfig, oversample: usize) -> Result<Vec<WaveformSample>> {
    if oversample == 0 {
        return Err(invalid("oversample must be at least 1"));
    }
    let sys = cfg.resolve()?;
    let mut rng = trial_rng(cfg.seed, 0);
    let times: Vec<f64> = (0..cfg.l * oversample).map(|i| i as f64 / oversample as f64).collect();
    let mut out = Vec::with_capacity(times.len() * sys.devices());
    for (device, precoder) in sys.precoders.iter().enumerate() {
        let bits = BitPayload((0..sys.im.n_bits_total()).map(|_| rng.random::<bool>()).collect());
        let block = encode(&bits, &sys.im)?;
        let wave = precoder.waveform(&block, &times)?;
        out.extend(times.iter().zip(wave).map(|(&t, amplitude)| WaveformSample { t, device, amplitude }));
    }
    Ok(out)
}

pub fn waveform_csv(samples: &[WaveformSample]) -> String {
    let mut s = format!("{WAVEFORM_HEADER}\n");
    for w in samples {
        s.push_str(&format!(
            "{},{},{},{}\n",
            num(w.t),
            w.device,
            num(w.amplitude.re),
            num(w.amplitude.im)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorKind;
    use crate::harness::metrics::{PowerMoments, RateEstimate};
    use crate::harness::sim::SweepAxis;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.5, 6), "0.500000");
        assert_eq!(fmt_sig(16.0, 6), "16.0000");
        assert_eq!(fmt_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(fmt_sig(-2.5e-3, 6), "-0.00250000");
        assert_eq!(fmt_sig(0.0, 6), "0.00000");
        assert_eq!(fmt_sig(1234567.0, 6), "1234567");
        for x in [0.3, 1.0 / 3.0, 7.77e-9, 12345.678] {
            let s = fmt_sig(x, 6);
            let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
            assert!(digits.trim_start_matches('0').len() >= 6, "{s}");
            assert!(!s.contains('e'));
        }
    }

    #[test]
    fn summary_layout() {
        let row = RunRow {
            detector: DetectorKind::Cavi,
            axis: SweepAxis::Snr,
            axis_value: 16.0,
            snr_db: 16.0,
            n0: 0.01,
            ier: RateEstimate::new(12, 1000),
            ber: RateEstimate::new(0, 1),
            mean_detect_seconds: 0.0025,
            blocks_run: 1000,
            failures: 0,
            noise: PowerMoments::default(),
        };
        let csv = summary_csv(&[row]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert!(lines[1].starts_with("cavi,snr,16.0000,16.0000,0.0120000,"));
        assert!(lines[1].ends_with(",0.00250000,1000"));
        assert_eq!(lines[1].split(',').count(), 8);
    }

    #[test]
    fn waveform_table_shape() {
        let cfg = SimConfig::default();
        let samples = waveform_samples(&cfg, 4).unwrap();
        assert_eq!(samples.len(), 2 * 64 * 4);
        let csv = waveform_csv(&samples);
        assert!(csv.starts_with(WAVEFORM_HEADER));
        assert_eq!(csv.lines().count(), samples.len() + 1);
        assert!(waveform_samples(&cfg, 0).is_err());
    }

    #[test]
    fn coherence_table() {
        let csv = coherence_csv(&[(0.5, 0.9), (1.0, 0.0)]);
        assert_eq!(csv, "xi,coherence\n0.500000,0.900000\n1.00000,0.00000\n");
    }
}
