//! Simulation configuration and its flat `key = value` text form.

use std::fmt;
use std::str::FromStr;

use crate::detectors::{Detector, DetectorKind};
use crate::error::{invalid, Result, ScimError};
use crate::imcodec::{ImConfig, ImMode};
use crate::precoding::{slots_for_xi, Precoder, PrecoderKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IerRule {
    /// One trial per (device, block).
    PerDevice,
    /// One trial per block; an error if any device is wrong.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderChoice {
    Identity,
    Dft,
    /// Single-device FTN, or interleaved multi-access FTN when `K > 1`.
    Ftn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Rayleigh,
    Identity,
}

/// Every key accepted by [`SimConfig::set`], in documentation order.
pub const CONFIG_KEYS: [&str; 26] = [
    "L",
    "P",
    "Q",
    "D",
    "M",
    "K",
    "N",
    "xi",
    "mode",
    "precoder",
    "detectors",
    "snr_db",
    "n_blocks",
    "n_run",
    "seed",
    "ier_rule",
    "target_errors",
    "max_blocks_factor",
    "batch_size",
    "workers",
    "timing",
    "noise",
    "channel",
    "symbol_energy",
    "structured_detection",
    "axis_values",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub l: usize,
    pub p: usize,
    pub q: usize,
    /// Subblock length (structured mode).
    pub d: Option<usize>,
    pub m: usize,
    pub k: usize,
    /// Columns per device; derived from `d` or `xi` when unset.
    pub n: Option<usize>,
    /// System time-squeezing factor `L / (N K)`.
    pub xi: Option<f64>,
    pub mode: ImMode,
    pub precoder: PrecoderChoice,
    pub detectors: Vec<DetectorKind>,
    pub snr_db: Vec<f64>,
    pub n_blocks: usize,
    pub n_run: usize,
    pub seed: u64,
    pub ier_rule: IerRule,
    pub target_errors: u64,
    /// Upper bound on trial extension, as a multiple of `n_blocks`. `1` disables extension.
    pub max_blocks_factor: usize,
    pub batch_size: usize,
    /// Worker threads; `0` uses the ambient rayon pool.
    pub workers: usize,
    /// Record detection wall time. When off, reported times are zero.
    pub timing: bool,
    pub noise: bool,
    pub channel: ChannelModel,
    pub symbol_energy: f64,
    /// Enforce one index per subblock at the receiver (structured mode only).
    pub structured_detection: bool,
    /// Values for `sweep`; empty means "use snr_db" for an SNR sweep.
    pub axis_values: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            l: 64,
            p: 4,
            q: 5,
            d: Some(8),
            m: 4,
            k: 2,
            n: None,
            xi: None,
            mode: ImMode::Structured,
            precoder: PrecoderChoice::Ftn,
            detectors: vec![DetectorKind::Cavi, DetectorKind::Omp],
            snr_db: vec![16.0],
            n_blocks: 1000,
            n_run: 4,
            seed: 1,
            ier_rule: IerRule::PerDevice,
            target_errors: 100,
            max_blocks_factor: 10,
            batch_size: 256,
            workers: 0,
            timing: true,
            noise: true,
            channel: ChannelModel::Rayleigh,
            symbol_energy: 2.0,
            structured_detection: true,
            axis_values: Vec::new(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "none" | "auto" => Ok(None),
        v => parse_num(key, v).map(Some),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(invalid(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

impl SimConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "L" => self.l = parse_num(key, v)?,
            "P" => self.p = parse_num(key, v)?,
            "Q" => self.q = parse_num(key, v)?,
            "D" => self.d = parse_opt(key, v)?,
            "M" => self.m = parse_num(key, v)?,
            "K" => self.k = parse_num(key, v)?,
            "N" => self.n = parse_opt(key, v)?,
            "xi" => self.xi = parse_opt(key, v)?,
            "mode" => {
                self.mode = match v.to_ascii_lowercase().as_str() {
                    "structured" => ImMode::Structured,
                    "combinatorial" => ImMode::Combinatorial,
                    _ => return Err(invalid(format!("mode: expected structured|combinatorial, got {v:?}"))),
                }
            }
            "precoder" => {
                self.precoder = match v.to_ascii_lowercase().as_str() {
                    "identity" | "none" => PrecoderChoice::Identity,
                    "dft" | "dft_hermitian" => PrecoderChoice::Dft,
                    "ftn" | "ftn_ma" => PrecoderChoice::Ftn,
                    _ => return Err(invalid(format!("precoder: expected identity|dft|ftn, got {v:?}"))),
                }
            }
            "detectors" => self.detectors = parse_list(key, v)?,
            "snr_db" => self.snr_db = parse_list(key, v)?,
            "n_blocks" => self.n_blocks = parse_num(key, v)?,
            "n_run" => self.n_run = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "ier_rule" => {
                self.ier_rule = match v.to_ascii_lowercase().as_str() {
                    "per_device" => IerRule::PerDevice,
                    "union" => IerRule::Union,
                    _ => return Err(invalid(format!("ier_rule: expected per_device|union, got {v:?}"))),
                }
            }
            "target_errors" => self.target_errors = parse_num(key, v)?,
            "max_blocks_factor" => self.max_blocks_factor = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "timing" => self.timing = parse_bool(key, v)?,
            "noise" => self.noise = parse_bool(key, v)?,
            "channel" => {
                self.channel = match v.to_ascii_lowercase().as_str() {
                    "rayleigh" => ChannelModel::Rayleigh,
                    "identity" => ChannelModel::Identity,
                    _ => return Err(invalid(format!("channel: expected rayleigh|identity, got {v:?}"))),
                }
            }
            "symbol_energy" => self.symbol_energy = parse_num(key, v)?,
            "structured_detection" => self.structured_detection = parse_bool(key, v)?,
            "axis_values" => self.axis_values = parse_list(key, v)?,
            _ => return Err(invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ScimError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| ScimError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Text form accepted by [`SimConfig::from_text`].
    pub fn to_text(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let lines = [
            ("L", self.l.to_string()),
            ("P", self.p.to_string()),
            ("Q", self.q.to_string()),
            ("D", opt(self.d.map(|d| d.to_string()))),
            ("M", self.m.to_string()),
            ("K", self.k.to_string()),
            ("N", opt(self.n.map(|n| n.to_string()))),
            ("xi", opt(self.xi.map(|x| x.to_string()))),
            ("mode", match self.mode {
                ImMode::Structured => "structured".into(),
                ImMode::Combinatorial => "combinatorial".into(),
            }),
            ("precoder", match self.precoder {
                PrecoderChoice::Identity => "identity".into(),
                PrecoderChoice::Dft => "dft".into(),
                PrecoderChoice::Ftn => "ftn".into(),
            }),
            ("detectors", self.detectors.iter().map(|d| d.name()).collect::<Vec<_>>().join(",")),
            ("snr_db", join(&self.snr_db)),
            ("n_blocks", self.n_blocks.to_string()),
            ("n_run", self.n_run.to_string()),
            ("seed", self.seed.to_string()),
            ("ier_rule", match self.ier_rule {
                IerRule::PerDevice => "per_device".into(),
                IerRule::Union => "union".into(),
            }),
            ("target_errors", self.target_errors.to_string()),
            ("max_blocks_factor", self.max_blocks_factor.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("workers", self.workers.to_string()),
            ("timing", self.timing.to_string()),
            ("noise", self.noise.to_string()),
            ("channel", match self.channel {
                ChannelModel::Rayleigh => "rayleigh".into(),
                ChannelModel::Identity => "identity".into(),
            }),
            ("symbol_energy", self.symbol_energy.to_string()),
            ("structured_detection", self.structured_detection.to_string()),
            ("axis_values", join(&self.axis_values)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Resolves derived quantities and validates every structural constraint.
    pub fn resolve(&self) -> Result<ResolvedSystem> {
        if self.l == 0 || self.p == 0 || self.k == 0 || self.q == 0 {
            return Err(invalid("L, P, K and Q must all be at least 1"));
        }
        if self.p > self.l {
            return Err(invalid(format!("P = {} exceeds L = {}", self.p, self.l)));
        }
        if self.n_blocks == 0 {
            return Err(invalid("n_blocks must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if self.max_blocks_factor == 0 {
            return Err(invalid("max_blocks_factor must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(invalid("no detectors configured"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("snr_db must be a non-empty list of finite values"));
        }
        let n = self.columns_per_device()?;
        let im = match self.mode {
            ImMode::Structured => {
                if n % self.q != 0 {
                    return Err(invalid(format!("N = {n} is not a multiple of Q = {}", self.q)));
                }
                ImConfig::structured(self.q, n / self.q, self.m, self.symbol_energy)?
            }
            ImMode::Combinatorial => ImConfig::combinatorial(n, self.q, self.m, self.symbol_energy)?,
        };
        let precoders = self.precoders(n)?;
        let kind = precoders[0].kind();
        let detectors: Vec<Detector> = self
            .detectors
            .iter()
            .map(|&kind| Detector::with_iterations(kind, self.n_run))
            .collect();
        for d in &detectors {
            d.supports(self.k, kind)?;
        }
        let subblock = match (self.mode, self.structured_detection) {
            (ImMode::Structured, true) => Some(im.d()),
            _ => None,
        };
        Ok(ResolvedSystem {
            xi: self.l as f64 / (n * self.k) as f64,
            im,
            n_per_device: n,
            precoders,
            subblock,
            detectors,
        })
    }

    fn columns_per_device(&self) -> Result<usize> {
        let from_d = match (self.mode, self.d) {
            (ImMode::Structured, Some(d)) => Some(self.q * d),
            _ => None,
        };
        let n = match (self.n, from_d, self.xi) {
            (Some(n), Some(nd), _) if n != nd => {
                return Err(invalid(format!("N = {n} disagrees with Q D = {nd}")));
            }
            (Some(n), _, _) => n,
            (None, Some(nd), _) => nd,
            (None, None, Some(xi)) => {
                let slots = slots_for_xi(self.l, xi * self.k as f64)?;
                match self.mode {
                    // largest N <= floor(L / (xi K)) that splits into Q equal subblocks
                    ImMode::Structured => self.q * (slots / self.q),
                    ImMode::Combinatorial => slots,
                }
            }
            (None, None, None) => match self.mode {
                ImMode::Structured => return Err(invalid("structured mode needs D, N or xi")),
                ImMode::Combinatorial => self.l,
            },
        };
        if n == 0 {
            return Err(invalid("configuration leaves no symbol slots"));
        }
        if let (Some(xi), Some(_)) = (self.xi, self.n.or(from_d)) {
            let implied = self.l as f64 / (n * self.k) as f64;
            if (implied - xi).abs() > 1e-9 {
                return Err(invalid(format!("xi = {xi} disagrees with L / (N K) = {implied}")));
            }
        }
        Ok(n)
    }

    fn precoders(&self, n: usize) -> Result<Vec<Precoder>> {
        match self.precoder {
            PrecoderChoice::Identity | PrecoderChoice::Dft => {
                if n != self.l {
                    return Err(invalid(format!(
                        "{} precoder needs N = L, got N = {n}, L = {}",
                        if self.precoder == PrecoderChoice::Dft { "dft" } else { "identity" },
                        self.l
                    )));
                }
                Ok((0..self.k)
                    .map(|_| match self.precoder {
                        PrecoderChoice::Dft => Precoder::dft_hermitian(self.l),
                        _ => Precoder::identity(self.l),
                    })
                    .collect())
            }
            PrecoderChoice::Ftn if self.k == 1 => Ok(vec![Precoder::ftn(self.l, n)?]),
            PrecoderChoice::Ftn => {
                let counts = vec![n; self.k];
                (0..self.k)
                    .map(|dev| Precoder::ftn_multi_access(self.l, &counts, dev))
                    .collect()
            }
        }
    }
}

impl fmt::Display for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Per-point system derived from a [`SimConfig`].
#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub im: ImConfig,
    pub n_per_device: usize,
    /// System time-squeezing factor `L / (N K)`.
    pub xi: f64,
    pub precoders: Vec<Precoder>,
    pub subblock: Option<usize>,
    pub detectors: Vec<Detector>,
}

impl ResolvedSystem {
    pub fn devices(&self) -> usize {
        self.precoders.len()
    }

    pub fn precoder_kind(&self) -> PrecoderKind {
        self.precoders[0].kind()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_text_with_comments() {
        let cfg = SimConfig::from_text(
            "# headline point\nL = 64\nK=2  # two devices\n\nsnr_db = 12, 16 ,20\ndetectors = cavi,omp_mmse\nmode = combinatorial\nN = 40\n",
        )
        .unwrap();
        assert_eq!(cfg.l, 64);
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.snr_db, vec![12.0, 16.0, 20.0]);
        assert_eq!(cfg.detectors, vec![DetectorKind::Cavi, DetectorKind::OmpMmse]);
        assert_eq!(cfg.mode, ImMode::Combinatorial);
        assert_eq!(cfg.n, Some(40));
    }

    #[test]
    fn reports_line_numbers() {
        let err = SimConfig::from_text("L = 64\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ScimError::Parse { line: 2, .. }), "{err}");
        let err = SimConfig::from_text("L 64\n").unwrap_err();
        assert!(matches!(err, ScimError::Parse { line: 1, .. }));
        assert!(SimConfig::from_text("Q = five").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = SimConfig::default();
        cfg.set("xi", "0.5").unwrap();
        cfg.set("D", "auto").unwrap();
        cfg.set("snr_db", "8,12.5").unwrap();
        cfg.set("ier_rule", "union").unwrap();
        assert_eq!(SimConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        for key in CONFIG_KEYS {
            assert!(cfg.to_text().contains(&format!("{key} = ")), "{key}");
        }
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("L", "32"), ("P", "2"), ("Q", "2"), ("D", "8"), ("M", "2"), ("K", "1"), ("N", "16"),
            ("xi", "2.0"), ("mode", "structured"), ("precoder", "ftn"), ("detectors", "omp"),
            ("snr_db", "10"), ("n_blocks", "5"), ("n_run", "3"), ("seed", "9"),
            ("ier_rule", "per_device"), ("target_errors", "10"), ("max_blocks_factor", "1"),
            ("batch_size", "8"), ("workers", "2"), ("timing", "off"), ("noise", "false"),
            ("channel", "identity"), ("symbol_energy", "1"), ("structured_detection", "yes"),
            ("axis_values", "1,2"),
        ];
        assert_eq!(samples.len(), CONFIG_KEYS.len());
        let mut cfg = SimConfig::default();
        for (k, v) in samples {
            cfg.set(k, v).unwrap();
        }
        let sys = cfg.resolve().unwrap();
        assert_eq!(sys.n_per_device, 16);
    }

    #[test]
    fn structured_n_follows_d_or_xi() {
        let cfg = SimConfig::default();
        let sys = cfg.resolve().unwrap();
        assert_eq!(sys.n_per_device, 40);
        assert_eq!(sys.devices(), 2);
        assert!((sys.xi - 0.8).abs() < 1e-12);

        let mut single = SimConfig::default();
        single.k = 1;
        assert!((single.resolve().unwrap().xi - 1.6).abs() < 1e-12);

        let mut by_xi = SimConfig::default();
        by_xi.k = 1;
        by_xi.d = None;
        by_xi.q = 4;
        by_xi.xi = Some(0.5);
        let sys = by_xi.resolve().unwrap();
        assert_eq!(sys.n_per_device, 128);
        assert_eq!(sys.im.d(), 32);

        // floor(64 / 0.7) = 91 -> 88 = 4 * 22; the realized factor is reported
        by_xi.xi = Some(0.7);
        let sys = by_xi.resolve().unwrap();
        assert_eq!(sys.n_per_device, 88);
        assert!((sys.xi - 64.0 / 88.0).abs() < 1e-12);

        let mut both = SimConfig::default();
        both.xi = Some(0.5);
        assert!(both.resolve().is_err());
        both.xi = Some(0.8);
        assert!(both.resolve().is_ok());
        both.xi = Some(0.5);
        assert!(both.resolve().is_err(), "explicit D and xi must agree");
    }

    #[test]
    fn rejects_infeasible_configs() {
        let mut cfg = SimConfig::default();
        cfg.n = Some(41);
        assert!(cfg.resolve().is_err());

        let mut cfg = SimConfig::default();
        cfg.precoder = PrecoderChoice::Identity;
        assert!(cfg.resolve().is_err(), "identity needs N = L");

        let mut cfg = SimConfig::default();
        cfg.detectors = vec![DetectorKind::Mmse];
        assert!(cfg.resolve().is_err(), "mmse needs the identity precoder");

        let mut cfg = SimConfig::default();
        cfg.k = 2;
        cfg.detectors = vec![DetectorKind::OmpMmse];
        assert!(cfg.resolve().is_err());

        let mut cfg = SimConfig::default();
        cfg.snr_db = vec![f64::NAN];
        assert!(cfg.resolve().is_err());

        let mut cfg = SimConfig::default();
        cfg.n_blocks = 0;
        assert!(cfg.resolve().is_err());
    }
}
