//! Benchmark fixtures: one received block per system, with everything a
//! detector needs kept alive.

use rand::Rng;

use scim_core::channel::{cscg, draw_channel};
use scim_core::harness::{snr_to_noise, trial_rng, ResolvedSystem, SimConfig};
use scim_core::imcodec::encode;
use scim_core::{
    compose_measurement, BitPayload, ChannelRealization, DetectionInput, MeasurementModel, NoiseSpec, Result, C64,
};

pub struct Fixture {
    pub system: ResolvedSystem,
    pub channels: Vec<ChannelRealization>,
    pub model: MeasurementModel,
    pub received: Vec<C64>,
}

impl Fixture {
    /// Draws one noisy block for `cfg` at its first SNR.
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Self> {
        let system = cfg.resolve()?;
        let snr = cfg.snr_db.first().copied().unwrap_or(16.0);
        let noise = NoiseSpec::new(snr_to_noise(&system.im, snr)?)?;
        let mut rng = trial_rng(seed, 0);
        let mut channels = Vec::new();
        let mut blocks = Vec::new();
        for _ in 0..system.devices() {
            channels.push(draw_channel(cfg.p, cfg.l, &mut rng)?);
            let bits = BitPayload((0..system.im.n_bits_total()).map(|_| rng.random::<bool>()).collect());
            blocks.push(encode(&bits, &system.im)?);
        }
        let model = compose_measurement(&channels, &system.precoders, noise, system.im.symbol_energy())?;
        let mut received = model.signal(&blocks)?;
        for r in received.iter_mut() {
            *r += cscg(&mut rng, noise.n0());
        }
        Ok(Self { system, channels, model, received })
    }

    pub fn input(&self) -> DetectionInput<'_> {
        DetectionInput {
            received: &self.received,
            model: &self.model,
            channels: &self.channels,
            precoders: &self.system.precoders,
            q_per_device: self.system.im.q(),
            subblock: self.system.subblock,
            constellation: self.system.im.constellation(),
        }
    }
}

/// Single device, `L = 64`, `N = 80`, `Q = 10`, `D = 8`, FTN.
pub fn single_device() -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.apply_text("K = 1\nN = 80\nQ = 10\nD = 8\n").expect("valid settings");
    cfg
}

/// Two devices, `L = 64`, `Q = 5`, `D = 8`, multi-access FTN.
pub fn two_devices() -> SimConfig {
    SimConfig::default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use scim_core::{Detector, DetectorKind};

    #[test]
    fn fixtures_feed_every_applicable_detector() {
        for cfg in [single_device(), two_devices()] {
            let fx = Fixture::new(&cfg, 3).unwrap();
            for kind in [DetectorKind::Mmse, DetectorKind::Omp, DetectorKind::OmpMmse, DetectorKind::Cavi] {
                let det = Detector::new(kind);
                if det.supports(fx.system.devices(), fx.system.precoder_kind()).is_ok() {
                    let res = det.detect(&fx.input()).unwrap();
                    assert_eq!(res.supports.len(), fx.system.devices());
                }
            }
        }
    }
}
