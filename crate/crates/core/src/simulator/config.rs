use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{LinkParams, Occupancy, PrimaryUser};
use crate::codebook::PermutationMapping;
use crate::convolutional::{ConvCode, Trellis};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Hfsk,
    OpportunisticMfsk,
    CodedBpskOfdm,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Hfsk => "hfsk",
            Self::OpportunisticMfsk => "opportunistic_mfsk",
            Self::CodedBpskOfdm => "coded_bpsk_ofdm",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// `Es_r / N0` of one H-FSK code matrix, dB.
    #[default]
    Snr,
    /// Steady-state On probability of every primary user.
    POn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// SNR held fixed on a `p_on` sweep.
    pub snr_db: f64,
    /// `r + p` of the chains built on a `p_on` sweep.
    pub transition_rate: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { axis: SweepAxis::Snr, values: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0], snr_db: 4.0, transition_rate: 0.01 }
    }
}

/// How the baselines are given "the same energy".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyNormalization {
    /// Every scheme spends the H-FSK energy per information bit.
    #[default]
    PerInfoBit,
    /// Every transmitted symbol carries the H-FSK code-matrix energy.
    PerCodedSymbol,
}

/// One primary transmitter, active on all of `bands` at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PuSpec {
    pub bands: Vec<usize>,
    pub activity: Occupancy,
}

impl PuSpec {
    pub fn on_band(band: usize, activity: Occupancy) -> Self {
        Self { bands: vec![band], activity }
    }
}

/// Optional replacement for the standard code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub inputs: usize,
    pub memory: usize,
    /// Octal generator strings.
    pub generators: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub link: LinkParams,
    pub pu: Vec<PuSpec>,
    /// Information bits per packet, `L`.
    pub packet_bits: usize,
    /// Packets per grid point.
    pub packets: u64,
    pub sweep: Sweep,
    /// Packets per second.
    pub rp: f64,
    pub seed: u64,
    /// Worker threads; 0 picks the environment default.
    pub workers: usize,
    pub energy: EnergyNormalization,
    pub override_sinr_guard: bool,
    pub code: Option<CodeSpec>,
    /// Mapping table file (`BITS PERM` lines).
    pub mapping_file: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Hfsk,
            link: LinkParams::default(),
            pu: vec![PuSpec::on_band(1, Occupancy::AlwaysOn)],
            packet_bits: 256,
            packets: 1000,
            sweep: Sweep::default(),
            rp: 100.0,
            seed: 1,
            workers: 0,
            energy: EnergyNormalization::PerInfoBit,
            override_sinr_guard: false,
            code: None,
            mapping_file: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse { line, message: e.message().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn h(&self) -> usize {
        self.link.h
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate().map_err(|e| Error::Config(e.to_string()))?;
        let h = self.h();
        if self.packets == 0 {
            return Err(Error::Config("packets must be positive".into()));
        }
        if self.packet_bits == 0 {
            return Err(Error::Config("packet_bits must be positive".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if self.sweep.axis == SweepAxis::POn && self.sweep.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("P_on sweep values must lie in [0, 1]".into()));
        }
        if !(self.rp > 0.0) {
            return Err(Error::Config("rp must be positive".into()));
        }
        let mut seen = vec![false; h];
        for spec in &self.pu {
            if spec.bands.is_empty() {
                return Err(Error::Config("primary user without bands".into()));
            }
            for &b in &spec.bands {
                if b >= h {
                    return Err(Error::Config(format!("primary user band {b} outside 0..{h}")));
                }
                if std::mem::replace(&mut seen[b], true) {
                    return Err(Error::Config(format!("band {b} assigned to two primary users")));
                }
            }
            if let Occupancy::Markov { r, p } = spec.activity {
                Occupancy::markov(r, p).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        match self.scheme {
            Scheme::Hfsk => {
                let trellis = self.trellis()?;
                let m = trellis.code().inputs();
                if self.packet_bits % m != 0 {
                    return Err(Error::Config(format!("packet_bits must be a multiple of {m}")));
                }
            }
            Scheme::OpportunisticMfsk => {
                if h != 4 {
                    return Err(Error::Config("the opportunistic baseline needs H = 4 bands".into()));
                }
                if self.packet_bits % 2 != 0 {
                    return Err(Error::Config("packet_bits must be even for 4-FSK".into()));
                }
                if self.pu.iter().map(|s| s.bands.len()).sum::<usize>() > 2 {
                    return Err(Error::Config("the opportunistic baseline needs two bands free of primary users".into()));
                }
            }
            Scheme::CodedBpskOfdm => {}
        }
        if self.sweep.axis == SweepAxis::POn && !(self.sweep.transition_rate > 0.0) {
            return Err(Error::Config("transition_rate must be positive".into()));
        }
        Ok(())
    }

    /// Code and mapping of the H-FSK chain.
    pub fn trellis(&self) -> Result<Trellis> {
        let code = match &self.code {
            Some(spec) => {
                let gens: Vec<&str> = spec.generators.iter().map(String::as_str).collect();
                ConvCode::from_octal(spec.inputs, spec.memory, &gens).map_err(|e| Error::Config(e.to_string()))?
            }
            None => ConvCode::standard_for_bands(self.h()),
        };
        let mapping = match &self.mapping_file {
            Some(path) => PermutationMapping::load(Path::new(path))?,
            None => PermutationMapping::standard(self.h(), 1 << code.outputs())
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        if mapping.h() != self.h() {
            return Err(Error::Config(format!("mapping has H = {}, link has H = {}", mapping.h(), self.h())));
        }
        Trellis::build(code, mapping)
    }

    /// PU set-up at grid value `x`.
    pub fn pu_at(&self, x: f64) -> Result<Vec<PuSpec>> {
        match self.sweep.axis {
            SweepAxis::Snr => Ok(self.pu.clone()),
            SweepAxis::POn => self
                .pu
                .iter()
                .map(|s| {
                    Ok(PuSpec { bands: s.bands.clone(), activity: Occupancy::with_on_fraction(x, self.sweep.transition_rate)? })
                })
                .collect(),
        }
    }

    /// H-FSK `Es_r / N0` in dB at grid value `x`.
    pub fn snr_at(&self, x: f64) -> f64 {
        match self.sweep.axis {
            SweepAxis::Snr => x,
            SweepAxis::POn => self.sweep.snr_db,
        }
    }

    /// Single-band users for the oracle and the analytical bound.
    pub fn primary_users(&self, x: f64) -> Result<Vec<PrimaryUser>> {
        Ok(self
            .pu_at(x)?
            .into_iter()
            .flat_map(|s| s.bands.into_iter().map(move |band| PrimaryUser { band, activity: s.activity }))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parses_a_sparse_file() {
        let text = r#"
scheme = "coded_bpsk_ofdm"
packets = 10
seed = 7

[sweep]
axis = "p_on"
values = [0.0, 0.5, 1.0]

[link]
h = 4

[[pu]]
bands = [0, 1]
activity = { kind = "markov", r = 0.01, p = 0.01 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.scheme, Scheme::CodedBpskOfdm);
        assert_eq!(cfg.pu[0].bands, vec![0, 1]);
        let users = cfg.pu_at(0.25).unwrap();
        assert!((users[0].activity.on_probability().unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(cfg.snr_at(0.25), 4.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "packets = 10\nbogus = 3\n";
        match ExperimentConfig::from_toml(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors() {
        let bad_band = ExperimentConfig { pu: vec![PuSpec::on_band(5, Occupancy::AlwaysOn)], ..Default::default() };
        assert!(matches!(bad_band.validate(), Err(Error::Config(_))));
        let empty = ExperimentConfig { sweep: Sweep { values: vec![], ..Sweep::default() }, ..Default::default() };
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let mfsk = ExperimentConfig { scheme: Scheme::OpportunisticMfsk, ..Default::default() };
        assert!(matches!(mfsk.validate(), Err(Error::Config(_))));
    }
}
