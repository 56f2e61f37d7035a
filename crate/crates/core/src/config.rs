//! Versioned TOML scenario configuration. Every section is optional and
//! falls back to the documented defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{PathLossParams, ShadowParams, SoftLosParams};
use crate::error::{Error, Result, Violation};
use crate::measure::NoiseParams;
use crate::mobility::MobilityConfig;
use crate::radio::{BlockageLevels, Grip, PanelSet, TxBeamGrid, UeRotation, NUM_TX_BEAMS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_ms: u64,
    pub ssb_period_ms: u64,
    pub duration_ms: u64,
    pub seed: u64,
    pub n_ue: usize,
    pub ue_speed_kmh: f64,
    pub grip: Grip,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            dt_ms: 10,
            ssb_period_ms: 20,
            duration_ms: 30_000,
            seed: 1,
            n_ue: 420,
            ue_speed_kmh: 60.0,
            grip: Grip::Free,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub isd_m: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    /// Index of the replica offset applied to the whole UE drop (0 = none).
    pub drop_shift: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            isd_m: 200.0,
            bs_height_m: 10.0,
            ue_height_m: 1.5,
            drop_shift: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub tx_power_dbm: f64,
    pub tx_grid: TxBeamGrid,
    pub panels: PanelSet,
    pub blockage: BlockageLevels,
    /// Mask CSV replacing the bundled mask of the configured grip.
    pub mask_file: Option<PathBuf>,
    /// Handset rotation used with `mask_file`.
    pub mask_rotation: Option<UeRotation>,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            tx_power_dbm: 40.0,
            tx_grid: TxBeamGrid::default(),
            panels: PanelSet::default(),
            blockage: BlockageLevels::default(),
            mask_file: None,
            mask_rotation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub fc_ghz: f64,
    pub soft_los: SoftLosParams,
    pub shadow_los: ShadowParams,
    pub shadow_nlos: ShadowParams,
    pub shadowing: bool,
    pub fast_fading: bool,
    /// Standard deviation of a zero-mean Gaussian error on raw RSRP samples.
    pub measurement_error_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            fc_ghz: 28.0,
            soft_los: SoftLosParams::default(),
            shadow_los: ShadowParams {
                sigma_db: 4.0,
                decorrelation_m: 10.0,
            },
            shadow_nlos: ShadowParams {
                sigma_db: 7.82,
                decorrelation_m: 13.0,
            },
            shadowing: true,
            fast_fading: true,
            measurement_error_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub l1_window: usize,
    pub l3_k: f64,
    pub noise: NoiseParams,
    pub n_mc: usize,
    pub scheduled_beams: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            l1_window: 2,
            l3_k: 4.0,
            noise: NoiseParams::default(),
            n_mc: 20,
            scheduled_beams: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MpueSection {
    pub o_p_db: f64,
    pub o_b_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiSection {
    pub t_fh_ms: u64,
}

impl Default for KpiSection {
    fn default() -> Self {
        KpiSection { t_fh_ms: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub events: bool,
    pub selection_trace: bool,
    pub measurement_log: bool,
    pub channel_trace: bool,
    /// UEs whose measurement log / channel trace is written.
    pub trace_ues: Vec<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            events: true,
            selection_trace: true,
            measurement_log: false,
            channel_trace: false,
            trace_ues: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Required; a missing version reads as 0 and fails validation.
    #[serde(default = "missing_version")]
    pub schema_version: u32,
    pub simulation: SimulationSection,
    pub geometry: GeometrySection,
    pub radio: RadioSection,
    pub channel: ChannelSection,
    pub measure: MeasureSection,
    pub mpue: MpueSection,
    pub mobility: MobilityConfig,
    pub kpi: KpiSection,
    pub output: OutputSection,
}

fn missing_version() -> u32 {
    0
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            schema_version: SCHEMA_VERSION,
            simulation: SimulationSection::default(),
            geometry: GeometrySection::default(),
            radio: RadioSection::default(),
            channel: ChannelSection::default(),
            measure: MeasureSection::default(),
            mpue: MpueSection::default(),
            mobility: MobilityConfig::default(),
            kpi: KpiSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl SimConfig {
    /// Desk-scale preset: 105 UEs for 10 s.
    pub fn desk() -> SimConfig {
        let mut c = SimConfig::default();
        c.simulation.n_ue = 105;
        c.simulation.duration_ms = 10_000;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Mask paths are relative to the config file.
        if let (Some(mask), Some(dir)) = (cfg.radio.mask_file.as_mut(), path.parent()) {
            if mask.is_relative() {
                *mask = dir.join(&*mask);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    pub fn path_loss(&self) -> PathLossParams {
        PathLossParams {
            fc_ghz: self.channel.fc_ghz,
            h_bs_m: self.geometry.bs_height_m,
            h_ut_m: self.geometry.ue_height_m,
        }
    }

    pub fn ue_speed_mps(&self) -> f64 {
        self.simulation.ue_speed_kmh / 3.6
    }

    pub fn n_steps(&self) -> u64 {
        self.simulation.duration_ms / self.simulation.dt_ms.max(1)
    }

    /// Collects every violated constraint.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut check = |ok: bool, field: &str, reason: String| {
            if !ok {
                v.push(Violation {
                    field: field.to_string(),
                    reason,
                });
            }
        };
        let s = &self.simulation;
        check(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            match self.schema_version {
                0 => format!("missing; expected {SCHEMA_VERSION}"),
                other => format!("unsupported version {other}, expected {SCHEMA_VERSION}"),
            },
        );
        check(s.dt_ms > 0, "simulation.dt_ms", "must be positive".into());
        let dt = s.dt_ms.max(1);
        check(
            s.ssb_period_ms > 0 && s.ssb_period_ms % dt == 0,
            "simulation.ssb_period_ms",
            format!("must be a positive multiple of dt_ms ({dt})"),
        );
        check(
            s.duration_ms % dt == 0,
            "simulation.duration_ms",
            format!("must be a multiple of dt_ms ({dt})"),
        );
        check(s.n_ue >= 1, "simulation.n_ue", "must be at least 1".into());
        check(
            s.ue_speed_kmh.is_finite() && s.ue_speed_kmh >= 0.0,
            "simulation.ue_speed_kmh",
            "must be finite and non-negative".into(),
        );

        let g = &self.geometry;
        check(g.isd_m.is_finite() && g.isd_m > 0.0, "geometry.isd_m", "must be positive".into());
        check(
            g.bs_height_m > 1.0 && g.bs_height_m.is_finite(),
            "geometry.bs_height_m",
            "must exceed 1 m".into(),
        );
        check(
            g.ue_height_m > 1.0 && g.ue_height_m < g.bs_height_m,
            "geometry.ue_height_m",
            "must exceed 1 m and stay below the BS height".into(),
        );
        check(g.drop_shift <= 6, "geometry.drop_shift", "must index one of the 7 replica offsets".into());

        let r = &self.radio;
        check(r.tx_power_dbm.is_finite(), "radio.tx_power_dbm", "must be finite".into());
        check(
            r.tx_grid.len() == NUM_TX_BEAMS,
            "radio.tx_grid.beams",
            format!("must list {NUM_TX_BEAMS} beams, got {}", r.tx_grid.len()),
        );
        for (i, b) in r.tx_grid.beams.iter().enumerate() {
            check(
                b.rows >= 1 && b.cols >= 1 && b.v_spacing > 0.0 && b.h_spacing > 0.0,
                &format!("radio.tx_grid.beams[{i}]"),
                "array dimensions and spacings must be positive".into(),
            );
        }
        check(r.panels.elements >= 1, "radio.panels.elements", "must be at least 1".into());
        check(r.panels.spacing > 0.0, "radio.panels.spacing", "must be positive".into());
        let lv = &r.blockage;
        for (name, x) in [
            ("light_db", lv.light_db),
            ("moderate_db", lv.moderate_db),
            ("partial_db", lv.partial_db),
            ("strong_db", lv.strong_db),
            ("deep_db", lv.deep_db),
        ] {
            check(
                x.is_finite() && x >= 0.0,
                &format!("radio.blockage.{name}"),
                "must be a non-negative attenuation".into(),
            );
        }

        let c = &self.channel;
        check(c.fc_ghz > 0.0 && c.fc_ghz.is_finite(), "channel.fc_ghz", "must be positive".into());
        check(
            c.soft_los.d1_m > 0.0 && c.soft_los.d2_m > 0.0 && c.soft_los.window_m >= 0.0,
            "channel.soft_los",
            "distances must be positive and the window non-negative".into(),
        );
        for (name, p) in [("shadow_los", c.shadow_los), ("shadow_nlos", c.shadow_nlos)] {
            check(
                p.sigma_db >= 0.0 && p.decorrelation_m > 0.0,
                &format!("channel.{name}"),
                "sigma must be non-negative and decorrelation distance positive".into(),
            );
        }
        check(
            c.measurement_error_db >= 0.0,
            "channel.measurement_error_db",
            "must be non-negative".into(),
        );

        let m = &self.measure;
        check(m.l1_window >= 1, "measure.l1_window", "must be at least 1".into());
        check(m.l3_k >= 0.0, "measure.l3_k", "must be non-negative".into());
        check(m.n_mc >= 1, "measure.n_mc", "must be at least 1".into());
        // Zero scheduled beams silences every interfering cell.
        check(
            m.scheduled_beams <= NUM_TX_BEAMS,
            "measure.scheduled_beams",
            format!("must lie in 0..={NUM_TX_BEAMS}"),
        );
        check(m.noise.bandwidth_mhz > 0.0, "measure.noise.bandwidth_mhz", "must be positive".into());

        check(self.mpue.o_p_db >= 0.0, "mpue.o_p_db", "must be non-negative".into());
        check(self.mpue.o_b_db >= 0.0, "mpue.o_b_db", "must be non-negative".into());

        let mo = &self.mobility;
        check(
            mo.ttt_ms > 0 && mo.ttt_ms % dt == 0,
            "mobility.ttt_ms",
            format!("must be a positive multiple of dt_ms ({dt})"),
        );
        check(mo.t_hof_ms > 0, "mobility.t_hof_ms", "must be positive".into());
        check(mo.t_rlf_ms > 0, "mobility.t_rlf_ms", "must be positive".into());
        check(mo.t_batt_ms > 0, "mobility.t_batt_ms", "must be positive".into());
        check(mo.n_batt >= 1, "mobility.n_batt", "must be at least 1".into());
        check(mo.n_prep >= 1, "mobility.n_prep", "must be at least 1".into());
        check(mo.ra_outage_ms > 0, "mobility.ra_outage_ms", "must be positive".into());
        check(
            mo.reest_outage_ms > mo.ra_outage_ms,
            "mobility.reest_outage_ms",
            "must exceed ra_outage_ms".into(),
        );
        check(mo.gamma_out_db.is_finite(), "mobility.gamma_out_db", "must be finite".into());

        check(self.kpi.t_fh_ms > 0, "kpi.t_fh_ms", "must be positive".into());
        for &u in &self.output.trace_ues {
            check(
                u < s.n_ue,
                "output.trace_ues",
                format!("UE {u} does not exist (n_ue = {})", s.n_ue),
            );
        }
        check(
            r.mask_rotation.is_none() || r.mask_file.is_some(),
            "radio.mask_rotation",
            "only meaningful together with radio.mask_file".into(),
        );
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}
