//! Antenna gains: the 12-beam Tx grid of every cell, the three-panel UE
//! with seven analog Rx beams per panel, and hand-grip blockage masks.
//!
//! Angles follow the antenna convention: azimuth is measured in the
//! horizontal plane from the frame's boresight (+x), zenith from +z, so a
//! horizontal direction has zenith 90°. Public operations take 1-based
//! beam/panel indices; the `*_idx` helpers used by the engine are 0-based.
//!
//! Every beam pattern is the exact uniform-array factor of its panel
//! multiplied by a single-element pattern re-centred on the steering
//! direction, so each beam peaks where it is steered and is suppressed
//! behind the array.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_TX_BEAMS: usize = 12;
pub const NUM_PANELS: usize = 3;
pub const NUM_RX_BEAMS: usize = 7;

const DEG: f64 = PI / 180.0;

/// Wraps an angle in degrees into [-180, 180).
pub fn wrap_deg(a: f64) -> f64 {
    (a + 180.0).rem_euclid(360.0) - 180.0
}

/// 3GPP-style single-element power pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementPattern {
    pub theta_3db_deg: f64,
    pub phi_3db_deg: f64,
    pub sla_v_db: f64,
    pub a_max_db: f64,
    pub g_max_dbi: f64,
}

impl ElementPattern {
    /// Base-station element (macro/micro sector antenna).
    pub const BS: ElementPattern = ElementPattern {
        theta_3db_deg: 65.0,
        phi_3db_deg: 65.0,
        sla_v_db: 30.0,
        a_max_db: 30.0,
        g_max_dbi: 8.0,
    };

    /// Handset panel element.
    pub const UE: ElementPattern = ElementPattern {
        theta_3db_deg: 90.0,
        phi_3db_deg: 90.0,
        sla_v_db: 25.0,
        a_max_db: 25.0,
        g_max_dbi: 5.0,
    };

    /// Gain in dBi at azimuth `az_deg` off boresight and zenith `zen_deg`.
    pub fn gain_db(&self, az_deg: f64, zen_deg: f64) -> f64 {
        let az = wrap_deg(az_deg);
        let a_v = -(12.0 * ((zen_deg - 90.0) / self.theta_3db_deg).powi(2)).min(self.sla_v_db);
        let a_h = -(12.0 * (az / self.phi_3db_deg).powi(2)).min(self.a_max_db);
        self.g_max_dbi - (-(a_v + a_h)).min(self.a_max_db)
    }
}

/// Normalised power factor |Σ e^{jkψ}|² / n of an n-element line array.
fn line_array_factor(n: u32, psi: f64) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let half = 0.5 * psi;
    let s = half.sin();
    if s.abs() < 1e-12 {
        return n as f64;
    }
    let num = (n as f64 * half).sin();
    num * num / (n as f64 * s * s)
}

fn unit_from_angles(az_deg: f64, zen_deg: f64) -> [f64; 3] {
    let (sa, ca) = (az_deg * DEG).sin_cos();
    let (sz, cz) = (zen_deg * DEG).sin_cos();
    [sz * ca, sz * sa, cz]
}

pub fn angles_from_unit(v: [f64; 3]) -> (f64, f64) {
    let az = v[1].atan2(v[0]) / DEG;
    let zen = v[2].clamp(-1.0, 1.0).acos() / DEG;
    (az, zen)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxBeam {
    pub azimuth_deg: f64,
    pub zenith_deg: f64,
    pub rows: u32,
    pub cols: u32,
    /// Vertical element spacing in wavelengths.
    pub v_spacing: f64,
    /// Horizontal element spacing in wavelengths.
    pub h_spacing: f64,
}

impl TxBeam {
    pub fn array_gain_db(&self) -> f64 {
        10.0 * ((self.rows * self.cols) as f64).log10()
    }

    /// Array factor (dB, relative to one element) towards a direction given
    /// as a unit vector in the cell frame.
    fn array_factor_db(&self, u: [f64; 3], steer: [f64; 3]) -> f64 {
        let psi_v = 2.0 * PI * self.v_spacing * (u[2] - steer[2]);
        let psi_h = 2.0 * PI * self.h_spacing * (u[1] - steer[1]);
        let af = line_array_factor(self.rows, psi_v) * line_array_factor(self.cols, psi_h);
        10.0 * af.max(1e-30).log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxBeamGrid {
    pub beams: Vec<TxBeam>,
    pub element: ElementPattern,
}

impl Default for TxBeamGrid {
    /// Eight narrow outer beams from 16×8 arrays at 15° spacing on the
    /// horizon, four wide inner beams from 8×4 arrays at 30° spacing with 7°
    /// downtilt.
    fn default() -> Self {
        let outer = (0..8).map(|k| TxBeam {
            azimuth_deg: -52.5 + 15.0 * k as f64,
            zenith_deg: 90.0,
            rows: 16,
            cols: 8,
            v_spacing: 0.7,
            h_spacing: 0.5,
        });
        let inner = (0..4).map(|k| TxBeam {
            azimuth_deg: -45.0 + 30.0 * k as f64,
            zenith_deg: 97.0,
            rows: 8,
            cols: 4,
            v_spacing: 0.7,
            h_spacing: 0.5,
        });
        TxBeamGrid {
            beams: outer.chain(inner).collect(),
            element: ElementPattern::BS,
        }
    }
}

impl TxBeamGrid {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Gain of beam `b` (0-based) towards (`az_deg`, `zen_deg`) in the cell frame.
    pub fn gain_idx(&self, b: usize, az_deg: f64, zen_deg: f64) -> f64 {
        let beam = &self.beams[b];
        let u = unit_from_angles(az_deg, zen_deg);
        let steer = unit_from_angles(beam.azimuth_deg, beam.zenith_deg);
        self.element
            .gain_db(az_deg - beam.azimuth_deg, zen_deg - beam.zenith_deg + 90.0)
            + beam.array_factor_db(u, steer)
    }

    /// Numerical half-power beamwidth of beam `b` (0-based) in the azimuth cut
    /// through its steering zenith.
    pub fn azimuth_hpbw_deg(&self, b: usize) -> f64 {
        let beam = &self.beams[b];
        let peak = self.gain_idx(b, beam.azimuth_deg, beam.zenith_deg);
        let edge = |sign: f64| {
            let mut off = 0.0;
            while off < 180.0 {
                off += 0.01;
                if self.gain_idx(b, beam.azimuth_deg + sign * off, beam.zenith_deg) < peak - 3.0 {
                    break;
                }
            }
            off
        };
        edge(1.0) + edge(-1.0)
    }
}

/// Tx grid with precomputed steering vectors for repeated evaluation.
#[derive(Debug, Clone)]
pub struct TxGainEval {
    beams: Vec<TxBeam>,
    steer: Vec<[f64; 3]>,
    element: ElementPattern,
}

impl TxGainEval {
    pub fn new(grid: &TxBeamGrid) -> TxGainEval {
        TxGainEval {
            beams: grid.beams.clone(),
            steer: grid.beams.iter().map(|b| unit_from_angles(b.azimuth_deg, b.zenith_deg)).collect(),
            element: grid.element,
        }
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Same value as [`TxBeamGrid::gain_idx`]; `u` is the unit vector of
    /// (`az_deg`, `zen_deg`).
    #[inline]
    pub fn gain(&self, b: usize, az_deg: f64, zen_deg: f64, u: [f64; 3]) -> f64 {
        let beam = &self.beams[b];
        self.element
            .gain_db(az_deg - beam.azimuth_deg, zen_deg - beam.zenith_deg + 90.0)
            + beam.array_factor_db(u, self.steer[b])
    }
}

/// Gain (dBi) of Tx beam `b` (1-based) towards cell-frame angles.
pub fn tx_beam_gain(grid: &TxBeamGrid, b: usize, az_deg: f64, zen_deg: f64) -> Result<f64> {
    if b == 0 || b > grid.len() {
        return Err(Error::UnknownIndex { kind: "tx beam", index: b });
    }
    Ok(grid.gain_idx(b - 1, az_deg, zen_deg))
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rot_z(deg: f64) -> Mat3 {
        let (s, c) = (deg * DEG).sin_cos();
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn rot_y(deg: f64) -> Mat3 {
        let (s, c) = (deg * DEG).sin_cos();
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_x(deg: f64) -> Mat3 {
        let (s, c) = (deg * DEG).sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    /// Boresight azimuth in the UE frame.
    pub azimuth_deg: f64,
    /// Boresight zenith in the UE frame (90 = in the handset plane).
    pub zenith_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSet {
    pub panels: [Panel; NUM_PANELS],
    /// Steering azimuths of the Rx beams in the panel frame.
    pub rx_beam_azimuths_deg: [f64; NUM_RX_BEAMS],
    pub rx_beam_zenith_deg: f64,
    pub elements: u32,
    pub spacing: f64,
    pub element: ElementPattern,
}

impl Default for PanelSet {
    fn default() -> Self {
        let mut rx = [0.0; NUM_RX_BEAMS];
        for (r, a) in rx.iter_mut().enumerate() {
            *a = -45.0 + 15.0 * r as f64;
        }
        PanelSet {
            panels: [
                Panel { azimuth_deg: 90.0, zenith_deg: 90.0 },
                Panel { azimuth_deg: 0.0, zenith_deg: 90.0 },
                Panel { azimuth_deg: -90.0, zenith_deg: 90.0 },
            ],
            rx_beam_azimuths_deg: rx,
            rx_beam_zenith_deg: 90.0,
            elements: 4,
            spacing: 0.5,
            element: ElementPattern::UE,
        }
    }
}

impl PanelSet {
    /// Rotation taking panel-frame vectors to UE-frame vectors.
    pub fn panel_frame(&self, d: usize) -> Mat3 {
        let p = &self.panels[d];
        Mat3::rot_z(p.azimuth_deg).mul(&Mat3::rot_y(p.zenith_deg - 90.0))
    }

    /// Per-panel matrices mapping a global direction into each panel frame
    /// for a UE with the given orientation.
    pub fn global_to_panel(&self, orientation: &Mat3) -> [Mat3; NUM_PANELS] {
        std::array::from_fn(|d| orientation.mul(&self.panel_frame(d)).transpose())
    }

    /// Element plus array gain (no mask) of Rx beam `r` (0-based) for a
    /// direction given by panel-frame angles.
    pub fn beam_gain_local(&self, r: usize, az_deg: f64, zen_deg: f64) -> f64 {
        let steer_az = self.rx_beam_azimuths_deg[r];
        let steer_zen = self.rx_beam_zenith_deg;
        let u = unit_from_angles(az_deg, zen_deg);
        let s = unit_from_angles(steer_az, steer_zen);
        let psi = 2.0 * PI * self.spacing * (u[1] - s[1]);
        let af = line_array_factor(self.elements, psi);
        self.element.gain_db(az_deg - steer_az, zen_deg - steer_zen + 90.0) + 10.0 * af.max(1e-30).log10()
    }
}

/// Panel set with precomputed steering for repeated evaluation.
#[derive(Debug, Clone)]
pub struct RxGainEval {
    panels: PanelSet,
    steer_y: [f64; NUM_RX_BEAMS],
}

impl RxGainEval {
    pub fn new(panels: &PanelSet) -> RxGainEval {
        RxGainEval {
            panels: panels.clone(),
            steer_y: std::array::from_fn(|r| unit_from_angles(panels.rx_beam_azimuths_deg[r], panels.rx_beam_zenith_deg)[1]),
        }
    }

    /// Same value as [`PanelSet::beam_gain_local`].
    #[inline]
    pub fn gain_local(&self, r: usize, az_deg: f64, zen_deg: f64, u_local: [f64; 3]) -> f64 {
        let p = &self.panels;
        let steer_az = p.rx_beam_azimuths_deg[r];
        let psi = 2.0 * PI * p.spacing * (u_local[1] - self.steer_y[r]);
        let af = line_array_factor(p.elements, psi);
        p.element.gain_db(az_deg - steer_az, zen_deg - p.rx_beam_zenith_deg + 90.0) + 10.0 * af.max(1e-30).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Grip {
    Free,
    Rhb,
    Dhs,
    Dhg,
}

impl Grip {
    pub const ALL: [Grip; 4] = [Grip::Free, Grip::Rhb, Grip::Dhs, Grip::Dhg];

    pub fn as_str(self) -> &'static str {
        match self {
            Grip::Free => "FREE",
            Grip::Rhb => "RHB",
            Grip::Dhs => "DHS",
            Grip::Dhg => "DHG",
        }
    }
}

impl fmt::Display for Grip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grip {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FREE" => Ok(Grip::Free),
            "RHB" => Ok(Grip::Rhb),
            "DHS" => Ok(Grip::Dhs),
            "DHG" => Ok(Grip::Dhg),
            other => Err(Error::Parse(format!("unknown grip '{other}'"))),
        }
    }
}

/// Handset orientation relative to the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeRotation {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl UeRotation {
    /// UE-frame to global rotation for a UE travelling along `heading_deg`.
    pub fn matrix(&self, heading_deg: f64) -> Mat3 {
        Mat3::rot_z(heading_deg + self.yaw_deg)
            .mul(&Mat3::rot_y(self.pitch_deg))
            .mul(&Mat3::rot_x(self.roll_deg))
    }
}

/// Gain delta table sampled on a regular (azimuth, zenith) grid of a panel
/// frame. Lookups interpolate bilinearly and clamp outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTable {
    pub az_start: f64,
    pub az_step: f64,
    pub n_az: usize,
    pub zen_start: f64,
    pub zen_step: f64,
    pub n_zen: usize,
    /// Row-major over zenith: `values[iz * n_az + ia]`.
    pub values: Vec<f64>,
}

/// Full-sphere grid resolution of generated masks.
pub const MASK_STEP_DEG: f64 = 5.0;

impl MaskTable {
    pub fn full_sphere(f: impl Fn(f64, f64) -> f64) -> MaskTable {
        let n_az = (360.0 / MASK_STEP_DEG) as usize + 1;
        let n_zen = (180.0 / MASK_STEP_DEG) as usize + 1;
        let mut values = Vec::with_capacity(n_az * n_zen);
        for iz in 0..n_zen {
            for ia in 0..n_az {
                values.push(f(-180.0 + ia as f64 * MASK_STEP_DEG, iz as f64 * MASK_STEP_DEG));
            }
        }
        MaskTable {
            az_start: -180.0,
            az_step: MASK_STEP_DEG,
            n_az,
            zen_start: 0.0,
            zen_step: MASK_STEP_DEG,
            n_zen,
            values,
        }
    }

    pub fn zero() -> MaskTable {
        MaskTable::full_sphere(|_, _| 0.0)
    }

    pub fn at(&self, ia: usize, iz: usize) -> f64 {
        self.values[iz * self.n_az + ia]
    }

    fn axis_pos(x: f64, start: f64, step: f64, n: usize) -> (usize, f64) {
        if n == 1 {
            return (0, 0.0);
        }
        let f = ((x - start) / step).clamp(0.0, (n - 1) as f64);
        let i = (f.floor() as usize).min(n - 2);
        (i, f - i as f64)
    }

    pub fn lookup(&self, az_deg: f64, zen_deg: f64) -> f64 {
        let (ia, fa) = Self::axis_pos(az_deg, self.az_start, self.az_step, self.n_az);
        let (iz, fz) = Self::axis_pos(zen_deg, self.zen_start, self.zen_step, self.n_zen);
        let ia1 = (ia + 1).min(self.n_az - 1);
        let iz1 = (iz + 1).min(self.n_zen - 1);
        let v00 = self.at(ia, iz);
        let v10 = self.at(ia1, iz);
        let v01 = self.at(ia, iz1);
        let v11 = self.at(ia1, iz1);
        (v00 * (1.0 - fa) + v10 * fa) * (1.0 - fz) + (v01 * (1.0 - fa) + v11 * fa) * fz
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Raised-cosine angular notch in a panel frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Notch {
    pub depth_db: f64,
    pub center_az_deg: f64,
    pub center_zen_deg: f64,
    /// Angular radius of full attenuation.
    pub flat_deg: f64,
    /// Width of the cosine roll-off beyond `flat_deg`.
    pub rolloff_deg: f64,
}

impl Notch {
    pub fn delta_db(&self, az_deg: f64, zen_deg: f64) -> f64 {
        let u = unit_from_angles(az_deg, zen_deg);
        let c = unit_from_angles(self.center_az_deg, self.center_zen_deg);
        let dot = (u[0] * c[0] + u[1] * c[1] + u[2] * c[2]).clamp(-1.0, 1.0);
        let dist = dot.acos() / DEG;
        let shape = if dist <= self.flat_deg {
            1.0
        } else if dist < self.flat_deg + self.rolloff_deg {
            0.5 * (1.0 + (PI * (dist - self.flat_deg) / self.rolloff_deg).cos())
        } else {
            0.0
        };
        -self.depth_db * shape
    }

    pub fn table(notches: &[Notch]) -> MaskTable {
        MaskTable::full_sphere(|az, zen| notches.iter().map(|n| n.delta_db(az, zen)).sum())
    }
}

/// Attenuation levels used by the bundled grips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockageLevels {
    pub light_db: f64,
    pub moderate_db: f64,
    pub partial_db: f64,
    pub strong_db: f64,
    pub deep_db: f64,
}

impl Default for BlockageLevels {
    fn default() -> Self {
        BlockageLevels {
            light_db: 5.0,
            moderate_db: 10.0,
            partial_db: 15.0,
            strong_db: 20.0,
            deep_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripMask {
    pub grip: Grip,
    pub panels: [MaskTable; NUM_PANELS],
    pub rotation: UeRotation,
}

impl GripMask {
    pub fn free() -> GripMask {
        GripMask {
            grip: Grip::Free,
            panels: std::array::from_fn(|_| MaskTable::zero()),
            rotation: UeRotation::default(),
        }
    }
}

/// Landscape handsets are turned a quarter turn in the hand plane and
/// tilted towards the user.
const LANDSCAPE: UeRotation = UeRotation {
    yaw_deg: 90.0,
    pitch_deg: 0.0,
    roll_deg: 20.0,
};

fn boresight_notch(depth_db: f64, flat_deg: f64, rolloff_deg: f64) -> Notch {
    Notch {
        depth_db,
        center_az_deg: 0.0,
        center_zen_deg: 90.0,
        flat_deg,
        rolloff_deg,
    }
}

/// Parametric notches realising each grip's blockage pattern.
pub fn grip_notches(grip: Grip, levels: &BlockageLevels) -> [Vec<Notch>; NUM_PANELS] {
    let whole = |depth| vec![boresight_notch(depth, 180.0, 0.0)];
    match grip {
        Grip::Free => [vec![], vec![], vec![]],
        // Thumb over P1, fingers near P3, P2 clear.
        Grip::Rhb => [
            vec![boresight_notch(levels.strong_db, 60.0, 50.0)],
            vec![],
            vec![boresight_notch(levels.moderate_db, 45.0, 45.0)],
        ],
        // Fingers and palms cover part of P1/P3; the right thumb grazes P2.
        Grip::Dhs => [
            vec![Notch {
                depth_db: levels.partial_db,
                center_az_deg: 40.0,
                center_zen_deg: 90.0,
                flat_deg: 15.0,
                rolloff_deg: 30.0,
            }],
            vec![boresight_notch(levels.light_db, 20.0, 40.0)],
            vec![Notch {
                depth_db: levels.partial_db,
                center_az_deg: -40.0,
                center_zen_deg: 90.0,
                flat_deg: 15.0,
                rolloff_deg: 30.0,
            }],
        ],
        // Left hand swallows P2 entirely.
        Grip::Dhg => [vec![], whole(levels.deep_db), vec![]],
    }
}

fn grip_rotation(grip: Grip) -> UeRotation {
    match grip {
        Grip::Free | Grip::Rhb => UeRotation::default(),
        Grip::Dhs | Grip::Dhg => LANDSCAPE,
    }
}

pub fn grip_mask(grip: Grip, levels: &BlockageLevels) -> GripMask {
    let notches = grip_notches(grip, levels);
    GripMask {
        grip,
        panels: std::array::from_fn(|d| Notch::table(&notches[d])),
        rotation: grip_rotation(grip),
    }
}

pub fn bundled_grip_masks(levels: &BlockageLevels) -> [GripMask; 4] {
    Grip::ALL.map(|g| grip_mask(g, levels))
}

/// Direction to a panel-frame (azimuth, zenith) pair.
pub fn panel_local_angles(to_panel: &Mat3, dir_global: [f64; 3]) -> (f64, f64) {
    angles_from_unit(to_panel.apply(dir_global))
}

/// Gain (dB) of panel `d`, Rx beam `r` (both 0-based) including the mask,
/// for a global unit direction and a UE orientation matrix.
pub fn rx_gain_dir(panels: &PanelSet, mask: &GripMask, orientation: &Mat3, d: usize, r: usize, dir: [f64; 3]) -> f64 {
    let to_panel = orientation.mul(&panels.panel_frame(d)).transpose();
    let (az, zen) = panel_local_angles(&to_panel, dir);
    panels.beam_gain_local(r, az, zen) + mask.panels[d].lookup(az, zen)
}

/// Gain (dB) of panel `d` and Rx beam `r` (1-based) towards global angles,
/// with the mask's handset rotation applied for a UE heading along +x.
pub fn rx_gain(panels: &PanelSet, mask: &GripMask, d: usize, r: usize, az_deg: f64, zen_deg: f64) -> Result<f64> {
    if d == 0 || d > NUM_PANELS {
        return Err(Error::UnknownIndex { kind: "panel", index: d });
    }
    if r == 0 || r > NUM_RX_BEAMS {
        return Err(Error::UnknownIndex { kind: "rx beam", index: r });
    }
    let orientation = mask.rotation.matrix(0.0);
    Ok(rx_gain_dir(panels, mask, &orientation, d - 1, r - 1, unit_from_angles(az_deg, zen_deg)))
}

pub fn direction(az_deg: f64, zen_deg: f64) -> [f64; 3] {
    unit_from_angles(az_deg, zen_deg)
}

pub const MASK_CSV_HEADER: &str = "panel,az_deg,el_deg,delta_db";

pub fn mask_to_csv(mask: &GripMask) -> String {
    let mut out = format!("{MASK_CSV_HEADER}\n");
    for (d, t) in mask.panels.iter().enumerate() {
        for iz in 0..t.n_zen {
            for ia in 0..t.n_az {
                let az = t.az_start + ia as f64 * t.az_step;
                let zen = t.zen_start + iz as f64 * t.zen_step;
                let _ = writeln!(out, "{},{},{},{:.6}", d + 1, az, zen, t.at(ia, iz));
            }
        }
    }
    out
}

fn regular_axis(mut vals: Vec<f64>, what: &str, panel: usize) -> Result<(f64, f64, usize)> {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup();
    if vals.len() == 1 {
        return Ok((vals[0], 1.0, 1));
    }
    let step = vals[1] - vals[0];
    for w in vals.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-6 {
            return Err(Error::Table(format!("panel {panel}: {what} grid is not regular")));
        }
    }
    Ok((vals[0], step, vals.len()))
}

/// Parses a mask CSV (`panel,az_deg,el_deg,delta_db`); every panel must
/// provide a complete regular grid.
pub fn mask_from_csv(grip: Grip, rotation: UeRotation, text: &str) -> Result<GripMask> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Table("empty mask file".into()))?;
    if header.trim() != MASK_CSV_HEADER {
        return Err(Error::Table(format!("expected header '{MASK_CSV_HEADER}', got '{}'", header.trim())));
    }
    let mut rows: [Vec<(f64, f64, f64)>; NUM_PANELS] = Default::default();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::Table(format!("line {}: expected 4 fields", n + 2)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Table(format!("line {}: {e}", n + 2)));
        let panel: usize = f[0]
            .parse()
            .map_err(|e| Error::Table(format!("line {}: {e}", n + 2)))?;
        if panel == 0 || panel > NUM_PANELS {
            return Err(Error::Table(format!("line {}: panel {panel} out of range", n + 2)));
        }
        let delta = num(f[3])?;
        if !delta.is_finite() {
            return Err(Error::Table(format!("line {}: non-finite delta", n + 2)));
        }
        rows[panel - 1].push((num(f[1])?, num(f[2])?, delta));
    }
    let mut tables = Vec::with_capacity(NUM_PANELS);
    for (d, rows) in rows.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::Table(format!("panel {} has no entries", d + 1)));
        }
        let (az_start, az_step, n_az) = regular_axis(rows.iter().map(|r| r.0).collect(), "azimuth", d + 1)?;
        let (zen_start, zen_step, n_zen) = regular_axis(rows.iter().map(|r| r.1).collect(), "elevation", d + 1)?;
        let mut values = vec![f64::NAN; n_az * n_zen];
        for &(az, zen, v) in rows {
            let ia = ((az - az_start) / az_step).round() as usize;
            let iz = ((zen - zen_start) / zen_step).round() as usize;
            let slot = &mut values[iz * n_az + ia];
            if !slot.is_nan() {
                return Err(Error::Table(format!("panel {}: duplicate entry at ({az}, {zen})", d + 1)));
            }
            *slot = v;
        }
        if values.iter().any(|v| v.is_nan()) || rows.len() != n_az * n_zen {
            return Err(Error::Table(format!("panel {}: incomplete grid", d + 1)));
        }
        tables.push(MaskTable {
            az_start,
            az_step,
            n_az,
            zen_start,
            zen_step,
            n_zen,
            values,
        });
    }
    let panels: [MaskTable; NUM_PANELS] = tables.try_into().expect("three panels");
    Ok(GripMask { grip, panels, rotation })
}

/// Tx beam pattern cut on a 1° grid: `beam,az_deg,el_deg,gain_db`.
pub fn tx_pattern_csv(grid: &TxBeamGrid, zenith_deg: f64) -> String {
    let mut out = String::from("beam,az_deg,el_deg,gain_db\n");
    for b in 0..grid.len() {
        for az in -180..=180 {
            let g = grid.gain_idx(b, az as f64, zenith_deg);
            let _ = writeln!(out, "{},{},{},{:.4}", b + 1, az, zenith_deg, g);
        }
    }
    out
}

/// Rx beam pattern cut in the handset plane including the grip mask:
/// `panel,rxbeam,az_deg,el_deg,gain_db` (angles in the UE frame).
pub fn rx_pattern_csv(panels: &PanelSet, mask: &GripMask, zenith_deg: f64) -> String {
    let mut out = String::from("panel,rxbeam,az_deg,el_deg,gain_db\n");
    for d in 0..NUM_PANELS {
        for r in 0..NUM_RX_BEAMS {
            for az in -180..=180 {
                let dir = unit_from_angles(az as f64, zenith_deg);
                let g = rx_gain_dir(panels, mask, &Mat3::IDENTITY, d, r, dir);
                let _ = writeln!(out, "{},{},{},{},{:.4}", d + 1, r + 1, az, zenith_deg, g);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct phasor sum over the rows × cols elements, in dB relative to one element.
    fn brute_array_factor_db(beam: &TxBeam, az: f64, zen: f64) -> f64 {
        let u = direction(az, zen);
        let s = direction(beam.azimuth_deg, beam.zenith_deg);
        let (mut re, mut im) = (0.0, 0.0);
        for m in 0..beam.rows {
            for n in 0..beam.cols {
                let ph = 2.0 * PI
                    * (m as f64 * beam.v_spacing * (u[2] - s[2]) + n as f64 * beam.h_spacing * (u[1] - s[1]));
                re += ph.cos();
                im += ph.sin();
            }
        }
        10.0 * ((re * re + im * im) / (beam.rows * beam.cols) as f64).log10()
    }

    #[test]
    fn tx_peak_is_at_steering_direction() {
        let grid = TxBeamGrid::default();
        for b in 1..=12 {
            let beam = grid.beams[b - 1];
            let peak = tx_beam_gain(&grid, b, beam.azimuth_deg, beam.zenith_deg).unwrap();
            for az in -180..=180 {
                for zen in 0..=180 {
                    let g = tx_beam_gain(&grid, b, az as f64, zen as f64).unwrap();
                    assert!(g <= peak + 1e-9, "beam {b}: {g} at ({az},{zen}) > peak {peak}");
                }
            }
        }
    }

    #[test]
    fn tx_array_gain_matches_numerical_sum() {
        let grid = TxBeamGrid::default();
        let b1 = grid.beams[0];
        let at_steer = grid.gain_idx(0, b1.azimuth_deg, b1.zenith_deg) - grid.element.g_max_dbi;
        let expected = brute_array_factor_db(&b1, b1.azimuth_deg, b1.zenith_deg);
        assert!((expected - 21.072).abs() < 1e-3);
        assert!((at_steer - expected).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let b = rng.random_range(0..12);
            let beam = grid.beams[b];
            let (az, zen) = (rng.random_range(-90.0..90.0), rng.random_range(30.0..150.0));
            let brute = brute_array_factor_db(&beam, az, zen);
            if brute < -40.0 {
                continue;
            }
            let elem = grid.element.gain_db(az - beam.azimuth_deg, zen - beam.zenith_deg + 90.0);
            assert!((grid.gain_idx(b, az, zen) - elem - brute).abs() < 1e-6);
        }
    }

    #[test]
    fn outer_beams_narrower_and_stronger_than_inner() {
        let grid = TxBeamGrid::default();
        let peak = |b: usize| {
            let beam = grid.beams[b];
            grid.gain_idx(b, beam.azimuth_deg, beam.zenith_deg)
        };
        for o in 0..8 {
            for i in 8..12 {
                assert!(peak(o) > peak(i));
                assert!(grid.azimuth_hpbw_deg(o) < grid.azimuth_hpbw_deg(i));
            }
        }
    }

    #[test]
    fn unknown_tx_beam_is_an_error() {
        let grid = TxBeamGrid::default();
        assert!(tx_beam_gain(&grid, 0, 0.0, 90.0).is_err());
        assert!(tx_beam_gain(&grid, 13, 0.0, 90.0).is_err());
    }

    #[test]
    fn rx_boresight_array_gain_is_four_elements() {
        let panels = PanelSet::default();
        let free = GripMask::free();
        for d in 0..NUM_PANELS {
            for r in 0..NUM_RX_BEAMS {
                // Steering direction of (d, r) expressed in the global frame.
                let local = direction(panels.rx_beam_azimuths_deg[r], panels.rx_beam_zenith_deg);
                let global = panels.panel_frame(d).apply(local);
                let g = rx_gain_dir(&panels, &free, &Mat3::IDENTITY, d, r, global);
                assert!((g - panels.element.g_max_dbi - 10.0 * 4f64.log10()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn free_mask_equals_unmasked_gain() {
        let panels = PanelSet::default();
        let free = GripMask::free();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let az = rng.random_range(-180.0..180.0);
            let zen = rng.random_range(0.0..180.0);
            let d = rng.random_range(0..NUM_PANELS);
            let r = rng.random_range(0..NUM_RX_BEAMS);
            let dir = direction(az, zen);
            let to_panel = panels.panel_frame(d).transpose();
            let (la, lz) = panel_local_angles(&to_panel, dir);
            assert_eq!(
                rx_gain_dir(&panels, &free, &Mat3::IDENTITY, d, r, dir),
                panels.beam_gain_local(r, la, lz)
            );
        }
    }

    #[test]
    fn dhg_panel2_is_deeply_blocked_everywhere() {
        let panels = PanelSet::default();
        let levels = BlockageLevels::default();
        let free = GripMask::free();
        let dhg = grip_mask(Grip::Dhg, &levels);
        assert!(dhg.panels[1].max() <= -30.0);
        assert_eq!(dhg.panels[0].min(), 0.0);
        assert_eq!(dhg.panels[2].max(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let (az, zen) = (rng.random_range(-180.0..180.0), rng.random_range(0.0..180.0));
            let r = rng.random_range(1..=NUM_RX_BEAMS);
            let g_free = {
                let mut m = GripMask::free();
                m.rotation = dhg.rotation;
                rx_gain(&panels, &m, 2, r, az, zen).unwrap()
            };
            let g = rx_gain(&panels, &dhg, 2, r, az, zen).unwrap();
            assert!(g <= g_free - 30.0 + 1e-9);
            let _ = &free;
        }
    }

    #[test]
    fn rhb_mean_attenuation_ordering() {
        let m = grip_mask(Grip::Rhb, &BlockageLevels::default());
        let att = |d: usize| -m.panels[d].mean();
        assert!(att(0) > att(2));
        assert!(att(2) > att(1));
        assert_eq!(att(1), 0.0);
    }

    #[test]
    fn dhs_levels_and_free_is_zero() {
        let levels = BlockageLevels::default();
        let dhs = grip_mask(Grip::Dhs, &levels);
        assert!((dhs.panels[0].min() + levels.partial_db).abs() < 1e-9);
        assert!((dhs.panels[1].min() + levels.light_db).abs() < 1e-9);
        assert!((dhs.panels[2].min() + levels.partial_db).abs() < 1e-9);
        let free = grip_mask(Grip::Free, &levels);
        assert!(free.panels.iter().all(|t| t.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn bundled_masks_only_attenuate() {
        let panels = PanelSet::default();
        let masks = bundled_grip_masks(&BlockageLevels::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in &masks {
            assert!(m.panels.iter().all(|t| t.values.iter().all(|v| v.is_finite() && *v <= 0.0)));
            let mut unmasked = GripMask::free();
            unmasked.rotation = m.rotation;
            for _ in 0..500 {
                let (az, zen) = (rng.random_range(-180.0..180.0), rng.random_range(0.0..180.0));
                let d = rng.random_range(1..=3);
                let r = rng.random_range(1..=7);
                assert!(rx_gain(&panels, m, d, r, az, zen).unwrap() <= rx_gain(&panels, &unmasked, d, r, az, zen).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn rx_gain_is_rotation_reciprocal() {
        let panels = PanelSet::default();
        let mask = grip_mask(Grip::Dhs, &BlockageLevels::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let heading = rng.random_range(0.0..360.0);
            let orientation = mask.rotation.matrix(heading);
            let q = Mat3::rot_z(rng.random_range(-180.0..180.0))
                .mul(&Mat3::rot_y(rng.random_range(-90.0..90.0)))
                .mul(&Mat3::rot_x(rng.random_range(-180.0..180.0)));
            let dir = direction(rng.random_range(-180.0..180.0), rng.random_range(0.0..180.0));
            let d = rng.random_range(0..3);
            let r = rng.random_range(0..7);
            let g1 = rx_gain_dir(&panels, &mask, &orientation, d, r, dir);
            let g2 = rx_gain_dir(&panels, &mask, &q.mul(&orientation), d, r, q.apply(dir));
            assert!((g1 - g2).abs() < 1e-6, "{g1} vs {g2}");
        }
    }

    #[test]
    fn mask_lookup_clamps_outside_grid() {
        let t = MaskTable {
            az_start: -10.0,
            az_step: 10.0,
            n_az: 3,
            zen_start: 80.0,
            zen_step: 10.0,
            n_zen: 2,
            values: vec![-1.0, -2.0, -3.0, -4.0, -5.0, -6.0],
        };
        assert_eq!(t.lookup(-90.0, 0.0), -1.0);
        assert_eq!(t.lookup(90.0, 180.0), -6.0);
        assert!((t.lookup(-5.0, 85.0) - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn mask_csv_round_trip_and_validation() {
        let m = grip_mask(Grip::Rhb, &BlockageLevels::default());
        let csv = mask_to_csv(&m);
        let back = mask_from_csv(Grip::Rhb, m.rotation, &csv).unwrap();
        for d in 0..3 {
            assert_eq!(back.panels[d].n_az, m.panels[d].n_az);
            for (a, b) in back.panels[d].values.iter().zip(&m.panels[d].values) {
                assert!((a - b).abs() < 1e-6);
            }
        }
        // Drop one row: the grid becomes incomplete.
        let truncated: String = csv.lines().enumerate().filter(|(i, _)| *i != 5).map(|(_, l)| format!("{l}\n")).collect();
        assert!(mask_from_csv(Grip::Rhb, m.rotation, &truncated).is_err());
        assert!(mask_from_csv(Grip::Rhb, m.rotation, "panel,az,el,delta\n").is_err());
    }

    #[test]
    fn composite_gain_is_additive_in_db() {
        let grid = TxBeamGrid::default();
        let panels = PanelSet::default();
        let mask = grip_mask(Grip::Rhb, &BlockageLevels::default());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let tx = grid.gain_idx(rng.random_range(0..12), rng.random_range(-90.0..90.0), rng.random_range(80.0..110.0));
            let rx = rx_gain(&panels, &mask, 1, 4, rng.random_range(-180.0..180.0), 90.0).unwrap();
            let linear = 10f64.powf(tx / 10.0) * 10f64.powf(rx / 10.0);
            assert!((10.0 * linear.log10() - (tx + rx)).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluators_match_reference_gains() {
        let grid = TxBeamGrid::default();
        let tx = TxGainEval::new(&grid);
        let panels = PanelSet::default();
        let rx = RxGainEval::new(&panels);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let (az, zen) = (rng.random_range(-180.0..180.0), rng.random_range(0.0..180.0));
            let u = direction(az, zen);
            let b = rng.random_range(0..12);
            assert!((tx.gain(b, az, zen, u) - grid.gain_idx(b, az, zen)).abs() < 1e-9);
            let r = rng.random_range(0..7);
            assert!((rx.gain_local(r, az, zen, u) - panels.beam_gain_local(r, az, zen)).abs() < 1e-12);
        }
    }
}
