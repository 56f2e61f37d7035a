//! Propagation: 3GPP UMi street-canyon path loss with a soft LoS blend,
//! spatially correlated shadowing and sum-of-sinusoids fast fading.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NetworkLayout, Vec2};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Doppler frequency (Hz) for a speed in m/s at a carrier in GHz.
pub fn doppler_hz(speed_mps: f64, fc_ghz: f64) -> f64 {
    speed_mps * fc_ghz * 1e9 / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub fc_ghz: f64,
    pub h_bs_m: f64,
    pub h_ut_m: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            fc_ghz: 28.0,
            h_bs_m: 10.0,
            h_ut_m: 1.5,
        }
    }
}

impl PathLossParams {
    /// Breakpoint distance with 1 m effective environment height.
    pub fn breakpoint_m(&self) -> f64 {
        4.0 * (self.h_bs_m - 1.0) * (self.h_ut_m - 1.0) * self.fc_ghz * 1e9 / SPEED_OF_LIGHT
    }

    pub fn los_db(&self, d3d: f64) -> f64 {
        let fc = self.fc_ghz.log10();
        let bp = self.breakpoint_m();
        if d3d <= bp {
            32.4 + 21.0 * d3d.log10() + 20.0 * fc
        } else {
            let dh = self.h_bs_m - self.h_ut_m;
            32.4 + 40.0 * d3d.log10() + 20.0 * fc - 9.5 * (bp * bp + dh * dh).log10()
        }
    }

    pub fn nlos_db(&self, d3d: f64) -> f64 {
        let pl = 35.3 * d3d.log10() + 22.4 + 21.3 * self.fc_ghz.log10() - 0.3 * (self.h_ut_m - 1.5);
        pl.max(self.los_db(d3d))
    }

    /// Soft-LoS blend `w·PL_LoS + (1−w)·PL_NLoS`.
    pub fn blended_db(&self, d3d: f64, w_los: f64) -> f64 {
        w_los * self.los_db(d3d) + (1.0 - w_los) * self.nlos_db(d3d)
    }
}

/// Path loss (dB) at `d3d` metres, carrier `fc_ghz`, LoS weight `w_los`,
/// with default antenna heights.
pub fn path_loss(d3d: f64, fc_ghz: f64, w_los: f64) -> Result<f64> {
    if !(d3d > 0.0) || !d3d.is_finite() {
        return Err(Error::Domain(format!("path loss needs d3d > 0, got {d3d}")));
    }
    if !(0.0..=1.0).contains(&w_los) {
        return Err(Error::Domain(format!("LoS weight {w_los} outside [0, 1]")));
    }
    let p = PathLossParams {
        fc_ghz,
        ..PathLossParams::default()
    };
    Ok(p.blended_db(d3d, w_los))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoftLosParams {
    /// Distance below which LoS is certain.
    pub d1_m: f64,
    pub d2_m: f64,
    /// Length of the backward averaging window.
    pub window_m: f64,
}

impl Default for SoftLosParams {
    fn default() -> Self {
        SoftLosParams {
            d1_m: 18.0,
            d2_m: 36.0,
            window_m: 20.0,
        }
    }
}

impl SoftLosParams {
    /// UMi LoS probability.
    pub fn los_probability(&self, d2d: f64) -> f64 {
        if d2d <= self.d1_m {
            1.0
        } else {
            self.d1_m / d2d + (-d2d / self.d2_m).exp() * (1.0 - self.d1_m / d2d)
        }
    }
}

/// Average of the LoS probability over the `window_m` metres ending at
/// `d2d` (distances below zero count as LoS).
pub fn soft_los_weight(d2d: f64, params: &SoftLosParams) -> f64 {
    let w = params.window_m;
    if d2d <= params.d1_m || w <= 0.0 {
        return params.los_probability(d2d.max(0.0));
    }
    let lo = d2d - w;
    let certain = (params.d1_m - lo).clamp(0.0, w);
    let a = lo.max(params.d1_m);
    // Composite Simpson over the probabilistic part of the window.
    let n = 200;
    let h = (d2d - a) / n as f64;
    let mut s = params.los_probability(a) + params.los_probability(d2d);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * params.los_probability(x);
    }
    (certain + s * h / 3.0) / w
}

/// Tabulated soft-LoS weight for the inner loop.
#[derive(Debug, Clone)]
pub struct SoftLos {
    pub params: SoftLosParams,
    step: f64,
    table: Vec<f64>,
}

impl SoftLos {
    const STEP_M: f64 = 0.25;
    const MAX_M: f64 = 2000.0;

    pub fn new(params: SoftLosParams) -> SoftLos {
        let n = (Self::MAX_M / Self::STEP_M) as usize + 1;
        let table = (0..n).map(|i| soft_los_weight(i as f64 * Self::STEP_M, &params)).collect();
        SoftLos {
            params,
            step: Self::STEP_M,
            table,
        }
    }

    pub fn weight(&self, d2d: f64) -> f64 {
        if d2d <= self.params.d1_m {
            return 1.0;
        }
        let f = d2d / self.step;
        let i = f as usize;
        if i + 1 >= self.table.len() {
            return soft_los_weight(d2d, &self.params);
        }
        let t = f - i as f64;
        self.table[i] * (1.0 - t) + self.table[i + 1] * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowParams {
    pub sigma_db: f64,
    pub decorrelation_m: f64,
}

/// Number of plane waves per shadow field.
pub const SHADOW_WAVES: usize = 64;

/// Zero-mean Gaussian-like field with exponential spatial correlation,
/// built as a sum of plane waves. Wave vectors lie on the reciprocal of the
/// wrap-around lattice, so the field is identical in every replica.
#[derive(Debug, Clone)]
pub struct ShadowField {
    pub params: ShadowParams,
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub phase: Vec<f64>,
    amplitude: f64,
}

impl ShadowField {
    pub fn new<R: Rng + ?Sized>(params: ShadowParams, layout: &NetworkLayout, rng: &mut R) -> ShadowField {
        let [t1, t2] = layout.lattice_basis();
        // Reciprocal basis: g_i · t_j = 2π δ_ij.
        let det = t1.x * t2.y - t1.y * t2.x;
        let g1 = Vec2::new(t2.y, -t2.x) * (2.0 * PI / det);
        let g2 = Vec2::new(-t1.y, t1.x) * (2.0 * PI / det);
        let gdet = g1.x * g2.y - g1.y * g2.x;

        let l = params.decorrelation_m;
        let mut kx = Vec::with_capacity(SHADOW_WAVES);
        let mut ky = Vec::with_capacity(SHADOW_WAVES);
        let mut phase = Vec::with_capacity(SHADOW_WAVES);
        let snap = |kv: Vec2| {
            let a = (kv.x * g2.y - kv.y * g2.x) / gdet;
            let b = (g1.x * kv.y - g1.y * kv.x) / gdet;
            let (mut ia, mut ib) = (a.round() as i64, b.round() as i64);
            if ia == 0 && ib == 0 {
                if a.abs() >= b.abs() {
                    ia = if a < 0.0 { -1 } else { 1 };
                } else {
                    ib = if b < 0.0 { -1 } else { 1 };
                }
            }
            (ia, ib)
        };
        // Waves sharing a lattice point (or its negative) would add coherently.
        let canonical = |(a, b): (i64, i64)| if (a, b) < (0, 0) { (-a, -b) } else { (a, b) };
        let mut used = std::collections::HashSet::new();
        for n in 0..SHADOW_WAVES {
            // Stratified radial quantile of the 2-D exponential-covariance spectrum.
            let u: f64 = (n as f64 + rng.random::<f64>()) / SHADOW_WAVES as f64;
            let k = ((1.0 - u).powi(-2) - 1.0).sqrt() / l;
            let mut idx = snap(Vec2::from_polar(k, rng.random_range(0.0..2.0 * PI)));
            let mut tries = 0;
            while used.contains(&canonical(idx)) {
                tries += 1;
                idx = snap(Vec2::from_polar(k, rng.random_range(0.0..2.0 * PI)));
                if tries > 32 {
                    idx.0 += tries - 32;
                }
            }
            used.insert(canonical(idx));
            let snapped = g1 * idx.0 as f64 + g2 * idx.1 as f64;
            kx.push(snapped.x);
            ky.push(snapped.y);
            phase.push(rng.random_range(0.0..2.0 * PI));
        }
        ShadowField {
            params,
            kx,
            ky,
            phase,
            amplitude: params.sigma_db * (2.0 / SHADOW_WAVES as f64).sqrt(),
        }
    }

    pub fn value(&self, p: Vec2) -> f64 {
        let mut s = 0.0;
        for n in 0..self.kx.len() {
            s += (self.kx[n] * p.x + self.ky[n] * p.y + self.phase[n]).cos();
        }
        self.amplitude * s
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

pub fn shadow_db(field: &ShadowField, p: Vec2) -> f64 {
    field.value(p)
}

/// Shadow fields of one cell; the LoS and NLoS components are blended with
/// the soft-LoS weight.
#[derive(Debug, Clone)]
pub struct CellShadow {
    pub los: ShadowField,
    pub nlos: ShadowField,
}

impl CellShadow {
    pub fn value(&self, p: Vec2, w_los: f64) -> f64 {
        w_los * self.los.value(p) + (1.0 - w_los) * self.nlos.value(p)
    }
}

/// Number of sinusoids per fading process.
pub const FADING_SINUSOIDS: usize = 32;
/// Fractional angle offset keeping all Doppler frequencies distinct.
const ARRIVAL_OFFSET: f64 = 0.25;

/// Doppler frequencies (Hz) of the sinusoids for maximum Doppler `fd`.
pub fn jakes_frequencies(fd: f64) -> [f64; FADING_SINUSOIDS] {
    std::array::from_fn(|n| {
        fd * (2.0 * PI * (n as f64 + ARRIVAL_OFFSET) / FADING_SINUSOIDS as f64).cos()
    })
}

/// Power floor guarding the dB conversion of a deep fade.
pub const FADING_FLOOR: f64 = 1e-12;

/// Single-link Rayleigh fading process.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    pub doppler_hz: f64,
    freqs: [f64; FADING_SINUSOIDS],
    phases: [f64; FADING_SINUSOIDS],
}

impl FadingProcess {
    pub fn new<R: Rng + ?Sized>(doppler_hz: f64, rng: &mut R) -> FadingProcess {
        FadingProcess {
            doppler_hz,
            freqs: jakes_frequencies(doppler_hz),
            phases: std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI)),
        }
    }

    /// Complex gain with unit mean power.
    pub fn gain(&self, t: f64) -> (f64, f64) {
        let (mut re, mut im) = (0.0, 0.0);
        for n in 0..FADING_SINUSOIDS {
            let (s, c) = (2.0 * PI * self.freqs[n] * t + self.phases[n]).sin_cos();
            re += c;
            im += s;
        }
        let norm = 1.0 / (FADING_SINUSOIDS as f64).sqrt();
        (re * norm, im * norm)
    }

    pub fn power(&self, t: f64) -> f64 {
        let (re, im) = self.gain(t);
        (re * re + im * im).max(FADING_FLOOR)
    }
}

pub fn fading_db(proc_: &FadingProcess, t: f64) -> f64 {
    10.0 * proc_.power(t).log10()
}

/// Complex phasors of the fading sinusoids, split into real and imaginary
/// parts.
pub type Phasors = ([f32; FADING_SINUSOIDS], [f32; FADING_SINUSOIDS]);

/// Fast fading for all links of one UE. The Doppler basis e^{jω_n t} is
/// shared; each link's phase set is the sum of a per-(cell, beam) and a
/// per-(cell, panel, rx beam) random phase, which keeps links mutually
/// uncorrelated at a fraction of the storage of independent phase sets.
#[derive(Debug, Clone)]
pub struct FadingBank {
    freqs: [f64; FADING_SINUSOIDS],
    /// [cell][beam] unit phasors.
    tx: Vec<Phasors>,
    /// [cell][n][link] unit phasors, links padded to `stride`.
    rx_re: Vec<f32>,
    rx_im: Vec<f32>,
    beams: usize,
    rx_links: usize,
    stride: usize,
}

impl FadingBank {
    pub fn new<R: Rng + ?Sized>(doppler_hz: f64, cells: usize, beams: usize, rx_links: usize, rng: &mut R) -> FadingBank {
        let mut phasor = || {
            let (s, c) = rng.random_range(0.0..2.0 * PI).sin_cos();
            (c as f32, s as f32)
        };
        let mut tx = Vec::with_capacity(cells * beams);
        for _ in 0..cells * beams {
            let mut p = ([0f32; FADING_SINUSOIDS], [0f32; FADING_SINUSOIDS]);
            for n in 0..FADING_SINUSOIDS {
                (p.0[n], p.1[n]) = phasor();
            }
            tx.push(p);
        }
        let stride = rx_links.div_ceil(8) * 8;
        let mut rx_re = vec![0f32; cells * FADING_SINUSOIDS * stride];
        let mut rx_im = rx_re.clone();
        for c in 0..cells {
            for k in 0..rx_links {
                for n in 0..FADING_SINUSOIDS {
                    let i = (c * FADING_SINUSOIDS + n) * stride + k;
                    (rx_re[i], rx_im[i]) = phasor();
                }
            }
        }
        FadingBank {
            freqs: jakes_frequencies(doppler_hz),
            tx,
            rx_re,
            rx_im,
            beams,
            rx_links,
            stride,
        }
    }

    /// Doppler basis at time `t` (seconds), pre-scaled for unit power.
    pub fn basis(&self, t: f64) -> Phasors {
        let norm = 1.0 / (FADING_SINUSOIDS as f64).sqrt();
        let mut re = [0f32; FADING_SINUSOIDS];
        let mut im = [0f32; FADING_SINUSOIDS];
        for n in 0..FADING_SINUSOIDS {
            let (s, c) = (2.0 * PI * self.freqs[n] * t).sin_cos();
            re[n] = (c * norm) as f32;
            im[n] = (s * norm) as f32;
        }
        (re, im)
    }

    /// Basis rotated by the (cell, beam) phasors.
    pub fn tx_phasor(&self, basis: &Phasors, cell: usize, beam: usize) -> Phasors {
        let (are, aim) = &self.tx[cell * self.beams + beam];
        let mut re = [0f32; FADING_SINUSOIDS];
        let mut im = [0f32; FADING_SINUSOIDS];
        for n in 0..FADING_SINUSOIDS {
            re[n] = basis.0[n] * are[n] - basis.1[n] * aim[n];
            im[n] = basis.0[n] * aim[n] + basis.1[n] * are[n];
        }
        (re, im)
    }

    /// Linear fading power of link (cell, beam, rx link) given its tx phasor.
    pub fn power_with(&self, tx: &Phasors, cell: usize, rx_link: usize) -> f64 {
        let base = cell * FADING_SINUSOIDS * self.stride + rx_link;
        let (mut re, mut im) = (0f32, 0f32);
        for n in 0..FADING_SINUSOIDS {
            let (cr, ci) = (self.rx_re[base + n * self.stride], self.rx_im[base + n * self.stride]);
            re += tx.0[n] * cr - tx.1[n] * ci;
            im += tx.0[n] * ci + tx.1[n] * cr;
        }
        ((re * re + im * im) as f64).max(FADING_FLOOR)
    }

    /// Fading powers of every rx link of one (cell, beam); bit-identical to
    /// [`FadingBank::power_with`] per link.
    pub fn powers_all(&self, tx: &Phasors, cell: usize, out: &mut [f64]) {
        const W: usize = 8;
        let base = cell * FADING_SINUSOIDS * self.stride;
        for k0 in (0..self.rx_links).step_by(W) {
            let (mut re, mut im) = ([0f32; W], [0f32; W]);
            for n in 0..FADING_SINUSOIDS {
                let o = base + n * self.stride + k0;
                let cr: &[f32; W] = self.rx_re[o..o + W].try_into().expect("padded stride");
                let ci: &[f32; W] = self.rx_im[o..o + W].try_into().expect("padded stride");
                let (tr, ti) = (tx.0[n], tx.1[n]);
                for l in 0..W {
                    re[l] += tr * cr[l] - ti * ci[l];
                    im[l] += tr * ci[l] + ti * cr[l];
                }
            }
            for l in 0..W.min(self.rx_links - k0) {
                out[k0 + l] = ((re[l] * re[l] + im[l] * im[l]) as f64).max(FADING_FLOOR);
            }
        }
    }

    pub fn power(&self, t: f64, cell: usize, beam: usize, rx_link: usize) -> f64 {
        let basis = self.basis(t);
        let tx = self.tx_phasor(&basis, cell, beam);
        self.power_with(&tx, cell, rx_link)
    }

    /// Complex gain of one link; its squared magnitude is the link power.
    pub fn gain(&self, t: f64, cell: usize, beam: usize, rx_link: usize) -> (f64, f64) {
        let tx = self.tx_phasor(&self.basis(t), cell, beam);
        let base = cell * FADING_SINUSOIDS * self.stride + rx_link;
        let (mut re, mut im) = (0f64, 0f64);
        for n in 0..FADING_SINUSOIDS {
            let (cr, ci) = (self.rx_re[base + n * self.stride] as f64, self.rx_im[base + n * self.stride] as f64);
            re += tx.0[n] as f64 * cr - tx.1[n] as f64 * ci;
            im += tx.0[n] as f64 * ci + tx.1[n] as f64 * cr;
        }
        (re, im)
    }
}
