//! RSRP assembly, L1/L3 filtering and the Monte-Carlo SINR estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn db_to_lin(db: f64) -> f64 {
    (db * (std::f64::consts::LN_10 / 10.0)).exp()
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Link budget in dBm. The fading term is given in dB.
pub fn raw_rsrp_dbm(tx_power_dbm: f64, tx_gain_db: f64, path_loss_db: f64, shadow_db: f64, fading_db: f64, rx_gain_db: f64) -> f64 {
    tx_power_dbm + tx_gain_db - path_loss_db - shadow_db + fading_db + rx_gain_db
}

/// Linear-power average of the samples, returned in dB.
pub fn l1_filter(window: &[f64]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::Domain("L1 filter window is empty".into()));
    }
    let mean = window.iter().map(|&x| db_to_lin(x)).sum::<f64>() / window.len() as f64;
    Ok(lin_to_db(mean))
}

pub fn l3_coefficient(k: f64) -> f64 {
    0.5f64.powf(k / 4.0)
}

/// One step of the L3 recursion in the dB domain.
pub fn l3_update(prev: f64, meas: f64, k: f64) -> f64 {
    let a = l3_coefficient(k);
    (1.0 - a) * prev + a * meas
}

/// Tensor of per-link values indexed by (cell, Tx beam, panel, Rx beam).
#[derive(Debug, Clone, PartialEq)]
pub struct RsrpTensor {
    pub cells: usize,
    pub beams: usize,
    pub panels: usize,
    pub rx_beams: usize,
    pub values: Vec<f64>,
}

impl RsrpTensor {
    pub fn new(cells: usize, beams: usize, panels: usize, rx_beams: usize, fill: f64) -> RsrpTensor {
        RsrpTensor {
            cells,
            beams,
            panels,
            rx_beams,
            values: vec![fill; cells * beams * panels * rx_beams],
        }
    }

    #[inline]
    pub fn index(&self, c: usize, b: usize, d: usize, r: usize) -> usize {
        ((c * self.beams + b) * self.panels + d) * self.rx_beams + r
    }

    #[inline]
    pub fn get(&self, c: usize, b: usize, d: usize, r: usize) -> f64 {
        self.values[self.index(c, b, d, r)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, b: usize, d: usize, r: usize, v: f64) {
        let i = self.index(c, b, d, r);
        self.values[i] = v;
    }

    /// Contiguous (panel, rx beam) block of one (cell, beam).
    pub fn slice(&self, c: usize, b: usize) -> &[f64] {
        let i = self.index(c, b, 0, 0);
        &self.values[i..i + self.panels * self.rx_beams]
    }

    pub fn cell_block(&self, c: usize) -> &[f64] {
        let n = self.beams * self.panels * self.rx_beams;
        &self.values[c * n..(c + 1) * n]
    }
}

/// L1 values of every beam of cell `c` through the fixed route (d, r).
pub fn l1_beam_rsrp_per_cell(tensor: &RsrpTensor, c: usize, route: (usize, usize)) -> Vec<f64> {
    (0..tensor.beams).map(|b| tensor.get(c, b, route.0, route.1)).collect()
}

/// Moving linear-power window over SSB samples for every tensor entry.
#[derive(Debug, Clone)]
pub struct L1Filter {
    window: usize,
    len: usize,
    filled: usize,
    head: usize,
    /// `window` rows of linear samples.
    history: Vec<f64>,
}

impl L1Filter {
    pub fn new(window: usize, len: usize) -> L1Filter {
        L1Filter {
            window: window.max(1),
            len,
            filled: 0,
            head: 0,
            history: vec![0.0; window.max(1) * len],
        }
    }

    pub fn reset(&mut self) {
        self.filled = 0;
        self.head = 0;
    }

    /// Pushes one raw sample set (dBm) and writes the filtered values (dBm).
    pub fn push(&mut self, raw_dbm: &[f64], out_dbm: &mut [f64]) {
        let raw: Vec<f64> = raw_dbm.iter().map(|&x| db_to_lin(x)).collect();
        self.push_mw(&raw, out_dbm);
        out_dbm.iter_mut().for_each(|o| *o = lin_to_db(*o));
    }

    /// Same as [`L1Filter::push`] with linear (mW) input and output.
    pub fn push_mw(&mut self, raw_mw: &[f64], out_mw: &mut [f64]) {
        let row = self.head * self.len;
        self.history[row..row + self.len].copy_from_slice(&raw_mw[..self.len]);
        self.head = (self.head + 1) % self.window;
        self.filled = (self.filled + 1).min(self.window);
        let scale = 1.0 / self.filled as f64;
        for (i, o) in out_mw.iter_mut().enumerate().take(self.len) {
            let mut s = 0.0;
            for w in 0..self.filled {
                s += self.history[w * self.len + i];
            }
            *o = s * scale;
        }
    }
}

/// L3 cell and beam quantities. Filters are seeded by their first input.
#[derive(Debug, Clone)]
pub struct L3State {
    pub k: f64,
    pub cell: Vec<f64>,
    pub beam: Vec<f64>,
    beams: usize,
    seeded: bool,
}

impl L3State {
    pub fn new(cells: usize, beams: usize, k: f64) -> L3State {
        L3State {
            k,
            cell: vec![f64::NEG_INFINITY; cells],
            beam: vec![f64::NEG_INFINITY; cells * beams],
            beams,
            seeded: false,
        }
    }

    /// Forgets all history; the next update seeds the filter again.
    pub fn reset(&mut self) {
        self.seeded = false;
        self.cell.fill(f64::NEG_INFINITY);
        self.beam.fill(f64::NEG_INFINITY);
    }

    pub fn is_seeded(&self) -> bool {
        self.seeded
    }

    /// `beam_l1[c * beams + b]` holds P^L1_{c,b}; cell quality is the best
    /// beam of each cell.
    pub fn update(&mut self, beam_l1: &[f64]) {
        let cells = self.cell.len();
        for c in 0..cells {
            let row = &beam_l1[c * self.beams..(c + 1) * self.beams];
            let q = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if self.seeded {
                self.cell[c] = l3_update(self.cell[c], q, self.k);
                for (b, &v) in row.iter().enumerate() {
                    let s = &mut self.beam[c * self.beams + b];
                    *s = l3_update(*s, v, self.k);
                }
            } else {
                self.cell[c] = q;
                self.beam[c * self.beams..(c + 1) * self.beams].copy_from_slice(row);
            }
        }
        self.seeded = true;
    }

    pub fn beams_of(&self, c: usize) -> &[f64] {
        &self.beam[c * self.beams..(c + 1) * self.beams]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub bandwidth_mhz: f64,
    pub noise_figure_db: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            bandwidth_mhz: 100.0,
            noise_figure_db: 10.0,
        }
    }
}

impl NoiseParams {
    pub fn noise_dbm(&self) -> f64 {
        -174.0 + 10.0 * (self.bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }
}

/// The `kb` beams with the most attached UEs; ties go to the lower index.
pub fn scheduled_beams(attached: &[usize], kb: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..attached.len()).collect();
    idx.sort_by(|&a, &b| attached[b].cmp(&attached[a]).then(a.cmp(&b)));
    idx.truncate(kb.min(attached.len()));
    idx.sort_unstable();
    idx
}

/// Monte-Carlo SINR (dB): every interfering cell transmits one of its
/// scheduled beams, drawn uniformly per draw. `interferers[i]` holds the
/// received powers (mW) of cell i's scheduled beams.
pub fn sinr_db<R: Rng + ?Sized>(signal_mw: f64, noise_mw: f64, interferers: &[&[f64]], n_mc: usize, rng: &mut R) -> f64 {
    let active: Vec<&[f64]> = interferers.iter().copied().filter(|s| !s.is_empty()).collect();
    if active.is_empty() || n_mc == 0 {
        return lin_to_db(signal_mw / noise_mw);
    }
    let mut acc = 0.0;
    for _ in 0..n_mc {
        let mut i_mw = 0.0;
        for s in &active {
            i_mw += s[rng.random_range(0..s.len())];
        }
        acc += signal_mw / (noise_mw + i_mw);
    }
    lin_to_db(acc / n_mc as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn link_budget_arithmetic() {
        assert_eq!(raw_rsrp_dbm(40.0, 0.0, 100.0, 0.0, 0.0, 0.0), -60.0);
    }

    #[test]
    fn l1_examples() {
        assert!(l1_filter(&[]).is_err());
        assert_eq!(l1_filter(&[-80.0]).unwrap(), -80.0);
        assert!((l1_filter(&[-80.0, -80.0]).unwrap() + 80.0).abs() < 1e-12);
        let expected = 10.0 * ((10f64.powf(-7.7) + 10f64.powf(-8.3)) / 2.0).log10();
        assert!((l1_filter(&[-77.0, -83.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 79.03).abs() < 0.01);
    }

    #[test]
    fn l3_examples() {
        assert_eq!(l3_update(-80.0, -70.0, 0.0), -70.0);
        assert_eq!(l3_update(-80.0, -80.0, 4.0), -80.0);
        assert!((l3_update(-80.0, -76.0, 4.0) + 78.0).abs() < 1e-12);
    }

    #[test]
    fn l3_converges_on_constant_input() {
        let mut s = L3State::new(1, 1, 4.0);
        s.update(&[-60.0]);
        for _ in 0..20 {
            s.update(&[-90.0]);
        }
        assert!((s.cell[0] + 90.0).abs() < 0.1);
    }

    #[test]
    fn l1_filter_state_matches_window_average() {
        let mut f = L1Filter::new(2, 2);
        let mut out = [0.0; 2];
        f.push(&[-77.0, -50.0], &mut out);
        assert!((out[0] + 77.0).abs() < 1e-12);
        f.push(&[-83.0, -50.0], &mut out);
        assert!((out[0] - l1_filter(&[-77.0, -83.0]).unwrap()).abs() < 1e-12);
        f.push(&[-83.0, -50.0], &mut out);
        assert!((out[0] + 83.0).abs() < 1e-12);
        assert!((out[1] + 50.0).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_default() {
        assert!((NoiseParams::default().noise_dbm() + 84.0).abs() < 1e-9);
    }

    #[test]
    fn scheduled_beam_ties() {
        assert_eq!(scheduled_beams(&[0; 12], 4), vec![0, 1, 2, 3]);
        assert_eq!(scheduled_beams(&[0, 5, 0, 2, 2, 0, 9, 0, 0, 0, 0, 2], 4), vec![1, 3, 4, 6]);
    }

    #[test]
    fn sinr_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((sinr_db(1.0, 0.01, &[], 20, &mut rng) - 20.0).abs() < 1e-12);
        let i = [1.0];
        assert!(sinr_db(1.0, 1e-12, &[&i], 20, &mut rng).abs() < 1e-9);
    }

    #[test]
    fn sinr_decreases_with_interference() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.1, 0.2, 0.9, 0.4];
        let s1 = sinr_db(1.0, 0.01, &[&a], 50, &mut ChaCha8Rng::seed_from_u64(3));
        let s2 = sinr_db(1.0, 0.01, &[&b], 50, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(s2 <= s1);
    }
}
