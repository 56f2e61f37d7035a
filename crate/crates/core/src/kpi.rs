//! Mobility KPIs: fast-HO classification, per-UE-per-minute normalisation,
//! outage percentage and mergeable counters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{Grip, NUM_PANELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoRecord {
    pub t_ms: u64,
    pub src: usize,
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FastHoKind {
    PingPong,
    ShortStay,
}

/// A fast HO: the pair (index, index + 1) of the HO history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastHo {
    pub first: usize,
    pub kind: FastHoKind,
}

/// Classifies consecutive successful HOs A→B, B→X separated by less than
/// `t_fh_ms`: X = A is a ping-pong, otherwise a short stay. A pair that is
/// classified consumes both HOs, so windows never overlap.
pub fn classify_fast_ho(hos: &[HoRecord], t_fh_ms: u64) -> Vec<FastHo> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < hos.len() {
        let (a, b) = (hos[i], hos[i + 1]);
        if b.src == a.dst && b.t_ms - a.t_ms < t_fh_ms {
            let kind = if b.dst == a.src {
                FastHoKind::PingPong
            } else {
                FastHoKind::ShortStay
            };
            out.push(FastHo { first: i, kind });
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

pub fn outage_percent(outage_ms: &[f64], n_ue: usize, sim_time_ms: f64) -> Result<f64> {
    if !(sim_time_ms > 0.0) {
        return Err(Error::Domain("outage percentage needs a positive simulated time".into()));
    }
    if n_ue == 0 {
        return Err(Error::Domain("outage percentage needs at least one UE".into()));
    }
    Ok(outage_ms.iter().sum::<f64>() / (n_ue as f64 * sim_time_ms) * 100.0)
}

/// Counter per UE per minute.
pub fn normalize(count: f64, n_ue: usize, sim_time_s: f64) -> Result<f64> {
    if !(sim_time_s > 0.0) {
        return Err(Error::Domain("normalisation needs a positive simulated time".into()));
    }
    if n_ue == 0 {
        return Err(Error::Domain("normalisation needs at least one UE".into()));
    }
    Ok(count / n_ue as f64 / (sim_time_s / 60.0))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiCounters {
    pub n_ue: u64,
    pub sim_time_ms: u64,
    pub successful_hos: u64,
    pub hofs: u64,
    pub rlfs: u64,
    pub ping_pongs: u64,
    pub short_stays: u64,
    pub panel_switches: u64,
    pub rxbeam_switches: u64,
    pub bf_recoveries: u64,
    pub outage_low_sinr_ms: u64,
    pub outage_ho_ms: u64,
    pub outage_failure_ms: u64,
    pub panel_stay_ms: [u64; NUM_PANELS],
}

impl KpiCounters {
    pub fn mobility_failures(&self) -> u64 {
        self.hofs + self.rlfs
    }

    pub fn fast_hos(&self) -> u64 {
        self.ping_pongs + self.short_stays
    }

    pub fn outage_ms(&self) -> u64 {
        self.outage_low_sinr_ms + self.outage_ho_ms + self.outage_failure_ms
    }

    /// Combines counters of disjoint UE sets simulated over the same time.
    pub fn merge(&mut self, o: &KpiCounters) {
        self.n_ue += o.n_ue;
        self.sim_time_ms = self.sim_time_ms.max(o.sim_time_ms);
        self.successful_hos += o.successful_hos;
        self.hofs += o.hofs;
        self.rlfs += o.rlfs;
        self.ping_pongs += o.ping_pongs;
        self.short_stays += o.short_stays;
        self.panel_switches += o.panel_switches;
        self.rxbeam_switches += o.rxbeam_switches;
        self.bf_recoveries += o.bf_recoveries;
        self.outage_low_sinr_ms += o.outage_low_sinr_ms;
        self.outage_ho_ms += o.outage_ho_ms;
        self.outage_failure_ms += o.outage_failure_ms;
        for d in 0..NUM_PANELS {
            self.panel_stay_ms[d] += o.panel_stay_ms[d];
        }
    }

    fn rate(&self, count: u64) -> f64 {
        normalize(count as f64, self.n_ue as usize, self.sim_time_ms as f64 / 1000.0).unwrap_or(0.0)
    }

    pub fn ho_rate(&self) -> f64 {
        self.rate(self.successful_hos)
    }

    pub fn failure_rate(&self) -> f64 {
        self.rate(self.mobility_failures())
    }

    pub fn fast_ho_rate(&self) -> f64 {
        self.rate(self.fast_hos())
    }

    pub fn panel_switch_rate(&self) -> f64 {
        self.rate(self.panel_switches)
    }

    pub fn rxbeam_switch_rate(&self) -> f64 {
        self.rate(self.rxbeam_switches)
    }

    pub fn outage_pct(&self) -> f64 {
        if self.n_ue == 0 || self.sim_time_ms == 0 {
            return 0.0;
        }
        self.outage_ms() as f64 / (self.n_ue as f64 * self.sim_time_ms as f64) * 100.0
    }

    /// Share of connected time spent on each serving panel, in percent.
    pub fn panel_stay_pct(&self) -> [f64; NUM_PANELS] {
        let total: u64 = self.panel_stay_ms.iter().sum();
        if total == 0 {
            return [0.0; NUM_PANELS];
        }
        self.panel_stay_ms.map(|v| v as f64 / total as f64 * 100.0)
    }
}

pub const SUMMARY_HEADER: &str =
    "grip,o_p_db,o_b_db,seed,ho_per_ue_min,failures_per_ue_min,fastho_per_ue_min,panelsw_per_ue_min,rxbeamsw_per_ue_min,outage_pct";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub grip: Grip,
    pub o_p_db: f64,
    pub o_b_db: f64,
    pub seed: u64,
    pub counters: KpiCounters,
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        let k = &self.counters;
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.grip,
            self.o_p_db,
            self.o_b_db,
            self.seed,
            k.ho_rate(),
            k.failure_rate(),
            k.fast_ho_rate(),
            k.panel_switch_rate(),
            k.rxbeam_switch_rate(),
            k.outage_pct()
        )
    }
}

pub const PANEL_STAY_HEADER: &str = "grip,o_p_db,o_b_db,seed,p1_pct,p2_pct,p3_pct";

pub fn panel_stay_csv_row(row: &SummaryRow) -> String {
    let p = row.counters.panel_stay_pct();
    format!(
        "{},{},{},{},{:.4},{:.4},{:.4}",
        row.grip, row.o_p_db, row.o_b_db, row.seed, p[0], p[1], p[2]
    )
}
