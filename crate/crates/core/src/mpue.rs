//! Serving and best panel / Rx-beam selection with switching offsets, and
//! the exclusion rules used to count switches.
//!
//! Indices are 0-based here; CSV outputs convert to 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::RsrpTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cause {
    Initial,
    PanelSwitch,
    RxbeamSwitch,
    Ho,
    TxBeamChange,
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::Initial => "INITIAL",
            Cause::PanelSwitch => "PANEL_SWITCH",
            Cause::RxbeamSwitch => "RXBEAM_SWITCH",
            Cause::Ho => "HO",
            Cause::TxBeamChange => "TX_BEAM_CHANGE",
        }
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchOffsets {
    pub o_p_db: f64,
    pub o_b_db: f64,
}

impl SwitchOffsets {
    pub fn new(o_p_db: f64, o_b_db: f64) -> Result<SwitchOffsets> {
        if !(o_p_db >= 0.0 && o_b_db >= 0.0) {
            return Err(Error::Domain(format!("switching offsets must be non-negative, got ({o_p_db}, {o_b_db})")));
        }
        Ok(SwitchOffsets { o_p_db, o_b_db })
    }

    pub const ZERO: SwitchOffsets = SwitchOffsets { o_p_db: 0.0, o_b_db: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServingSelection {
    pub panel: usize,
    pub rx_beam: usize,
    pub since_ms: u64,
    pub cause: Cause,
}

/// Argmax over a row-major (panel, rx beam) block; first maximum wins.
pub fn argmax_pair(slice: &[f64], rx_beams: usize) -> (usize, usize) {
    let mut best = 0;
    for (i, &v) in slice.iter().enumerate() {
        if v > slice[best] {
            best = i;
        }
    }
    (best / rx_beams, best % rx_beams)
}

/// Decision rule for one (c0, b0) slice. Returns the new (panel, rx beam)
/// and the switch cause, or `None` if the incumbent stays.
pub fn select_serving(slice: &[f64], rx_beams: usize, current: (usize, usize), offsets: SwitchOffsets) -> Option<(usize, usize, Cause)> {
    let p = |d: usize, r: usize| slice[d * rx_beams + r];
    let (d0, r0) = current;
    let (ds, rs) = argmax_pair(slice, rx_beams);
    // Best Rx beam on the serving panel; the incumbent wins ties.
    let mut r_home = r0;
    for r in 0..rx_beams {
        if p(d0, r) > p(d0, r_home) {
            r_home = r;
        }
    }
    if ds != d0 && p(ds, rs) > p(d0, r_home) + offsets.o_p_db {
        return Some((ds, rs, Cause::PanelSwitch));
    }
    if r_home != r0 && p(d0, r_home) > p(d0, r0) + offsets.o_b_db {
        return Some((d0, r_home, Cause::RxbeamSwitch));
    }
    None
}

/// Best (panel, rx beam) of one cell over all its beams; ties resolve to the
/// lowest panel, then the lowest Rx beam.
pub fn best_panel_beam(tensor: &RsrpTensor, c: usize) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for d in 0..tensor.panels {
        for r in 0..tensor.rx_beams {
            for b in 0..tensor.beams {
                let v = tensor.get(c, b, d, r);
                if v > best_v {
                    best_v = v;
                    best = (d, r);
                }
            }
        }
    }
    best
}

/// Best (panel, rx beam) for one (cell, beam).
pub fn best_route_for_beam(tensor: &RsrpTensor, c: usize, b: usize) -> (usize, usize) {
    argmax_pair(tensor.slice(c, b), tensor.rx_beams)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionChange {
    pub t_ms: u64,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub cause: Cause,
}

impl SelectionChange {
    pub fn counts_as_panel_switch(&self) -> bool {
        self.from.0 != self.to.0 && !matches!(self.cause, Cause::Ho | Cause::TxBeamChange | Cause::Initial)
    }

    /// Rx beam changes that ride along with a panel change are not counted.
    pub fn counts_as_rxbeam_switch(&self) -> bool {
        self.from.0 == self.to.0
            && self.from.1 != self.to.1
            && !matches!(self.cause, Cause::Ho | Cause::PanelSwitch | Cause::Initial)
    }
}

/// Counted (panel switches, Rx-beam switches) of a selection history.
pub fn switch_accounting(history: &[SelectionChange]) -> (u64, u64) {
    history.iter().fold((0, 0), |(p, r), c| {
        (p + c.counts_as_panel_switch() as u64, r + c.counts_as_rxbeam_switch() as u64)
    })
}
