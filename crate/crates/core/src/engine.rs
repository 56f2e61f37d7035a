//! Discrete-time scheduler binding the modules into one simulation run.
//!
//! Step order at time t: move UEs, refresh large-scale link terms, and on
//! SSB ticks measure the full RSRP tensor, apply L1, pick the best panel /
//! Rx beam per cell, update L3, run the serving panel / Rx beam decision and
//! Tx beam management. The connection state machine and KPI accrual run
//! every step.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{doppler_hz, CellShadow, FadingBank, PathLossParams, Phasors, ShadowField, SoftLos};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_hex_layout, drop_ue, step_ue, wrap_displacement, NetworkLayout, UEKinematics, Vec2};
use crate::kpi::{classify_fast_ho, FastHoKind, HoRecord, KpiCounters, SummaryRow};
use crate::measure::{db_to_lin, lin_to_db, scheduled_beams, sinr_db, L1Filter, L3State, RsrpTensor};
use crate::mobility::{Connection, Event, EventKind, LinkView, Phase};
use crate::mpue::{best_panel_beam, select_serving, switch_accounting, Cause, SelectionChange, SwitchOffsets};
use crate::radio::{
    angles_from_unit, grip_mask, mask_from_csv, GripMask, Mat3, RxGainEval, TxGainEval, NUM_PANELS, NUM_RX_BEAMS,
};

/// Version tag recorded in run manifests.
pub const CODE_VERSION: &str = concat!("panelsim ", env!("CARGO_PKG_VERSION"));

const RX_LINKS: usize = NUM_PANELS * NUM_RX_BEAMS;

/// Immutable per-run context shared by all UEs.
pub struct Scenario {
    pub cfg: SimConfig,
    pub layout: NetworkLayout,
    pub mask: GripMask,
    tx: TxGainEval,
    rx: RxGainEval,
    soft_los: SoftLos,
    pl: PathLossParams,
    shadow: Vec<CellShadow>,
    noise_mw: f64,
    doppler: f64,
    cells: usize,
    beams: usize,
}

impl Scenario {
    pub fn new(cfg: &SimConfig) -> Result<Scenario> {
        cfg.validate()?;
        let layout = build_hex_layout(cfg.geometry.isd_m)?;
        let mask = match &cfg.radio.mask_file {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                let rotation = cfg.radio.mask_rotation.unwrap_or_default();
                mask_from_csv(cfg.simulation.grip, rotation, &text)?
            }
            None => grip_mask(cfg.simulation.grip, &cfg.radio.blockage),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.simulation.seed, u64::MAX));
        let shadow = (0..layout.num_cells())
            .map(|_| CellShadow {
                los: ShadowField::new(cfg.channel.shadow_los, &layout, &mut rng),
                nlos: ShadowField::new(cfg.channel.shadow_nlos, &layout, &mut rng),
            })
            .collect();
        let doppler = if cfg.channel.fast_fading {
            doppler_hz(cfg.ue_speed_mps(), cfg.channel.fc_ghz)
        } else {
            0.0
        };
        Ok(Scenario {
            cells: layout.num_cells(),
            beams: cfg.radio.tx_grid.len(),
            tx: TxGainEval::new(&cfg.radio.tx_grid),
            rx: RxGainEval::new(&cfg.radio.panels),
            soft_los: SoftLos::new(cfg.channel.soft_los),
            pl: cfg.path_loss(),
            noise_mw: db_to_lin(cfg.measure.noise.noise_dbm()),
            shadow,
            doppler,
            mask,
            layout,
            cfg: cfg.clone(),
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn num_beams(&self) -> usize {
        self.beams
    }

    pub fn noise_dbm(&self) -> f64 {
        lin_to_db(self.noise_mw)
    }

    /// Large-scale terms of every cell for a UE at `pos`.
    fn large_scale(&self, pos: Vec2, shadow: &[ShadowTrack], to_panel: &[Mat3; NUM_PANELS], out: &mut [LargeScale]) {
        let dh = self.cfg.geometry.bs_height_m - self.cfg.geometry.ue_height_m;
        for (c, ls) in out.iter_mut().enumerate() {
            let cell = &self.layout.cells[c];
            let site = self.layout.sites[cell.site];
            let to_site = wrap_displacement(pos, site, &self.layout);
            let d2d = to_site.norm();
            let d3d = (d2d * d2d + dh * dh).sqrt();
            let w = self.soft_los.weight(d2d);
            let pl = self.pl.blended_db(d3d, w);
            let sf = if self.cfg.channel.shadowing {
                shadow[c].value(w)
            } else {
                0.0
            };
            ls.base_dbm = self.cfg.radio.tx_power_dbm - pl - sf;
            ls.base_mw = db_to_lin(ls.base_dbm);
            // Departure direction in the cell frame.
            let az_global = (-to_site.y).atan2(-to_site.x).to_degrees();
            ls.tx_az = crate::radio::wrap_deg(az_global - cell.azimuth_deg);
            ls.tx_zen = d2d.atan2(-dh).to_degrees();
            ls.tx_u = crate::radio::direction(ls.tx_az, ls.tx_zen);
            // Arrival direction (towards the BS) in each panel frame.
            let dir = [to_site.x / d3d, to_site.y / d3d, dh / d3d];
            for (d, m) in to_panel.iter().enumerate() {
                let u = m.apply(dir);
                let (az, zen) = angles_from_unit(u);
                ls.rx_local[d] = (az, zen, u);
                ls.mask_db[d] = self.mask.panels[d].lookup(az, zen);
            }
        }
    }

    fn tx_gain(&self, ls: &LargeScale, b: usize) -> f64 {
        self.tx.gain(b, ls.tx_az, ls.tx_zen, ls.tx_u)
    }

    fn rx_gain(&self, ls: &LargeScale, d: usize, r: usize) -> f64 {
        let (az, zen, u) = ls.rx_local[d];
        self.rx.gain_local(r, az, zen, u) + ls.mask_db[d]
    }

    /// Mean link RSRP (dBm, no fast fading) for a UE at `pos` travelling
    /// along `heading` (radians).
    pub fn mean_link_dbm(&self, pos: Vec2, heading: f64, c: usize, b: usize, d: usize, r: usize) -> f64 {
        let orientation = self.mask.rotation.matrix(heading.to_degrees());
        let to_panel = self.cfg.radio.panels.global_to_panel(&orientation);
        let shadow: Vec<ShadowTrack> = self.shadow.iter().map(|s| ShadowTrack::new(s, pos, Vec2::ZERO)).collect();
        let mut ls = vec![LargeScale::default(); self.cells];
        self.large_scale(pos, &shadow, &to_panel, &mut ls);
        ls[c].base_dbm + self.tx_gain(&ls[c], b) + self.rx_gain(&ls[c], d, r)
    }
}

/// SplitMix-style combination of a seed and a stream index.
fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, Default)]
struct LargeScale {
    base_dbm: f64,
    base_mw: f64,
    tx_az: f64,
    tx_zen: f64,
    tx_u: [f64; 3],
    rx_local: [(f64, f64, [f64; 3]); NUM_PANELS],
    mask_db: [f64; NUM_PANELS],
}

/// Shadow fields of one cell along a straight UE track: the plane-wave
/// phasors advance by a fixed rotation per step.
#[derive(Debug, Clone)]
struct ShadowTrack {
    re: Vec<f64>,
    im: Vec<f64>,
    rot_re: Vec<f64>,
    rot_im: Vec<f64>,
    /// Waves of the LoS field come first.
    n_los: usize,
    amp_los: f64,
    amp_nlos: f64,
}

impl ShadowTrack {
    fn new(s: &CellShadow, pos: Vec2, step: Vec2) -> ShadowTrack {
        let mut t = ShadowTrack {
            re: vec![],
            im: vec![],
            rot_re: vec![],
            rot_im: vec![],
            n_los: s.los.kx.len(),
            amp_los: s.los.amplitude(),
            amp_nlos: s.nlos.amplitude(),
        };
        for f in [&s.los, &s.nlos] {
            for n in 0..f.kx.len() {
                let (si, co) = (f.kx[n] * pos.x + f.ky[n] * pos.y + f.phase[n]).sin_cos();
                t.re.push(co);
                t.im.push(si);
                let (rs, rc) = (f.kx[n] * step.x + f.ky[n] * step.y).sin_cos();
                t.rot_re.push(rc);
                t.rot_im.push(rs);
            }
        }
        t
    }

    fn advance(&mut self) {
        for n in 0..self.re.len() {
            let (a, b) = (self.re[n], self.im[n]);
            self.re[n] = a * self.rot_re[n] - b * self.rot_im[n];
            self.im[n] = a * self.rot_im[n] + b * self.rot_re[n];
        }
    }

    fn value(&self, w_los: f64) -> f64 {
        let los: f64 = self.re[..self.n_los].iter().sum();
        let nlos: f64 = self.re[self.n_los..].iter().sum();
        w_los * self.amp_los * los + (1.0 - w_los) * self.amp_nlos * nlos
    }
}


struct UeRadio {
    kin: UEKinematics,
    to_panel: [Mat3; NUM_PANELS],
    fading: FadingBank,
    shadow: Vec<ShadowTrack>,
}

struct UeMeas {
    l1f: L1Filter,
    /// L1-filtered RSRP in mW.
    l1: RsrpTensor,
    best: Vec<(usize, usize)>,
    beam_l1: Vec<f64>,
    l3: L3State,
}

struct Ue {
    radio: UeRadio,
    meas: UeMeas,
    rng: ChaCha8Rng,
    log_rng: ChaCha8Rng,
    conn: Option<Connection>,
    counters: KpiCounters,
    hos: Vec<HoRecord>,
    events: Vec<Event>,
    ra_sinr: Vec<f64>,
}

/// Per-step scratch for one UE. Gains and powers are linear.
struct StepCache {
    t_s: f64,
    ls: Vec<LargeScale>,
    tx_gain: Vec<f64>,
    rx_gain: Vec<f64>,
    basis: Option<Phasors>,
    /// Raw RSRP in mW, valid on SSB steps.
    raw: RsrpTensor,
    raw_valid: bool,
    powers: Vec<f64>,
}

impl StepCache {
    fn new(cells: usize, beams: usize) -> StepCache {
        StepCache {
            t_s: 0.0,
            ls: vec![LargeScale::default(); cells],
            tx_gain: vec![f64::NAN; cells * beams],
            rx_gain: vec![f64::NAN; cells * RX_LINKS],
            basis: None,
            raw: RsrpTensor::new(cells, beams, NUM_PANELS, NUM_RX_BEAMS, 0.0),
            raw_valid: false,
            powers: Vec::new(),
        }
    }

    fn invalidate(&mut self, t_s: f64) {
        self.t_s = t_s;
        self.tx_gain.fill(f64::NAN);
        self.rx_gain.fill(f64::NAN);
        self.basis = None;
        self.raw_valid = false;
    }
}

/// Link evaluation for one UE at one step.
struct UeView<'a> {
    sc: &'a Scenario,
    radio: &'a UeRadio,
    meas: &'a UeMeas,
    cache: &'a mut StepCache,
    rng: &'a mut ChaCha8Rng,
    sched: &'a [Vec<usize>],
}

impl UeView<'_> {
    fn tx_gain(&mut self, c: usize, b: usize) -> f64 {
        let i = c * self.sc.beams + b;
        let g = self.cache.tx_gain[i];
        if !g.is_nan() {
            return g;
        }
        let g = db_to_lin(self.sc.tx_gain(&self.cache.ls[c], b));
        self.cache.tx_gain[i] = g;
        g
    }

    fn rx_gain(&mut self, c: usize, d: usize, r: usize) -> f64 {
        let i = c * RX_LINKS + d * NUM_RX_BEAMS + r;
        let g = self.cache.rx_gain[i];
        if !g.is_nan() {
            return g;
        }
        let g = db_to_lin(self.sc.rx_gain(&self.cache.ls[c], d, r));
        self.cache.rx_gain[i] = g;
        g
    }

    fn fading(&mut self, c: usize, b: usize, d: usize, r: usize) -> f64 {
        if !self.sc.cfg.channel.fast_fading {
            return 1.0;
        }
        let fading = &self.radio.fading;
        let t = self.cache.t_s;
        let basis = self.cache.basis.get_or_insert_with(|| fading.basis(t));
        let tx = fading.tx_phasor(basis, c, b);
        fading.power_with(&tx, c, d * NUM_RX_BEAMS + r)
    }

    fn link_mw(&mut self, c: usize, b: usize, d: usize, r: usize) -> f64 {
        if self.cache.raw_valid {
            return self.cache.raw.get(c, b, d, r);
        }
        self.cache.ls[c].base_mw * self.tx_gain(c, b) * self.rx_gain(c, d, r) * self.fading(c, b, d, r)
    }

    fn sinr_with_rng(&mut self, cell: usize, beam: usize, route: (usize, usize), use_log_rng: Option<&mut ChaCha8Rng>) -> f64 {
        let (d, r) = route;
        let s = self.link_mw(cell, beam, d, r);
        let kb = self.sc.cfg.measure.scheduled_beams;
        let mut powers = std::mem::take(&mut self.cache.powers);
        powers.clear();
        for c in 0..self.sc.cells {
            if c == cell {
                continue;
            }
            for &b in &self.sched[c] {
                powers.push(self.link_mw(c, b, d, r));
            }
        }
        let groups: Vec<&[f64]> = if kb == 0 { Vec::new() } else { powers.chunks(kb).collect() };
        let n_mc = self.sc.cfg.measure.n_mc;
        let out = match use_log_rng {
            Some(rng) => sinr_db(s, self.sc.noise_mw, &groups, n_mc, rng),
            None => sinr_db(s, self.sc.noise_mw, &groups, n_mc, self.rng),
        };
        self.cache.powers = powers;
        out
    }
}

impl LinkView for UeView<'_> {
    fn sinr_db(&mut self, cell: usize, beam: usize, route: (usize, usize)) -> f64 {
        self.sinr_with_rng(cell, beam, route, None)
    }

    fn l1_beam_dbm(&self, cell: usize, beam: usize) -> f64 {
        self.meas.beam_l1[cell * self.sc.beams + beam]
    }

    fn num_beams(&self) -> usize {
        self.sc.beams
    }

    fn best_route(&self, cell: usize) -> (usize, usize) {
        self.meas.best[cell]
    }

    fn best_route_for_beam(&self, cell: usize, beam: usize) -> (usize, usize) {
        crate::mpue::best_route_for_beam(&self.meas.l1, cell, beam)
    }

    fn l3_cell_dbm(&self) -> &[f64] {
        &self.meas.l3.cell
    }

    fn l3_beams_dbm(&self, cell: usize) -> &[f64] {
        self.meas.l3.beams_of(cell)
    }
}

/// The (panel, rx beam) block of one (cell, beam) in dBm.
fn slice_db(l1_mw: &RsrpTensor, c: usize, b: usize) -> [f64; RX_LINKS] {
    let mut out = [0.0; RX_LINKS];
    for (o, &v) in out.iter_mut().zip(l1_mw.slice(c, b)) {
        *o = lin_to_db(v);
    }
    out
}

/// Fills the raw tensor with every link at the current time.
fn measure_all(sc: &Scenario, radio: &UeRadio, cache: &mut StepCache) {
    let fading = &radio.fading;
    let basis = fading.basis(cache.t_s);
    for c in 0..sc.cells {
        let ls = cache.ls[c];
        let mut rxg = [0.0; RX_LINKS];
        for d in 0..NUM_PANELS {
            for r in 0..NUM_RX_BEAMS {
                rxg[d * NUM_RX_BEAMS + r] = db_to_lin(sc.rx_gain(&ls, d, r));
            }
        }
        cache.rx_gain[c * RX_LINKS..(c + 1) * RX_LINKS].copy_from_slice(&rxg);
        for b in 0..sc.beams {
            let txg = db_to_lin(sc.tx_gain(&ls, b));
            cache.tx_gain[c * sc.beams + b] = txg;
            let base = ls.base_mw * txg;
            let i0 = cache.raw.index(c, b, 0, 0);
            let out = &mut cache.raw.values[i0..i0 + RX_LINKS];
            if sc.cfg.channel.fast_fading {
                let tx = fading.tx_phasor(&basis, c, b);
                fading.powers_all(&tx, c, out);
                for (o, g) in out.iter_mut().zip(&rxg) {
                    *o *= base * g;
                }
            } else {
                for (o, g) in out.iter_mut().zip(&rxg) {
                    *o = base * g;
                }
            }
        }
    }
    cache.basis = Some(basis);
    cache.raw_valid = true;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeEvent {
    pub ue: usize,
    pub event: Event,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: SimConfig,
    pub summary: SummaryRow,
    pub per_ue: Vec<KpiCounters>,
    pub events: Vec<UeEvent>,
    pub selections: Vec<(usize, SelectionChange)>,
    pub manifest: String,
    /// `(ue, csv)` channel traces of the traced UEs.
    pub channel_traces: Vec<(usize, String)>,
    /// `(ue, csv)` measurement logs of the traced UEs.
    pub measurement_logs: Vec<(usize, String)>,
    /// Target-link SINR samples observed during random access.
    pub ra_sinr_db: Vec<f64>,
}

pub const CHANNEL_TRACE_HEADER: &str = "t_ms,ue,cell,beam,panel,rxbeam,rsrp_dbm";
pub const MEASUREMENT_LOG_HEADER: &str = "t_ms,cell,beam,l1_dbm,l3_dbm,sinr_db";
pub const SELECTION_TRACE_HEADER: &str = "t_ms,ue,panel,rxbeam,cause";
pub const EVENT_LOG_HEADER: &str = "t_ms,ue,event,src_cell,dst_cell,beam";

fn new_ue(sc: &Scenario, id: usize) -> Ue {
    let cfg = &sc.cfg;
    let seed = cfg.simulation.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, id as u64));
    let mut kin = drop_ue(&sc.layout, cfg.ue_speed_mps(), cfg.geometry.ue_height_m, &mut rng);
    let shift = sc.layout.replica_offsets[cfg.geometry.drop_shift];
    kin.position = sc.layout.wrap_position(kin.position + shift);
    let orientation = sc.mask.rotation.matrix(kin.heading.to_degrees());
    let to_panel = cfg.radio.panels.global_to_panel(&orientation);
    let fading = FadingBank::new(sc.doppler, sc.cells, sc.beams, RX_LINKS, &mut rng);
    let step = kin.velocity() * (cfg.simulation.dt_ms as f64 / 1000.0);
    let shadow = sc.shadow.iter().map(|s| ShadowTrack::new(s, kin.position, step)).collect();
    let n = sc.cells * sc.beams * RX_LINKS;
    Ue {
        radio: UeRadio {
            kin,
            to_panel,
            fading,
            shadow,
        },
        meas: UeMeas {
            l1f: L1Filter::new(cfg.measure.l1_window, n),
            l1: RsrpTensor::new(sc.cells, sc.beams, NUM_PANELS, NUM_RX_BEAMS, 0.0),
            best: vec![(0, 0); sc.cells],
            beam_l1: vec![f64::NEG_INFINITY; sc.cells * sc.beams],
            l3: L3State::new(sc.cells, sc.beams, cfg.measure.l3_k),
        },
        rng,
        log_rng: ChaCha8Rng::seed_from_u64(mix(seed ^ 0x5EED_1066, id as u64)),
        conn: None,
        counters: KpiCounters {
            n_ue: 1,
            sim_time_ms: cfg.simulation.duration_ms,
            ..Default::default()
        },
        hos: Vec::new(),
        events: Vec::new(),
        ra_sinr: Vec::new(),
    }
}

/// Advances one UE by one step at time `t_ms`.
#[allow(clippy::too_many_arguments)]
fn step_one(
    sc: &Scenario,
    ue: &mut Ue,
    id: usize,
    t_ms: u64,
    ssb: bool,
    sched: &[Vec<usize>],
    cache: &mut StepCache,
    trace: Option<(&mut String, &mut String)>,
) {
    let cfg = &sc.cfg;
    let dt_ms = cfg.simulation.dt_ms;
    if t_ms > 0 {
        ue.radio.kin = step_ue(&ue.radio.kin, dt_ms as f64 / 1000.0, &sc.layout);
        ue.radio.shadow.iter_mut().for_each(ShadowTrack::advance);
    }
    cache.invalidate(t_ms as f64 / 1000.0);
    sc.large_scale(ue.radio.kin.position, &ue.radio.shadow, &ue.radio.to_panel, &mut cache.ls);

    let offsets = SwitchOffsets {
        o_p_db: cfg.mpue.o_p_db,
        o_b_db: cfg.mpue.o_b_db,
    };
    let Ue {
        radio,
        meas,
        rng,
        log_rng,
        conn,
        counters,
        hos,
        events,
        ra_sinr,
    } = ue;

    if ssb {
        measure_all(sc, radio, cache);
        let sigma = cfg.channel.measurement_error_db;
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            let mut noisy = cache.raw.values.clone();
            noisy.iter_mut().for_each(|v| *v *= db_to_lin(normal.sample(rng)));
            meas.l1f.push_mw(&noisy, &mut meas.l1.values);
        } else {
            meas.l1f.push_mw(&cache.raw.values, &mut meas.l1.values);
        }
        for c in 0..sc.cells {
            let best = best_panel_beam(&meas.l1, c);
            meas.best[c] = best;
            for b in 0..sc.beams {
                meas.beam_l1[c * sc.beams + b] = lin_to_db(meas.l1.get(c, b, best.0, best.1));
            }
        }
        meas.l3.update(&meas.beam_l1);

        let view = UeView {
            sc,
            radio,
            meas,
            cache,
            rng,
            sched,
        };
        let conn = conn.get_or_insert_with(|| Connection::attach(&view, t_ms));
        if conn.manages_beams() {
            let (c0, b0) = (conn.cell, conn.beam);
            if let Some((d, r, cause)) = select_serving(&slice_db(&meas.l1, c0, b0), NUM_RX_BEAMS, conn.route, offsets) {
                conn.set_route((d, r), cause, t_ms);
            }
            // Tx beam management through the serving panel.
            let d0 = conn.route.0;
            let best_on = |b: usize| (0..NUM_RX_BEAMS).map(|r| meas.l1.get(c0, b, d0, r)).fold(f64::NEG_INFINITY, f64::max);
            let mut b_new = b0;
            for b in 0..sc.beams {
                if best_on(b) > best_on(b_new) {
                    b_new = b;
                }
            }
            if b_new != b0 {
                conn.beam = b_new;
                if let Some((d, r, _)) = select_serving(&slice_db(&meas.l1, c0, b_new), NUM_RX_BEAMS, conn.route, offsets) {
                    conn.set_route((d, r), Cause::TxBeamChange, t_ms);
                }
            }
        }

        if let Some((ctrace, mlog)) = trace {
            if cfg.output.channel_trace {
                for c in 0..sc.cells {
                    for b in 0..sc.beams {
                        for d in 0..NUM_PANELS {
                            for r in 0..NUM_RX_BEAMS {
                                let _ = writeln!(
                                    ctrace,
                                    "{t_ms},{id},{},{},{},{},{:.4}",
                                    c + 1,
                                    b + 1,
                                    d + 1,
                                    r + 1,
                                    lin_to_db(cache.raw.get(c, b, d, r))
                                );
                            }
                        }
                    }
                }
            }
            if cfg.output.measurement_log {
                let route = conn.route;
                let mut view = UeView {
                    sc,
                    radio,
                    meas,
                    cache,
                    rng,
                    sched,
                };
                for c in 0..sc.cells {
                    for b in 0..sc.beams {
                        let sinr = view.sinr_with_rng(c, b, route, Some(log_rng));
                        let _ = writeln!(
                            mlog,
                            "{t_ms},{},{},{:.4},{:.4},{:.4}",
                            c + 1,
                            b + 1,
                            meas.beam_l1[c * sc.beams + b],
                            meas.l3.beams_of(c)[b],
                            sinr
                        );
                    }
                }
            }
        }
    }

    let Some(conn) = conn.as_mut() else {
        return;
    };
    let mut view = UeView {
        sc,
        radio,
        meas,
        cache,
        rng,
        sched,
    };
    let out = conn.step(t_ms, dt_ms, &cfg.mobility, &mut view);
    ra_sinr.extend(out.ra_sinr_db);
    if out.reset_filters {
        meas.l1f.reset();
        meas.l3.reset();
    }
    counters.outage_low_sinr_ms += out.outage.low_sinr_ms;
    counters.outage_ho_ms += out.outage.ho_ms;
    counters.outage_failure_ms += out.outage.failure_ms;
    for e in &out.events {
        match e.kind {
            EventKind::Ho => {
                counters.successful_hos += 1;
                hos.push(HoRecord {
                    t_ms: e.t_ms,
                    src: e.src_cell,
                    dst: e.dst_cell,
                });
            }
            EventKind::Hof => counters.hofs += 1,
            EventKind::Rlf => counters.rlfs += 1,
            EventKind::BfRecovery => counters.bf_recoveries += 1,
            EventKind::PingPong | EventKind::ShortStay => {}
        }
        events.push(*e);
    }
    if conn.is_attached() {
        counters.panel_stay_ms[conn.route.0] += dt_ms;
    }
}

fn manifest(cfg: &SimConfig) -> String {
    format!(
        "# {CODE_VERSION}\n# seed = {}\n{}",
        cfg.simulation.seed,
        cfg.to_toml_string()
    )
}

/// Runs one scenario.
pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    let ids: Vec<usize> = (0..cfg.simulation.n_ue).collect();
    run_with_ids(cfg, &ids)
}

/// Runs a scenario whose UEs carry the given identities, in that creation
/// order. A UE's random streams depend only on its identity and the seed.
pub fn run_with_ids(cfg: &SimConfig, ids: &[usize]) -> Result<RunResult> {
    let sc = Scenario::new(cfg)?;
    let n_ue = ids.len();
    let mut seen = ids.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n_ue || n_ue == 0 {
        return Err(Error::Domain("UE identities must be distinct and non-empty".into()));
    }
    let mut ues: Vec<Ue> = ids.iter().map(|&id| new_ue(&sc, id)).collect();
    let mut cache = StepCache::new(sc.cells, sc.beams);
    let traced: Vec<usize> = if cfg.output.channel_trace || cfg.output.measurement_log {
        cfg.output.trace_ues.clone()
    } else {
        Vec::new()
    };
    let mut ctraces: Vec<String> = traced.iter().map(|_| format!("{CHANNEL_TRACE_HEADER}\n")).collect();
    let mut mlogs: Vec<String> = traced.iter().map(|_| format!("{MEASUREMENT_LOG_HEADER}\n")).collect();

    let kb = cfg.measure.scheduled_beams;
    let mut sched: Vec<Vec<usize>> = vec![(0..kb).collect(); sc.cells];
    let dt = cfg.simulation.dt_ms;
    for step in 0..cfg.n_steps() {
        let t_ms = step * dt;
        let ssb = t_ms % cfg.simulation.ssb_period_ms == 0;
        if ssb && t_ms > 0 {
            // Scheduled beams follow the attachment snapshot at the SSB.
            let mut counts = vec![vec![0usize; sc.beams]; sc.cells];
            for ue in &ues {
                if let Some(c) = &ue.conn {
                    if matches!(c.phase, Phase::Connected | Phase::HoPrepared { .. } | Phase::BeamRecovery { .. }) {
                        counts[c.cell][c.beam] += 1;
                    }
                }
            }
            for c in 0..sc.cells {
                sched[c] = scheduled_beams(&counts[c], kb);
            }
        }
        for (&id, ue) in ids.iter().zip(ues.iter_mut()) {
            match traced.iter().position(|&u| u == id) {
                Some(k) => {
                    let (ct, ml) = (&mut ctraces[k], &mut mlogs[k]);
                    step_one(&sc, ue, id, t_ms, ssb, &sched, &mut cache, Some((ct, ml)));
                }
                None => step_one(&sc, ue, id, t_ms, ssb, &sched, &mut cache, None),
            }
        }
    }

    let mut per_ue = Vec::with_capacity(n_ue);
    let mut events = Vec::new();
    let mut selections = Vec::new();
    let mut ra_sinr_db = Vec::new();
    let mut total = KpiCounters {
        sim_time_ms: cfg.simulation.duration_ms,
        ..Default::default()
    };
    for (&id, mut ue) in ids.iter().zip(ues) {
        for fh in classify_fast_ho(&ue.hos, cfg.kpi.t_fh_ms) {
            let second = ue.hos[fh.first + 1];
            let kind = match fh.kind {
                FastHoKind::PingPong => {
                    ue.counters.ping_pongs += 1;
                    EventKind::PingPong
                }
                FastHoKind::ShortStay => {
                    ue.counters.short_stays += 1;
                    EventKind::ShortStay
                }
            };
            ue.events.push(Event {
                t_ms: second.t_ms,
                kind,
                src_cell: second.src,
                dst_cell: second.dst,
                beam: ue.events.iter().find(|e| e.kind == EventKind::Ho && e.t_ms == second.t_ms).map_or(0, |e| e.beam),
            });
        }
        if let Some(conn) = &ue.conn {
            let (p, r) = switch_accounting(&conn.changes);
            ue.counters.panel_switches = p;
            ue.counters.rxbeam_switches = r;
            selections.extend(conn.changes.iter().map(|c| (id, *c)));
        }
        total.merge(&ue.counters);
        events.extend(ue.events.iter().map(|&event| UeEvent { ue: id, event }));
        ra_sinr_db.extend(ue.ra_sinr);
        per_ue.push(ue.counters);
    }
    total.n_ue = n_ue as u64;
    events.sort_by_key(|e| (e.event.t_ms, e.ue));
    selections.sort_by_key(|(ue, c)| (c.t_ms, *ue));

    Ok(RunResult {
        config: cfg.clone(),
        summary: SummaryRow {
            grip: cfg.simulation.grip,
            o_p_db: cfg.mpue.o_p_db,
            o_b_db: cfg.mpue.o_b_db,
            seed: cfg.simulation.seed,
            counters: total,
        },
        per_ue,
        events,
        selections,
        manifest: manifest(cfg),
        channel_traces: traced.iter().copied().zip(ctraces).collect(),
        measurement_logs: traced.iter().copied().zip(mlogs).collect(),
        ra_sinr_db,
    })
}

/// Manifest of a sweep: the base configuration plus the swept axes.
pub fn sweep_manifest(base: &SimConfig, grips: &[crate::radio::Grip], o_p: &[f64], o_b: &[f64], seeds: &[u64]) -> String {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    let grips: Vec<String> = grips.iter().map(|g| format!("\"{g}\"")).collect();
    let seeds: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
    format!(
        "# {CODE_VERSION}\n# sweep grips = [{}]\n# sweep o_p_db = [{}]\n# sweep o_b_db = [{}]\n# sweep seeds = [{}]\n{}",
        grips.join(", "),
        list(o_p),
        list(o_b),
        seeds.join(", "),
        base.to_toml_string()
    )
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub grip: crate::radio::Grip,
    pub o_p_db: f64,
    pub o_b_db: f64,
    pub seed: u64,
}

/// Cartesian product grips × o_p × o_b × seeds, in that nesting order.
pub fn sweep_points(grips: &[crate::radio::Grip], o_p: &[f64], o_b: &[f64], seeds: &[u64]) -> Vec<SweepPoint> {
    let mut pts = Vec::new();
    for &grip in grips {
        for &o_p_db in o_p {
            for &o_b_db in o_b {
                for &seed in seeds {
                    pts.push(SweepPoint {
                        grip,
                        o_p_db,
                        o_b_db,
                        seed,
                    });
                }
            }
        }
    }
    pts
}

pub fn config_for(base: &SimConfig, p: &SweepPoint) -> SimConfig {
    let mut c = base.clone();
    c.simulation.grip = p.grip;
    c.mpue.o_p_db = p.o_p_db;
    c.mpue.o_b_db = p.o_b_db;
    c.simulation.seed = p.seed;
    c
}

/// Runs every sweep point, in parallel across runs, and returns the summary
/// rows in sweep order.
pub fn sweep(
    base: &SimConfig,
    grips: &[crate::radio::Grip],
    o_p: &[f64],
    o_b: &[f64],
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<SummaryRow>> {
    if grips.is_empty() || o_p.is_empty() || o_b.is_empty() || seeds.is_empty() {
        return Err(Error::Domain("sweep lists must be non-empty".into()));
    }
    let points = sweep_points(grips, o_p, o_b, seeds);
    for p in &points {
        config_for(base, p).validate()?;
    }
    let results: Mutex<Vec<Option<Result<SummaryRow>>>> = Mutex::new(points.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, points.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let r = run(&config_for(base, &points[i])).map(|r| r.summary);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every point ran"))
        .collect()
}
