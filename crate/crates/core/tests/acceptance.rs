//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Scenario criteria use the desk preset over five seeds.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use panelsim::channel::{doppler_hz, FadingBank, FadingProcess, ShadowField, ShadowParams};
use panelsim::config::SimConfig;
use panelsim::engine::{config_for, run, sweep, SweepPoint};
use panelsim::geometry::{build_hex_layout, Vec2};
use panelsim::kpi::{normalize, outage_percent, KpiCounters, SummaryRow};
use panelsim::measure::{sinr_db, RsrpTensor};
use panelsim::mobility::A3Tracker;
use panelsim::mpue::{argmax_pair, best_panel_beam, select_serving, switch_accounting, Cause, SelectionChange, SwitchOffsets};
use panelsim::radio::Grip;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const PANELS: usize = 3;
const RX: usize = 7;

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Check {
        Check { ok: true, notes: Vec::new() }
    }

    fn require(&mut self, cond: bool, what: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.notes.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

/// Desk-scale scenario results keyed by (grip, o_p, o_b), one row per seed.
struct Runs {
    base: SimConfig,
    rows: HashMap<(Grip, u32, u32), Vec<SummaryRow>>,
}

fn key(grip: Grip, o_p: f64, o_b: f64) -> (Grip, u32, u32) {
    (grip, (o_p * 10.0) as u32, (o_b * 10.0) as u32)
}

impl Runs {
    fn new() -> Runs {
        Runs {
            base: SimConfig::desk(),
            rows: HashMap::new(),
        }
    }

    fn ensure(&mut self, grip: Grip, o_p: f64, o_b: f64) {
        if self.rows.contains_key(&key(grip, o_p, o_b)) {
            return;
        }
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
        let t0 = Instant::now();
        let rows = sweep(&self.base, &[grip], &[o_p], &[o_b], &SEEDS, workers).expect("desk sweep");
        eprintln!("  ran {grip} o_p={o_p} o_b={o_b} x{} in {:.0?}", SEEDS.len(), t0.elapsed());
        self.rows.insert(key(grip, o_p, o_b), rows);
    }

    fn get(&mut self, grip: Grip, o_p: f64, o_b: f64) -> &[SummaryRow] {
        self.ensure(grip, o_p, o_b);
        &self.rows[&key(grip, o_p, o_b)]
    }

    fn mean(&mut self, grip: Grip, o_p: f64, o_b: f64, f: impl Fn(&KpiCounters) -> f64) -> f64 {
        let rows = self.get(grip, o_p, o_b);
        rows.iter().map(|r| f(&r.counters)).sum::<f64>() / rows.len() as f64
    }
}

fn failures(k: &KpiCounters) -> f64 {
    k.failure_rate()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

// ---------------------------------------------------------------------------
// 1. Formula oracles

fn brute_best(t: &RsrpTensor, c: usize) -> (usize, usize) {
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for d in 0..t.panels {
        for r in 0..t.rx_beams {
            for b in 0..t.beams {
                let v = t.values[((c * t.beams + b) * t.panels + d) * t.rx_beams + r];
                if v > best.0 {
                    best = (v, d, r);
                }
            }
        }
    }
    (best.1, best.2)
}

/// Exhaustive 3×7 reading of the hysteresis rule.
fn brute_selection(slice: &[f64], cur: (usize, usize), o_p: f64, o_b: f64) -> (usize, usize) {
    let at = |d: usize, r: usize| slice[d * RX + r];
    let mut top = (f64::NEG_INFINITY, 0, 0);
    for d in 0..PANELS {
        for r in 0..RX {
            if at(d, r) > top.0 {
                top = (at(d, r), d, r);
            }
        }
    }
    let home = (0..RX).map(|r| at(cur.0, r)).fold(f64::NEG_INFINITY, f64::max);
    if top.1 != cur.0 && top.0 > home + o_p {
        return (top.1, top.2);
    }
    if home > at(cur.0, cur.1) + o_b {
        return (cur.0, (0..RX).find(|&r| at(cur.0, r) == home).unwrap());
    }
    cur
}

fn criterion_formulas() -> Check {
    let mut ck = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // Outage percentage and normalisation examples.
    ck.require(close(outage_percent(&[3000.0], 1, 30_000.0).unwrap(), 10.0), "outage 3 s of 30 s");
    ck.require(outage_percent(&[0.0, 0.0], 2, 30_000.0).unwrap() == 0.0, "outage zero");
    ck.require(
        close(outage_percent(&[55.0, 55.0], 2, 30_000.0).unwrap(), 110.0 / 60_000.0 * 100.0),
        "outage two RA interruptions",
    );
    ck.require(outage_percent(&[1.0], 1, 0.0).is_err(), "outage zero time is an error");
    ck.require(close(normalize(210.0, 420, 30.0).unwrap(), 1.0), "normalize 210 events");
    ck.require(normalize(0.0, 420, 30.0).unwrap() == 0.0, "normalize zero");

    // A3 entering condition: strict inequality, report on the TTT-th step.
    let ttt = 8;
    let mut a3 = A3Tracker::new(3);
    let equal = [-80.0, -78.0, -90.0];
    let mut fired = false;
    for _ in 0..20 {
        fired |= a3.step(0, &equal, 2.0, ttt).is_some();
    }
    ck.require(!fired, "A3 fired at exact offset equality");
    let mut a3 = A3Tracker::new(3);
    let above = [-80.0, -77.9, -90.0];
    let first = (1..=20).find(|_| a3.step(0, &above, 2.0, ttt).is_some());
    ck.require(first == Some(ttt as usize), format!("A3 report at step {first:?}, expected {ttt}"));
    let mut a3 = A3Tracker::new(3);
    // A miss at step `gap` restarts the count, so the report lands ttt steps later.
    let gap = 5;
    let mut reported = None;
    for n in 1..=20u32 {
        let q = if n == gap { equal } else { above };
        if a3.step(0, &q, 2.0, ttt).is_some() && reported.is_none() {
            reported = Some(n);
        }
    }
    let expected = gap + ttt;
    ck.require(
        reported == Some(expected),
        format!("interrupted A3 window reported at {reported:?}, expected {expected}"),
    );

    // Best panel / Rx beam over 10³ random tensors.
    let mut mismatches = 0;
    for _ in 0..1000 {
        let values: Vec<f64> = (0..2 * 12 * PANELS * RX).map(|_| rng.random_range(-140.0..-60.0)).collect();
        let t = RsrpTensor {
            cells: 2,
            beams: 12,
            panels: PANELS,
            rx_beams: RX,
            values,
        };
        for c in 0..2 {
            mismatches += (best_panel_beam(&t, c) != brute_best(&t, c)) as u32;
            let s = t.slice(c, 0);
            let (d, r) = argmax_pair(s, RX);
            let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            mismatches += (s[d * RX + r] != top) as u32;
        }
    }
    ck.require(mismatches == 0, format!("{mismatches} argmax mismatches"));

    // Switching hysteresis against the exhaustive rule.
    let mut mismatches = 0;
    for i in 0..1000 {
        let slice: Vec<f64> = (0..PANELS * RX).map(|_| (rng.random_range(-400..-240) as f64) * 0.25).collect();
        let cur = (rng.random_range(0..PANELS), rng.random_range(0..RX));
        let (o_p, o_b) = ((i % 4) as f64 * 3.0, ((i / 4) % 3) as f64 * 1.5);
        let got = select_serving(&slice, RX, cur, SwitchOffsets::new(o_p, o_b).unwrap()).map_or(cur, |(d, r, _)| (d, r));
        mismatches += (got != brute_selection(&slice, cur, o_p, o_b)) as u32;
    }
    ck.require(mismatches == 0, format!("{mismatches} hysteresis mismatches"));

    // Switch accounting on randomized selection logs.
    let causes = [Cause::Initial, Cause::PanelSwitch, Cause::RxbeamSwitch, Cause::Ho, Cause::TxBeamChange];
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(0..50);
        let log: Vec<SelectionChange> = (0..n)
            .map(|i| SelectionChange {
                t_ms: i * 20,
                from: (rng.random_range(0..PANELS), rng.random_range(0..RX)),
                to: (rng.random_range(0..PANELS), rng.random_range(0..RX)),
                cause: causes[rng.random_range(0..causes.len())],
            })
            .collect();
        let mut want = (0, 0);
        for e in &log {
            let panel_changed = e.from.0 != e.to.0;
            if panel_changed && !matches!(e.cause, Cause::Ho | Cause::TxBeamChange | Cause::Initial) {
                want.0 += 1;
            }
            if !panel_changed && e.from.1 != e.to.1 && !matches!(e.cause, Cause::Ho | Cause::PanelSwitch | Cause::Initial) {
                want.1 += 1;
            }
        }
        mismatches += (switch_accounting(&log) != want) as u32;
    }
    ck.require(mismatches == 0, format!("{mismatches} switch-accounting mismatches"));
    ck
}

// ---------------------------------------------------------------------------
// 2.–5. Scenario trends

fn criterion_grip_order(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let f: Vec<f64> = [Grip::Free, Grip::Rhb, Grip::Dhs, Grip::Dhg]
        .iter()
        .map(|&g| runs.mean(g, 0.0, 0.0, failures))
        .collect();
    let (free, rhb, dhs, dhg) = (f[0], f[1], f[2], f[3]);
    ck.note(format!("failures/UE/min FREE {free:.3} RHB {rhb:.3} DHS {dhs:.3} DHG {dhg:.3}"));
    ck.require(dhg > rhb, "DHG > RHB");
    ck.require(rhb > free, "RHB > FREE");
    ck.require(dhs < rhb, "DHS < RHB");
    ck.require(dhg >= 1.2 * free && dhg > 0.0, "DHG >= 1.2 x FREE");
    ck
}

fn criterion_panel_stay(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let stay = |runs: &mut Runs, g: Grip| -> [f64; 3] {
        let rows = runs.get(g, 0.0, 0.0);
        let mut total = KpiCounters::default();
        rows.iter().for_each(|r| total.merge(&r.counters));
        total.panel_stay_pct()
    };
    let dhg = stay(runs, Grip::Dhg);
    let free = stay(runs, Grip::Free);
    ck.note(format!("DHG P1+P3 {:.1}%, FREE P1/P2/P3 {:.1}/{:.1}/{:.1}%", dhg[0] + dhg[2], free[0], free[1], free[2]));
    ck.require(dhg[0] + dhg[2] > 90.0, "DHG P1+P3 > 90%");
    ck.require(dhg[0] + dhg[2] > free[0] + free[2], "DHG P1+P3 exceeds FREE");
    ck.require(free.iter().all(|&p| p <= 60.0), "FREE panels at most 60%");
    ck
}

fn criterion_offsets(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let g = Grip::Rhb;
    let offs = [0.0, 3.0, 6.0, 9.0];
    let panel: Vec<f64> = offs.iter().map(|&o| runs.mean(g, o, 0.0, |k| k.panel_switch_rate())).collect();
    let rx: Vec<f64> = offs.iter().map(|&o| runs.mean(g, 0.0, o, |k| k.rxbeam_switch_rate())).collect();
    ck.note(format!("panel sw/UE/min vs o_p {panel:.1?}; rx sw/UE/min vs o_b {rx:.1?}"));
    ck.require(panel[2] <= 0.30 * panel[0], "panel switches at 6 dB <= 30% of 0 dB");
    ck.require(rx[1] <= 0.75 * rx[0], "Rx switches at 3 dB <= 75% of 0 dB");
    ck.require(panel.windows(2).all(|w| w[1] <= w[0]), "panel switches monotone in o_p");
    ck.require(rx.windows(2).all(|w| w[1] <= w[0]), "Rx switches monotone in o_b");
    ck
}

fn criterion_offset_robustness(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let g = Grip::Rhb;
    let zero = runs.mean(g, 0.0, 0.0, failures);
    let mut worst: f64 = 0.0;
    for o_p in [0.0, 3.0, 6.0] {
        for o_b in [0.0, 3.0] {
            let f = runs.mean(g, o_p, o_b, failures);
            let dev = if zero > 0.0 { (f - zero).abs() / zero } else if f == 0.0 { 0.0 } else { f64::INFINITY };
            worst = worst.max(dev);
        }
    }
    let high = runs.mean(g, 12.0, 0.0, failures);
    ck.note(format!("zero-offset failures {zero:.3}, worst low-offset deviation {:.0}%, o_p=12 failures {high:.3}", worst * 100.0));
    ck.require(worst <= 0.20, "low offsets within 20% of zero offsets");
    ck.require(high > zero, "o_p = 12 dB exceeds zero offsets");
    ck
}

// ---------------------------------------------------------------------------
// 6. Channel properties

/// J0 from its power series.
fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

fn criterion_channel() -> Check {
    let mut ck = Check::new();
    let fd = doppler_hz(60.0 / 3.6, 28.0);

    // Autocorrelation of the per-link complex gain, averaged over links and time.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bank = FadingBank::new(fd, 2, 12, 21, &mut rng);
    let mut worst: f64 = 0.0;
    for lag_ms in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let lag = lag_ms * 1e-3;
        let (mut acc, mut n) = (0.0, 0);
        for c in 0..2 {
            for b in (0..12).step_by(3) {
                for l in (0..21).step_by(4) {
                    for i in 0..400 {
                        let t = i as f64 * 2.5e-3;
                        let (x, y) = (bank.gain(t, c, b, l), bank.gain(t + lag, c, b, l));
                        acc += x.0 * y.0 + x.1 * y.1;
                        n += 1;
                    }
                }
            }
        }
        let rho = acc / n as f64;
        worst = worst.max((rho - bessel_j0(2.0 * PI * fd * lag)).abs());
    }
    ck.note(format!("max |rho - J0| {worst:.3}"));
    ck.require(worst <= 0.1, "autocorrelation within 0.1 of J0 up to 0.5 ms");

    // Shadow field marginal sigma and decorrelation distance.
    let layout = build_hex_layout(200.0).unwrap();
    let r = layout.region_circumradius();
    for (seed, params) in [
        (31, ShadowParams { sigma_db: 4.0, decorrelation_m: 10.0 }),
        (32, ShadowParams { sigma_db: 7.82, decorrelation_m: 13.0 }),
    ] {
        let field = ShadowField::new(params, &layout, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 7);
        let n = 10_000;
        let (mut s1, mut s2, mut sxy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let p = Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
            let q = p + Vec2::from_polar(params.decorrelation_m, rng.random_range(0.0..2.0 * PI));
            let (a, b) = (field.value(p), field.value(q));
            s1 += a;
            s2 += a * a;
            sxy += a * b;
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = s2 / nf - mean * mean;
        let rho = (sxy / nf - mean * mean) / var;
        let sd = var.sqrt();
        ck.note(format!("sigma {:.2}/{} dB, rho(d_corr) {rho:.2}", sd, params.sigma_db));
        ck.require((sd / params.sigma_db - 1.0).abs() <= 0.05, "shadow sigma within 5%");
        ck.require((rho - (-1f64).exp()).abs() <= 0.1, "shadow correlation at decorrelation distance");
    }

    // Fading power normalisation over 10 s at 60 km/h.
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let p = FadingProcess::new(fd, &mut ChaCha8Rng::seed_from_u64(seed));
        let steps = 100_000;
        let mean = (0..steps).map(|i| p.power(i as f64 * 1e-4)).sum::<f64>() / steps as f64;
        worst = worst.max((mean - 1.0).abs());
        let bank = FadingBank::new(fd, 1, 1, 1, &mut ChaCha8Rng::seed_from_u64(seed + 50));
        let mean = (0..steps).map(|i| bank.power(i as f64 * 1e-4, 0, 0, 0)).sum::<f64>() / steps as f64;
        worst = worst.max((mean - 1.0).abs());
    }
    ck.note(format!("max power deviation {:.1}%", worst * 100.0));
    ck.require(worst <= 0.02, "fading power within 2%");
    ck
}

// ---------------------------------------------------------------------------
// 7. SINR estimator

fn criterion_sinr() -> Check {
    let mut ck = Check::new();
    let lin = |db: f64| 10f64.powf(db / 10.0);
    let signal = lin(-70.0);
    let noise = lin(-84.0);
    let a: Vec<f64> = [-72.0, -80.0, -90.0, -100.0].iter().map(|&x| lin(x)).collect();
    let b: Vec<f64> = [-75.0, -77.0, -95.0, -110.0].iter().map(|&x| lin(x)).collect();
    let mut exact = 0.0;
    for ia in &a {
        for ib in &b {
            exact += signal / (noise + ia + ib);
        }
    }
    let exact_db = 10.0 * (exact / 16.0).log10();
    let est = sinr_db(signal, noise, &[&a, &b], 100_000, &mut ChaCha8Rng::seed_from_u64(7));
    ck.note(format!("estimate {est:.3} dB, exhaustive {exact_db:.3} dB"));
    ck.require((est - exact_db).abs() <= 0.1, "within 0.1 dB");
    ck
}

// ---------------------------------------------------------------------------
// 8. Determinism, 9. Wrap-around

fn criterion_determinism(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let base = runs.base.clone();
    let rows = runs.get(Grip::Rhb, 3.0, 0.0).to_vec();
    for (i, row) in rows.iter().enumerate().take(2) {
        let p = SweepPoint {
            grip: Grip::Rhb,
            o_p_db: 3.0,
            o_b_db: 0.0,
            seed: SEEDS[i],
        };
        let again = run(&config_for(&base, &p)).expect("run").summary;
        ck.require(again.to_csv() == row.to_csv(), format!("seed {} row differs", SEEDS[i]));
    }
    ck
}

fn criterion_wrap(runs: &mut Runs) -> Check {
    let mut ck = Check::new();
    let reference = runs.get(Grip::Free, 0.0, 0.0)[0].clone();
    let mut cfg = runs.base.clone();
    cfg.simulation.seed = reference.seed;
    for shift in 1..=6 {
        cfg.geometry.drop_shift = shift;
        let got = run(&cfg).expect("run").summary;
        ck.require(got.counters == reference.counters, format!("replica offset {shift} changes the KPIs"));
    }
    ck
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut runs = Runs::new();
    let criteria: Vec<(u32, &str, Box<dyn FnOnce(&mut Runs) -> Check>)> = vec![
        (1, "formula oracles", Box::new(|_| criterion_formulas())),
        (2, "grip failure ordering", Box::new(criterion_grip_order)),
        (3, "panel stay", Box::new(criterion_panel_stay)),
        (4, "offset sweep trends", Box::new(criterion_offsets)),
        (5, "offset robustness", Box::new(criterion_offset_robustness)),
        (6, "channel properties", Box::new(|_| criterion_channel())),
        (7, "SINR estimator", Box::new(|_| criterion_sinr())),
        (8, "determinism", Box::new(criterion_determinism)),
        (9, "wrap-around", Box::new(criterion_wrap)),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let ck = check(&mut runs);
        let verdict = if ck.ok { "PASS" } else { "FAIL" };
        failed += (!ck.ok) as u32;
        println!("{verdict} {id} {name}: {}", ck.notes.join("; "));
    }
    eprintln!("acceptance finished in {:.0?}", started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
