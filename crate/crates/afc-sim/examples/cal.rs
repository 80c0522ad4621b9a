use afc_sim::analysis::run_scenario;
use afc_sim::config::ScenarioConfig;
use num_complex::Complex64;

fn probe(cfg: &ScenarioConfig, label: &str) {
    let t0 = std::time::Instant::now();
    let out = match run_scenario(cfg) {
        Ok(o) => o,
        Err(e) => {
            println!("{label}: ERR {e}");
            return;
        }
    };
    let m = &out.metrics;
    let e = |i: usize| m.eta_per_echo.get(i).copied().unwrap_or(0.0);
    let hw = out.hole_width_hz.map_or(-1.0, |w| w / 1e6);
    println!(
        "{label}: contrast {:.3}  hw {hw:6.1}MHz  pod {:.2}  eta1 {:.4} eta2 {:.4} eta3 {:.4}  tot {:.4}  nvis {:2}  trans {:.3}  [{:.0}s]",
        out.contrast, out.peak_od,
        e(0), e(1), e(2),
        m.eta_total, m.n_visible, m.transmitted_fraction,
        t0.elapsed().as_secs_f64()
    );
}

// per-echo window peaks + full-train local max + beat-model argmax
fn echoes(cfg: &ScenarioConfig, label: &str) {
    let out = match run_scenario(cfg) {
        Ok(o) => o,
        Err(e) => {
            println!("{label}: ERR {e}");
            return;
        }
    };
    let v = cfg.validate().unwrap();
    let tau = 1.0 / v.comb.rep_rate_hz();
    let peaks: Vec<f64> = (1..=12)
        .map(|k| {
            let c = k as f64 * tau;
            out.trace.peak_in(c - tau / 2.0, c + tau / 2.0).1
        })
        .collect();
    let p1 = peaks[0].max(1e-300);
    let rel: Vec<String> = peaks.iter().map(|p| format!("{:.4}", p / p1)).collect();
    // full local max among k=2..11 inside 80..130 ns
    let mut full = None::<(usize, f64)>;
    for k in 2..=11usize {
        let t = k as f64 * tau;
        if (80e-9..=130e-9).contains(&t)
            && peaks[k - 1] > peaks[k - 2]
            && peaks[k - 1] > peaks[k]
            && full.map_or(true, |(_, b)| peaks[k - 1] > b)
        {
            full = Some((k, peaks[k - 1]));
        }
    }
    // model argmax over 75..135 ns with hole = measured width
    let hole = out.hole_width_hz.unwrap_or(25e6);
    let sp = v.scheme.excited_splittings_hz();
    let offs = [0.0, sp[0], sp[0] + sp[1]];
    let times: Vec<f64> = (0..1200).map(|i| 75e-9 + i as f64 * 0.05e-9).collect();
    let env = afc_sim::echo::beat_envelope_model(
        &[Complex64::new(1.0, 0.0); 3],
        &offs,
        hole,
        &times,
    )
    .unwrap();
    let (mut tm, mut best) = (75e-9, f64::MIN);
    for (t, m) in times.iter().zip(&env) {
        if *m > best {
            (tm, best) = (*t, *m);
        }
    }
    println!(
        "{label}: contrast {:.3} hw {:.1}MHz nvis {} | k1..k12 {} | full max {:?} | model {:.1}ns",
        out.contrast,
        hole / 1e6,
        out.metrics.n_visible,
        rel.join(" "),
        full.map(|(k, _)| format!("k{k}={:.1}ns", k as f64 * tau * 1e9)),
        tm * 1e9
    );
}

fn with(det: f64, rate: f64, dur: f64, dt: f64, amp: f64, nreal: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset("pr_yso_default").unwrap();
    cfg.line.shape = afc_sim::spectral::LineShape::Lorentzian;
    cfg.line.fwhm_hz = 10e9;
    cfg.comb.n_teeth_half = 120;
    cfg.comb.center_offset_hz = det;
    cfg.pulse.center_offset_hz = det;
    cfg.burn.pump_rate_per_s = rate;
    cfg.burn.duration_s = dur;
    cfg.burn.dt_s = dt;
    cfg.jitter.center_amplitude_hz = amp;
    cfg.jitter.rep_rate_amplitude_hz = 1e3;
    cfg.jitter.n_realizations = nreal;
    cfg.grid.span_hz = 360e9;
    cfg.grid.n_points = 2097152;
    cfg
}

fn main() {
    let phase: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    match phase {
        // c5 calibration: line-center contrast at 2 s vs pump rate
        1 => {
            for rate in [60.0, 80.0, 100.0, 120.0] {
                probe(&with(0.0, rate, 2.0, 0.01, 12e6, 1), &format!("r{rate:3.0} 2s"));
            }
        }
        // c7 operating point: extended line-center burn, echo-train shape
        2 => {
            let rate: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(80.0);
            for (dur, dt) in [(30.0, 0.06), (40.0, 0.08), (60.0, 0.12)] {
                echoes(&with(0.0, rate, dur, dt, 12e6, 1), &format!("r{rate:.0} {dur}s"));
            }
        }
        // c6: detuning behavior at the 2 s protocol
        3 => {
            let rate: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(80.0);
            for det in [3.3e9, 6.6e9, 8.8e9, 11.0e9, 15.4e9, 21.0e9] {
                probe(&with(det, rate, 2.0, 0.01, 12e6, 1), &format!("d{:4.1}G", det / 1e9));
            }
        }
        // eta levers at the efficiency-max detunings
        6 => {
            for (amp, dur, dt) in [(12e6, 150.0, 0.06), (15e6, 75.0, 0.06), (15e6, 150.0, 0.06)] {
                for det in [6.6e9, 8.8e9] {
                    let label = format!("A{:.0} {dur}s d{:3.1}G", amp / 1e6, det / 1e9);
                    probe(&with(det, 80.0, dur, dt, amp, 1), &label);
                }
            }
        }
        // c6 at converged dose: full sweep grid
        5 => {
            let rate: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(80.0);
            for det in [0.0, 3.3e9, 6.6e9, 8.8e9, 11.0e9, 13.2e9, 15.4e9, 18.7e9, 21.0e9] {
                probe(&with(det, rate, 75.0, 0.06, 12e6, 1), &format!("d{:4.1}G", det / 1e9));
            }
        }
        // c5 growth variant: drift amplitude scaling with burn time
        4 => {
            let rate: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(80.0);
            for (dur, amp) in [
                (3.5, 24.2e6),
                (5.0, 24e6),
                (5.0, 30e6),
                (5.0, 37.7e6),
                (5.0, 42e6),
            ] {
                let label = format!("grown {dur}s A{:.0}", amp / 1e6);
                probe(&with(0.0, rate, dur, 0.01, amp, 1), &label);
            }
        }
        _ => eprintln!("unknown phase"),
    }
}
