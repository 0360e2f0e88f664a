use cowu_core::sim::{cowu_sweep_campaign, run_campaign, success_count_histogram, Schedule};
use cowu_core::{cowu_curve, gamma_round_robin, success_distribution, EnergyModel, RangeQuery, ScenarioConfig};

fn small() -> ScenarioConfig {
    ScenarioConfig {
        nodes: 8,
        states: 10,
        q: 0.01,
        q_hat: None,
        range: RangeQuery::new(4, 7).unwrap(),
        slots_per_tx: 3,
        p: 0.2,
        zeta_max: 120,
    }
}

fn z_score(hits: f64, n: f64, p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return if (hits / n - p).abs() == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (hits / n - p) / (p * (1.0 - p) / n).sqrt()
}

#[test]
fn delivered_counts_follow_the_chain() {
    let cfg = small();
    let zeta = 25;
    let hist = success_count_histogram(&cfg, &EnergyModel::default(), zeta, 20_000, 11).unwrap();
    let params = cfg.csma().unwrap();
    let mut tested = 0;
    for (w, row) in hist.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total < 500 {
            continue;
        }
        let ps = success_distribution(w, params, zeta);
        for (ws, &count) in row.iter().enumerate().take(w + 1) {
            let z = z_score(count as f64, total as f64, ps.get(ws));
            assert!(z.abs() <= 3.0, "w={w} ws={ws}: z = {z}");
            tested += 1;
        }
    }
    assert!(tested >= 10);
}

#[test]
fn simulated_cowu_accuracy_tracks_the_analysis() {
    let cfg = small();
    let rounds = 20_000;
    let curve = cowu_curve(&cfg).unwrap();
    let sim = cowu_sweep_campaign(&cfg, &EnergyModel::default(), cfg.zeta_max, rounds, 3).unwrap();
    for zeta in [1u64, 5, 10, 20, 40, 80, 120] {
        let g = curve[zeta as usize].gamma;
        let z = z_score(sim.matches[zeta as usize] as f64, rounds as f64, g);
        assert!(z.abs() <= 3.0, "zeta={zeta}: analytic {g}, simulated {}", sim.gamma(zeta).mean);
    }
}

#[test]
fn simulated_round_robin_tracks_the_analysis() {
    let cfg = small();
    let rounds = 20_000;
    let s = run_campaign(&cfg, &EnergyModel::default(), Schedule::RoundRobin, rounds, 5).unwrap();
    let g = gamma_round_robin(&cfg).unwrap().gamma;
    let z = z_score(s.gamma.mean * rounds as f64, rounds as f64, g);
    assert!(z.abs() <= 3.0, "analytic {g}, simulated {}", s.gamma.mean);
    assert_eq!(s.energy_j.std_error, 0.0);
}
