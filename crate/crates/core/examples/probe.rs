//! Scratch probe: feasibility of the proposed scheme vs handover price.

use leocoop::harness::{run_trials, ExperimentConfig, Scheme};

fn main() {
    for p_ho_dbm in [30.0, 50.0, 70.0] {
        let mut cfg = ExperimentConfig::desk();
        cfg.schemes = vec![Scheme::Proposed];
        cfg.p_ho_dbm = p_ho_dbm;
        cfg.n_trials = 6;
        let rows = run_trials(&cfg).unwrap();
        let mut by_trial: std::collections::BTreeMap<usize, Vec<(usize, String, usize)>> =
            Default::default();
        for r in &rows {
            by_trial
                .entry(r.trial)
                .or_default()
                .push((r.frame, r.status.clone(), r.ho_events));
        }
        println!("=== p_ho_dbm = {p_ho_dbm}");
        for (t, frames) in &by_trial {
            let feas = frames.iter().all(|(_, s, _)| s == "feasible");
            let ho: usize = frames.iter().map(|f| f.2).sum();
            println!(
                "  trial {t}: feasible={feas} ho={ho} statuses={:?}",
                frames.iter().map(|f| f.1.as_str()).collect::<Vec<_>>()
            );
        }
    }
}
