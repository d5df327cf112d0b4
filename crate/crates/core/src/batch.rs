//! Independent runs fanned out over a rayon pool. Each job owns its engine;
//! nothing is shared between runs, so results match the sequential path
//! element for element. Without the `parallel` feature every mode runs
//! sequentially.

use crate::blocktree::OracleConfig;
use crate::lang::Scenario;
use crate::runtime::{run_with, RunOptions, Trace};
use crate::workload::{append_campaign, CampaignReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Parallel,
    Sequential,
}

pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// One trace per seed, in seed order.
pub fn run_seeds(mode: Mode, scenario: &Scenario, seeds: &[u64]) -> Vec<Trace> {
    map(mode, seeds, |&seed| {
        let mut options = RunOptions::for_scenario(scenario);
        options.seed = seed;
        run_with(scenario, options).trace
    })
}

/// Runs every scenario with its own settings; `check_consistency` turns on
/// the per-commit claim store check. Returns each trace with the violations
/// found.
pub fn run_batch(mode: Mode, scenarios: &[Scenario], check_consistency: bool) -> Vec<(Trace, Vec<String>)> {
    map(mode, scenarios, |s| {
        let mut options = RunOptions::for_scenario(s);
        options.check_consistency = check_consistency;
        let out = run_with(s, options);
        (out.trace, out.consistency_violations)
    })
}

/// One append campaign per seed.
pub fn campaigns(mode: Mode, seeds: &[u64], oracle: OracleConfig, ops: usize) -> Vec<Result<CampaignReport, String>> {
    map(mode, seeds, |&seed| append_campaign(seed, oracle, ops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::random_scenario;

    #[test]
    fn modes_agree() {
        let seeds: Vec<u64> = (0..24).collect();
        assert_eq!(
            campaigns(Mode::Parallel, &seeds, OracleConfig::Frugal(2), 50),
            campaigns(Mode::Sequential, &seeds, OracleConfig::Frugal(2), 50)
        );
        let scenarios: Vec<Scenario> = seeds.iter().map(|&s| random_scenario(s)).collect();
        assert_eq!(
            run_batch(Mode::Parallel, &scenarios, false),
            run_batch(Mode::Sequential, &scenarios, false)
        );
        assert_eq!(
            run_seeds(Mode::Parallel, &scenarios[0], &seeds),
            run_seeds(Mode::Sequential, &scenarios[0], &seeds)
        );
    }
}
