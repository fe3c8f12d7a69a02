use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CampaignReport, Mode};
use crate::mock::{BlockId, ProfileKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompareError {
    #[error("need at least 2 reports, got {0}")]
    TooFewReports(usize),
    #[error("reports cover different profiles: {0} and {1}")]
    MismatchedProfile(ProfileKind, ProfileKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub average: f64,
    pub median: f64,
    pub max: usize,
    /// Size of the union of all runs' block sets.
    pub combined: usize,
    /// Runs that reached an application-layer block.
    pub app_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub profile: ProfileKind,
    pub modes: Vec<ModeSummary>,
    /// Percentage gain of the pemu average over the base average.
    pub relative_improvement: Option<f64>,
}

impl AblationSummary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn render(&self) -> String {
        let mut s = format!("profile {}\n", self.profile);
        s.push_str("mode  runs  average   median  max  combined  app-runs\n");
        for m in &self.modes {
            s.push_str(&format!(
                "{:<5} {:>4} {:>8.1} {:>8.1} {:>4} {:>9} {:>9}\n",
                m.mode, m.runs, m.average, m.median, m.max, m.combined, m.app_runs
            ));
        }
        if let Some(r) = self.relative_improvement {
            s.push_str(&format!("rel imp (pemu over base): {r:.1}%\n"));
        }
        s
    }
}

pub fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => values[n / 2] as f64,
        _ => (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0,
    }
}

/// Per-mode block statistics over reports of one profile.
pub fn compare_reports(reports: &[CampaignReport]) -> Result<AblationSummary, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFewReports(reports.len()));
    }
    let profile = reports[0].config.profile;
    if let Some(r) = reports.iter().find(|r| r.config.profile != profile) {
        return Err(CompareError::MismatchedProfile(profile, r.config.profile));
    }
    let mut by_mode: BTreeMap<Mode, Vec<&CampaignReport>> = BTreeMap::new();
    for r in reports {
        by_mode.entry(r.config.mode).or_default().push(r);
    }
    let modes: Vec<ModeSummary> = by_mode
        .into_iter()
        .map(|(mode, runs)| {
            let mut counts: Vec<usize> = runs.iter().map(|r| r.final_blocks).collect();
            let union: BTreeSet<BlockId> = runs.iter().flat_map(|r| r.blocks.iter().copied()).collect();
            ModeSummary {
                mode,
                runs: runs.len(),
                average: counts.iter().sum::<usize>() as f64 / runs.len() as f64,
                max: counts.iter().copied().max().unwrap_or(0),
                median: median(&mut counts),
                combined: union.len(),
                app_runs: runs.iter().filter(|r| r.reached_app()).count(),
            }
        })
        .collect();
    let avg = |m: Mode| modes.iter().find(|s| s.mode == m).map(|s| s.average);
    let relative_improvement = match (avg(Mode::Base), avg(Mode::Pemu)) {
        (Some(b), Some(p)) if b > 0.0 => Some((p - b) / b * 100.0),
        _ => None,
    };
    Ok(AblationSummary {
        profile,
        modes,
        relative_improvement,
    })
}
