//! Ensemble neural-network selection: bootstrap-bagged stage-wise runs with an
//! appearance-frequency filter, repeated until the target size is reached.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dnp::{self, DnpConfig};
use crate::error::{invalid, Error, Result};
use crate::nn::NetworkArchitecture;
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    /// Draws with replacement.
    Bootstrap,
    /// Draws without replacement.
    Subsample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnnsConfig {
    /// Bags per round (`B₂`).
    pub num_bags: usize,
    /// Observations per bag (`n_r`); `None` uses `n`.
    pub bootstrap_size: Option<usize>,
    pub resampling: Resampling,
    /// A feature survives a round if it appears in at least `⌊B₂·p_s⌋` bags.
    pub appearance_proportion: f64,
    /// Final number of features (`s₀`).
    pub target: usize,
    /// Features requested per round (`s_j`); `None` requests everything still missing.
    pub per_round: Option<usize>,
    pub dnp: DnpConfig,
    pub seed: u64,
}

impl Default for EnnsConfig {
    fn default() -> Self {
        EnnsConfig {
            num_bags: 10,
            bootstrap_size: None,
            resampling: Resampling::Bootstrap,
            appearance_proportion: 0.3,
            target: 1,
            per_round: None,
            dnp: DnpConfig::default(),
            seed: 0,
        }
    }
}

impl EnnsConfig {
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.num_bags == 0 {
            return Err(invalid("number of bags must be positive"));
        }
        if !(self.appearance_proportion > 0.0 && self.appearance_proportion <= 1.0) {
            return Err(invalid("appearance proportion must lie in (0, 1]"));
        }
        if appearance_threshold(self.num_bags, self.appearance_proportion) == 0 {
            return Err(invalid("num_bags × appearance_proportion must be at least 1"));
        }
        if self.target == 0 || self.target > data.p() {
            return Err(invalid(format!("target {} must lie in 1..={}", self.target, data.p())));
        }
        if let Some(sj) = self.per_round {
            if sj == 0 || sj > self.target {
                return Err(invalid("per-round count must lie in 1..=target"));
            }
        }
        if let Some(nr) = self.bootstrap_size {
            if nr == 0 || nr > data.n() {
                return Err(invalid(format!("bootstrap size must lie in 1..={}", data.n())));
            }
        }
        self.dnp.validate()
    }

    /// Rounds allowed before giving up: `5·⌈s₀/s_j⌉`.
    pub fn round_limit(&self) -> usize {
        let sj = self.per_round.unwrap_or(self.target).max(1);
        5 * self.target.div_ceil(sj)
    }
}

/// `⌊bags · proportion⌋`, tolerant of representation error in the product.
pub fn appearance_threshold(bags: usize, proportion: f64) -> usize {
    (bags as f64 * proportion + 1e-9).floor() as usize
}

/// `n_r` uniform draws with replacement from `0..n`.
pub fn bootstrap_indices(n: usize, n_r: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n_r).map(|_| rng.gen_range(0..n)).collect()
}

/// `n_r` distinct draws from `0..n`.
pub fn subsample_indices(n: usize, n_r: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut idx = index::sample(&mut rng, n, n_r.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

/// Seed of the stage-wise run in bag `bag` of round `round`.
pub fn bag_seed(master: u64, round: usize, bag: usize) -> u64 {
    seed::derive(master, seed::STREAM_BAG, ((round as u64) << 32) | bag as u64)
}

/// Appearance statistics over a set of bag results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BagFilter {
    /// Survivors ranked by count (desc), mean admission position (asc), index (asc).
    pub survivors: Vec<usize>,
    pub counts: BTreeMap<usize, usize>,
    pub threshold: usize,
}

/// Keeps features appearing in at least `⌊B·p_s⌋` of the bags.
pub fn filter_bags(bags: &[Vec<usize>], appearance_proportion: f64) -> BagFilter {
    let threshold = appearance_threshold(bags.len(), appearance_proportion).max(1);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut position_sums: BTreeMap<usize, usize> = BTreeMap::new();
    for bag in bags {
        // A feature counts once per bag.
        let mut seen = BTreeSet::new();
        for (pos, &j) in bag.iter().enumerate() {
            if seen.insert(j) {
                *counts.entry(j).or_default() += 1;
                *position_sums.entry(j).or_default() += pos;
            }
        }
    }
    let mut survivors: Vec<usize> = counts
        .iter()
        .filter(|(_, &c)| c >= threshold)
        .map(|(&j, _)| j)
        .collect();
    // Compare mean positions sum_a/count_a < sum_b/count_b in integers.
    survivors.sort_by(|&a, &b| {
        let (ca, cb) = (counts[&a], counts[&b]);
        cb.cmp(&ca)
            .then_with(|| (position_sums[&a] * cb).cmp(&(position_sums[&b] * ca)))
            .then_with(|| a.cmp(&b))
    });
    BagFilter {
        survivors,
        counts,
        threshold,
    }
}

/// Result of one ensemble round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub filter: BagFilter,
    /// Per-bag selections (global indices); `None` for bags that failed twice.
    pub bags: Vec<Option<Vec<usize>>>,
    pub warnings: Vec<String>,
}

/// Runs `B₂` stage-wise selections of `s_j` features on resampled rows
/// restricted to `active` columns, then filters by appearance count.
///
/// A single-bag ensemble uses the full sample, so it reduces to one
/// stage-wise run. A failed bag is retried once with a fresh seed, then
/// dropped (and `B₂` reduced accordingly).
pub fn enns_round(
    data: &Dataset,
    arch: &NetworkArchitecture,
    active: &[usize],
    s_j: usize,
    cfg: &EnnsConfig,
    round: usize,
) -> Result<RoundOutcome> {
    if s_j == 0 || s_j > active.len() {
        return Err(invalid(format!(
            "cannot select {s_j} features from {} active ones",
            active.len()
        )));
    }
    let n = data.n();
    let n_r = cfg.bootstrap_size.unwrap_or(n);
    let restricted = data.select_columns(active)?;

    let run_bag = |b: usize| -> std::result::Result<Vec<usize>, Vec<String>> {
        let mut errors = Vec::new();
        for attempt in 0..2u64 {
            let bseed = if attempt == 0 {
                bag_seed(cfg.seed, round, b)
            } else {
                seed::derive(bag_seed(cfg.seed, round, b), seed::STREAM_BAG, attempt)
            };
            let sample = if cfg.num_bags == 1 {
                Ok(restricted.clone())
            } else {
                let rseed = seed::derive(bseed, seed::STREAM_RESAMPLE, 0);
                let rows = match cfg.resampling {
                    Resampling::Bootstrap => bootstrap_indices(n, n_r, rseed),
                    Resampling::Subsample => subsample_indices(n, n_r, rseed),
                };
                restricted.select_rows(&rows)
            };
            let result = sample.and_then(|s| dnp::dnp_run(&s, arch, s_j, &cfg.dnp, bseed));
            match result {
                Ok(local) => return Ok(local.into_iter().map(|k| active[k]).collect()),
                Err(e) => errors.push(format!("round {round}, bag {b}, attempt {}: {e}", attempt + 1)),
            }
        }
        Err(errors)
    };

    let results: Vec<_> = (0..cfg.num_bags).into_par_iter().map(run_bag).collect();
    let mut warnings = Vec::new();
    let mut bags = Vec::with_capacity(results.len());
    let mut completed = Vec::new();
    for r in results {
        match r {
            Ok(sel) => {
                completed.push(sel.clone());
                bags.push(Some(sel));
            }
            Err(errs) => {
                warnings.extend(errs);
                bags.push(None);
            }
        }
    }
    if completed.is_empty() {
        return Err(Error::Numerical(format!(
            "every bag failed in round {round}: {}",
            warnings.join("; ")
        )));
    }
    Ok(RoundOutcome {
        filter: filter_bags(&completed, cfg.appearance_proportion),
        bags,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionReport {
    /// Selected features (0-based) in the order they entered.
    pub selected: Vec<usize>,
    /// Appearance counts per executed round.
    pub per_round_appearances: Vec<BTreeMap<usize, usize>>,
    pub rounds_executed: usize,
    /// False when the round limit stopped the search before `s₀` features were found.
    pub complete: bool,
    pub warnings: Vec<String>,
}

/// Ensemble selection of `cfg.target` features.
pub fn enns_select(data: &Dataset, arch: &NetworkArchitecture, cfg: &EnnsConfig) -> Result<SelectionReport> {
    cfg.validate(data)?;
    let per_round = cfg.per_round.unwrap_or(cfg.target);
    let limit = cfg.round_limit();
    let mut selected: Vec<usize> = Vec::new();
    let mut active: Vec<usize> = (0..data.p()).collect();
    let mut report = SelectionReport {
        selected: Vec::new(),
        per_round_appearances: Vec::new(),
        rounds_executed: 0,
        complete: false,
        warnings: Vec::new(),
    };

    while selected.len() < cfg.target && report.rounds_executed < limit && !active.is_empty() {
        let needed = cfg.target - selected.len();
        let s_j = per_round.min(needed).min(active.len());
        let outcome = enns_round(data, arch, &active, s_j, cfg, report.rounds_executed)?;
        report.rounds_executed += 1;
        report.warnings.extend(outcome.warnings);
        report.per_round_appearances.push(outcome.filter.counts);
        let admitted: Vec<usize> = outcome.filter.survivors.into_iter().take(needed).collect();
        active.retain(|j| !admitted.contains(j));
        selected.extend(admitted);
    }
    report.complete = selected.len() == cfg.target;
    report.selected = selected;
    Ok(report)
}
