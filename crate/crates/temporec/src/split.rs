//! Train/validation/test construction under the traditional (random
//! holdout) and the two temporal protocols (proportional selection,
//! strict cutoff), for development and deployment-ready phases.
//!
//! Interactions here are dense-indexed `(timestamp, item)` pairs grouped
//! per user. Every holdout keeps inputs and targets disjoint and nonempty
//! per evaluated user; users a protocol cannot evaluate are tallied, never
//! silently dropped.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{InteractionLog, ItemCatalog, SparseUserItemMatrix, UserIndex};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Development,
    DeploymentReady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Traditional,
    Proportional,
    StrictCutoff,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Traditional => "traditional",
            Protocol::Proportional => "proportional",
            Protocol::StrictCutoff => "strict_cutoff",
        }
    }
}

/// One user's evaluation material: disjoint input and target interactions,
/// both in `(timestamp, item)` order. `withheld` records interactions
/// removed from the input side by leakage rules (they are in no set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserHoldout {
    pub user: usize,
    pub inputs: Vec<(i64, usize)>,
    pub targets: Vec<(i64, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub withheld: Vec<(i64, usize)>,
}

impl UserHoldout {
    /// Input item indices, sorted ascending.
    pub fn input_items(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.inputs.iter().map(|&(_, i)| i).collect();
        v.sort_unstable();
        v
    }

    /// Target item indices, sorted ascending.
    pub fn target_items(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.targets.iter().map(|&(_, i)| i).collect();
        v.sort_unstable();
        v
    }
}

/// Users a holdout could not evaluate, by reason.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub too_few: Vec<usize>,
    pub no_input: Vec<usize>,
    pub no_target: Vec<usize>,
}

impl Exclusions {
    pub fn total(&self) -> usize {
        self.too_few.len() + self.no_input.len() + self.no_target.len()
    }

    pub fn all_users(&self) -> Vec<usize> {
        let mut v = self.too_few.clone();
        v.extend_from_slice(&self.no_input);
        v.extend_from_slice(&self.no_target);
        v.sort_unstable();
        v
    }
}

/// Per-user evaluation sets for one protocol and phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSplit {
    pub phase: Phase,
    pub protocol: Protocol,
    pub cutoff_time: Option<i64>,
    pub holdout_fraction: Option<f64>,
    pub users: Vec<UserHoldout>,
    pub exclusions: Exclusions,
}

/// Per-user interaction lists keyed by dense user index, each sorted by
/// `(timestamp, item)`.
pub type UserItems = BTreeMap<usize, Vec<(i64, usize)>>;

/// Group a log into dense-indexed per-user interaction lists.
pub fn group_by_user(
    log: &InteractionLog,
    catalog: &ItemCatalog,
    users: &UserIndex,
) -> Result<UserItems> {
    let mut grouped: UserItems = BTreeMap::new();
    for r in log.records() {
        let u = users.index_of(&r.user).ok_or_else(|| {
            Error::ContractViolation(format!("user `{}` missing from index", r.user))
        })?;
        let i = catalog.index_of(&r.item).ok_or_else(|| {
            Error::ContractViolation(format!("item `{}` missing from catalog", r.item))
        })?;
        grouped.entry(u).or_default().push((r.timestamp, i));
    }
    for list in grouped.values_mut() {
        list.sort_unstable();
    }
    Ok(grouped)
}

/// The timestamp at the global `q`-quantile of a time list: with times
/// sorted ascending, the element at index `ceil(q * n) - 1`.
pub fn quantile_timestamp(times: &[i64], q: f64) -> Result<i64> {
    if !(0.0 < q && q < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "quantile must lie in (0, 1), got {q}"
        )));
    }
    if times.is_empty() {
        return Err(Error::EmptySplit("quantile of an empty time list".into()));
    }
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    let idx = ((q * sorted.len() as f64).ceil() as usize)
        .saturating_sub(1)
        .min(sorted.len() - 1);
    Ok(sorted[idx])
}

/// Partition users into disjoint train/val/test sets by shuffling and
/// largest-remainder rounding of the requested fractions.
pub fn partition_users(
    n_users: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (ft, fv, fe) = fractions;
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "user fractions must sum to 1, got {}",
            ft + fv + fe
        )));
    }
    if ft < 0.0 || fv < 0.0 || fe < 0.0 {
        return Err(Error::InvalidConfig("negative user fraction".into()));
    }

    let fracs = [ft, fv, fe];
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    for (k, f) in fracs.iter().enumerate() {
        let exact = f * n_users as f64;
        counts[k] = exact.floor() as usize;
        remainders[k] = exact - exact.floor();
    }
    let mut leftover = n_users - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .partial_cmp(&remainders[a])
            .expect("remainders finite")
            .then(a.cmp(&b))
    });
    for &k in &order {
        if leftover == 0 {
            break;
        }
        counts[k] += 1;
        leftover -= 1;
    }
    if counts.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "user partition {counts:?} leaves a set empty"
        )));
    }

    let mut ids: Vec<usize> = (0..n_users).collect();
    use rand::seq::SliceRandom;
    ids.shuffle(&mut seeds::rng(seed, "partition-users", 0));
    let mut train: Vec<usize> = ids[..counts[0]].to_vec();
    let mut val: Vec<usize> = ids[counts[0]..counts[0] + counts[1]].to_vec();
    let mut test: Vec<usize> = ids[counts[0] + counts[1]..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}

fn holdout_count(n: usize, fraction: f64) -> usize {
    // ceil(fraction * n), clamped so at least one input remains
    let h = (fraction * n as f64).ceil() as usize;
    h.clamp(1, n - 1)
}

/// Random holdout: per user, `ceil(fraction * n)` interactions sampled
/// uniformly become targets. Users with fewer than 2 interactions are
/// excluded. The per-user sample depends only on `(seed, user)`.
pub fn holdout_random(
    user_items: &UserItems,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<UserHoldout>, Exclusions)> {
    check_fraction(fraction)?;
    let mut users = Vec::new();
    let mut exclusions = Exclusions::default();
    for (&user, items) in user_items {
        let n = items.len();
        if n < 2 {
            exclusions.too_few.push(user);
            continue;
        }
        let h = holdout_count(n, fraction);
        let mut rng = seeds::rng(seed, "holdout-random", user as u64);
        let mut chosen = rand::seq::index::sample(&mut rng, n, h).into_vec();
        chosen.sort_unstable();
        let mut inputs = Vec::with_capacity(n - h);
        let mut targets = Vec::with_capacity(h);
        let mut next = 0;
        for (k, &it) in items.iter().enumerate() {
            if next < chosen.len() && chosen[next] == k {
                targets.push(it);
                next += 1;
            } else {
                inputs.push(it);
            }
        }
        users.push(UserHoldout {
            user,
            inputs,
            targets,
            withheld: Vec::new(),
        });
    }
    Ok((users, exclusions))
}

/// Proportional temporal selection: per user, the last `ceil(fraction * n)`
/// interactions in `(timestamp, item)` order become targets.
pub fn holdout_proportional(
    user_items: &UserItems,
    fraction: f64,
) -> Result<(Vec<UserHoldout>, Exclusions)> {
    check_fraction(fraction)?;
    let mut users = Vec::new();
    let mut exclusions = Exclusions::default();
    for (&user, items) in user_items {
        let n = items.len();
        if n < 2 {
            exclusions.too_few.push(user);
            continue;
        }
        let h = holdout_count(n, fraction);
        users.push(UserHoldout {
            user,
            inputs: items[..n - h].to_vec(),
            targets: items[n - h..].to_vec(),
            withheld: Vec::new(),
        });
    }
    Ok((users, exclusions))
}

/// Strict temporal cutoff: inputs are interactions with `t <= cutoff`,
/// targets those with `t > cutoff`. Users lacking either side are tallied
/// separately; a cutoff leaving no evaluable user at all is an error.
pub fn holdout_cutoff(
    user_items: &UserItems,
    cutoff: i64,
) -> Result<(Vec<UserHoldout>, Exclusions)> {
    let mut users = Vec::new();
    let mut exclusions = Exclusions::default();
    for (&user, items) in user_items {
        let boundary = items.partition_point(|&(t, _)| t <= cutoff);
        if boundary == 0 {
            exclusions.no_input.push(user);
            continue;
        }
        if boundary == items.len() {
            exclusions.no_target.push(user);
            continue;
        }
        users.push(UserHoldout {
            user,
            inputs: items[..boundary].to_vec(),
            targets: items[boundary..].to_vec(),
            withheld: Vec::new(),
        });
    }
    if users.is_empty() {
        return Err(Error::EmptySplit(format!(
            "cutoff {cutoff} leaves no user with interactions on both sides"
        )));
    }
    Ok((users, exclusions))
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    Ok(())
}

/// Knobs for phase-set assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    /// Per-user holdout fraction for validation targets.
    pub holdout_frac: f64,
    /// Fraction of train-set users sampled as validation users.
    pub val_user_frac: f64,
    /// Global time quantile defining the test cutoff (development phase).
    pub cutoff_quantile: f64,
    /// Explicit test cutoff; overrides the quantile when set.
    pub cutoff_time: Option<i64>,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            holdout_frac: 0.2,
            val_user_frac: 0.05,
            cutoff_quantile: 0.9,
            cutoff_time: None,
        }
    }
}

/// Everything one experiment phase needs: the training matrix (rows span
/// the full user index; validation-target and post-cutoff interactions are
/// absent), the validation split, and, in development, the temporal test
/// split.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSets {
    pub train: SparseUserItemMatrix,
    pub validation: EvalSplit,
    pub test: Option<EvalSplit>,
    pub val_users: Vec<usize>,
    pub test_cutoff: Option<i64>,
}

/// Build the train matrix and evaluation splits for one protocol and phase.
///
/// Development: a global test cutoff bounds the modeling universe; training
/// and validation use only `t <= cutoff` interactions, the test split holds
/// out everything after. Deployment-ready: the full log is the universe and
/// no test split exists. Validation users are a seeded sample of the
/// universe's users; their target interactions are removed from the train
/// matrix and withheld from test inputs.
pub fn assemble_phase_sets(
    log: &InteractionLog,
    catalog: &ItemCatalog,
    users: &UserIndex,
    protocol: Protocol,
    phase: Phase,
    params: &SplitParams,
    seed: u64,
) -> Result<PhaseSets> {
    check_fraction(params.holdout_frac)?;
    if !(0.0 < params.val_user_frac && params.val_user_frac <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "validation-user fraction must lie in (0, 1], got {}",
            params.val_user_frac
        )));
    }
    let all = group_by_user(log, catalog, users)?;

    // Bound the modeling universe in time.
    let (universe, test_cutoff): (UserItems, Option<i64>) = match phase {
        Phase::DeploymentReady => (all.clone(), None),
        Phase::Development => {
            let times: Vec<i64> = log.records().iter().map(|r| r.timestamp).collect();
            let cutoff = match params.cutoff_time {
                Some(t) => t,
                None => quantile_timestamp(&times, params.cutoff_quantile)?,
            };
            let mut pre: UserItems = BTreeMap::new();
            for (&u, items) in &all {
                let boundary = items.partition_point(|&(t, _)| t <= cutoff);
                if boundary > 0 {
                    pre.insert(u, items[..boundary].to_vec());
                }
            }
            if pre.is_empty() {
                return Err(Error::EmptySplit(format!(
                    "no interactions at or before test cutoff {cutoff}"
                )));
            }
            (pre, Some(cutoff))
        }
    };

    // Validation users: a seeded sample of the universe's users.
    let universe_users: Vec<usize> = universe.keys().copied().collect();
    let n_val = ((params.val_user_frac * universe_users.len() as f64).ceil() as usize)
        .min(universe_users.len());
    let mut rng = seeds::rng(seed, "val-users", 0);
    let mut val_users: Vec<usize> = rand::seq::index::sample(&mut rng, universe_users.len(), n_val)
        .into_iter()
        .map(|k| universe_users[k])
        .collect();
    val_users.sort_unstable();

    let val_items: UserItems = val_users
        .iter()
        .map(|&u| (u, universe[&u].clone()))
        .collect();

    let (val_holdouts, val_exclusions, val_cutoff) = match protocol {
        Protocol::Traditional => {
            let (h, e) = holdout_random(&val_items, params.holdout_frac, seed)?;
            (h, e, None)
        }
        Protocol::Proportional => {
            let (h, e) = holdout_proportional(&val_items, params.holdout_frac)?;
            (h, e, None)
        }
        Protocol::StrictCutoff => {
            let times: Vec<i64> = val_items
                .values()
                .flat_map(|items| items.iter().map(|&(t, _)| t))
                .collect();
            let cutoff = quantile_timestamp(&times, 1.0 - params.holdout_frac)?;
            let (h, e) = holdout_cutoff(&val_items, cutoff)?;
            (h, e, Some(cutoff))
        }
    };
    if val_holdouts.is_empty() {
        return Err(Error::EmptySplit(
            "no validation user survived the holdout".into(),
        ));
    }
    let validation = EvalSplit {
        phase,
        protocol,
        cutoff_time: val_cutoff,
        holdout_fraction: Some(params.holdout_frac),
        users: val_holdouts,
        exclusions: val_exclusions,
    };

    // Per-user validation-target sets, for leakage removal below.
    let val_targets: BTreeMap<usize, Vec<(i64, usize)>> = validation
        .users
        .iter()
        .map(|h| (h.user, h.targets.clone()))
        .collect();

    // Train matrix over the full user index: universe interactions minus
    // validation targets. Users outside the universe get empty rows.
    let mut rows_items: Vec<Vec<usize>> = vec![Vec::new(); users.len()];
    for (&u, items) in &universe {
        let withheld = val_targets.get(&u);
        let mut row: Vec<usize> = items
            .iter()
            .filter(|it| withheld.is_none_or(|w| !w.contains(it)))
            .map(|&(_, i)| i)
            .collect();
        row.sort_unstable();
        row.dedup();
        rows_items[u] = row;
    }
    let train = SparseUserItemMatrix::from_rows(catalog.len(), &rows_items);

    // Temporal test split: inputs are the (leakage-filtered) universe
    // interactions, targets everything after the test cutoff.
    let test = match phase {
        Phase::DeploymentReady => None,
        Phase::Development => {
            let cutoff = test_cutoff.expect("development phase has a cutoff");
            let mut holdouts = Vec::new();
            let mut exclusions = Exclusions::default();
            for (&u, items) in &all {
                let boundary = items.partition_point(|&(t, _)| t <= cutoff);
                let (pre, post) = items.split_at(boundary);
                let withheld: Vec<(i64, usize)> =
                    val_targets.get(&u).map(|w| w.to_vec()).unwrap_or_default();
                let inputs: Vec<(i64, usize)> = pre
                    .iter()
                    .filter(|it| !withheld.contains(it))
                    .copied()
                    .collect();
                if inputs.is_empty() {
                    exclusions.no_input.push(u);
                    continue;
                }
                if post.is_empty() {
                    exclusions.no_target.push(u);
                    continue;
                }
                holdouts.push(UserHoldout {
                    user: u,
                    inputs,
                    targets: post.to_vec(),
                    withheld,
                });
            }
            if holdouts.is_empty() {
                return Err(Error::EmptySplit(
                    "no user has activity on both sides of the test cutoff".into(),
                ));
            }
            Some(EvalSplit {
                phase,
                protocol: Protocol::StrictCutoff,
                cutoff_time: Some(cutoff),
                holdout_fraction: None,
                users: holdouts,
                exclusions,
            })
        }
    };

    Ok(PhaseSets {
        train,
        validation,
        test,
        val_users,
        test_cutoff,
    })
}

/// Leakage check: no target pair of the split may appear in the training
/// matrix.
pub fn verify_leakage(split: &EvalSplit, train: &SparseUserItemMatrix) -> Result<()> {
    for h in &split.users {
        for &(_, item) in &h.targets {
            if train.contains(h.user, item) {
                return Err(Error::ContractViolation(format!(
                    "target pair (user {}, item {item}) is present in the train matrix",
                    h.user
                )));
            }
        }
    }
    Ok(())
}

/// Temporal-order check: for temporal protocols every input precedes every
/// target per user; for strict cutoff, targets additionally lie strictly
/// after the cutoff and inputs at or before it.
pub fn verify_temporal_order(split: &EvalSplit) -> Result<()> {
    for h in &split.users {
        if h.inputs.is_empty() || h.targets.is_empty() {
            return Err(Error::ContractViolation(format!(
                "user {} has an empty input or target set",
                h.user
            )));
        }
        let overlap = h.targets.iter().any(|t| h.inputs.contains(t));
        if overlap {
            return Err(Error::ContractViolation(format!(
                "user {} has overlapping inputs and targets",
                h.user
            )));
        }
        match split.protocol {
            Protocol::Traditional => {}
            Protocol::Proportional | Protocol::StrictCutoff => {
                let max_in = h.inputs.iter().map(|&(t, _)| t).max().expect("nonempty");
                let min_tg = h.targets.iter().map(|&(t, _)| t).min().expect("nonempty");
                if max_in > min_tg {
                    return Err(Error::ContractViolation(format!(
                        "user {} has input time {max_in} after target time {min_tg}",
                        h.user
                    )));
                }
            }
        }
        if split.protocol == Protocol::StrictCutoff {
            let cutoff = split.cutoff_time.ok_or_else(|| {
                Error::ContractViolation("strict-cutoff split lacks a cutoff time".into())
            })?;
            if let Some(&(t, _)) = h.inputs.iter().find(|&&(t, _)| t > cutoff) {
                return Err(Error::ContractViolation(format!(
                    "user {} has input at {t} after cutoff {cutoff}",
                    h.user
                )));
            }
            if let Some(&(t, _)) = h.targets.iter().find(|&&(t, _)| t <= cutoff) {
                return Err(Error::ContractViolation(format!(
                    "user {} has target at {t} not after cutoff {cutoff}",
                    h.user
                )));
            }
        }
    }
    Ok(())
}

/// Conservation check: per evaluated user, inputs, targets, and withheld
/// interactions together are exactly the user's interactions in `universe`;
/// excluded users keep their full lists untouched.
pub fn verify_conservation(split: &EvalSplit, universe: &UserItems) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for h in &split.users {
        seen.insert(h.user);
        let expected = universe.get(&h.user).ok_or_else(|| {
            Error::ContractViolation(format!("user {} not in the split universe", h.user))
        })?;
        let mut got: Vec<(i64, usize)> = h
            .inputs
            .iter()
            .chain(&h.targets)
            .chain(&h.withheld)
            .copied()
            .collect();
        got.sort_unstable();
        if &got != expected {
            return Err(Error::ContractViolation(format!(
                "user {}: split sides do not reassemble the universe ({} vs {} interactions)",
                h.user,
                got.len(),
                expected.len()
            )));
        }
    }
    for u in split.exclusions.all_users() {
        if seen.contains(&u) {
            return Err(Error::ContractViolation(format!(
                "user {u} is both evaluated and excluded"
            )));
        }
        if !universe.contains_key(&u) {
            return Err(Error::ContractViolation(format!(
                "excluded user {u} not in the split universe"
            )));
        }
        seen.insert(u);
    }
    for &u in universe.keys() {
        if !seen.contains(&u) {
            return Err(Error::ContractViolation(format!(
                "user {u} from the universe is neither evaluated nor excluded"
            )));
        }
    }
    Ok(())
}

/// On-disk record of a split: parameters, seed, tallies, and the full
/// per-user index lists. Reloading reproduces the split exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub format: String,
    pub protocol: Protocol,
    pub phase: Phase,
    pub params: SplitParams,
    pub seed: u64,
    pub cutoff_time: Option<i64>,
    pub holdout_fraction: Option<f64>,
    pub n_evaluated: usize,
    pub excluded_too_few: usize,
    pub excluded_no_input: usize,
    pub excluded_no_target: usize,
    pub split: EvalSplit,
}

pub const SPLIT_MANIFEST_FORMAT: &str = "temporec-split v1";

impl SplitManifest {
    pub fn new(split: EvalSplit, params: &SplitParams, seed: u64) -> Self {
        SplitManifest {
            format: SPLIT_MANIFEST_FORMAT.into(),
            protocol: split.protocol,
            phase: split.phase,
            params: *params,
            seed,
            cutoff_time: split.cutoff_time,
            holdout_fraction: split.holdout_fraction,
            n_evaluated: split.users.len(),
            excluded_too_few: split.exclusions.too_few.len(),
            excluded_no_input: split.exclusions.no_input.len(),
            excluded_no_target: split.exclusions.no_target.len(),
            split,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: SplitManifest =
            serde_json::from_str(&text).map_err(|e| Error::BadFormatTag(e.to_string()))?;
        if manifest.format != SPLIT_MANIFEST_FORMAT {
            return Err(Error::BadFormatTag(manifest.format));
        }
        Ok(manifest)
    }
}
