//! Synthetic interaction logs with a tunable taste for recently added
//! items. Items arrive over the time horizon; a user choosing at time t
//! picks among the items available by then with probability proportional
//! to base popularity, an exponential age decay, and an exponential bonus
//! for items still inside their freshness window. With affinity and decay
//! at zero the log reduces to a stationary popularity sampler, which is
//! what the independence checks rely on.

use rand::Rng;

use crate::corpus::{Interaction, InteractionLog};
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct DriftCorpusSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Timestamps run over 0..=horizon.
    pub horizon: i64,
    /// Fraction of the catalog available at time zero; the rest arrives
    /// uniformly over the horizon.
    pub initial_frac: f64,
    /// Popularity-decay rate with normalized item age.
    pub decay: f64,
    /// Recency-affinity strength: the pull toward freshly arrived items.
    pub affinity: f64,
    /// Fraction of the horizon an item counts as fresh after arriving.
    pub fresh_window: f64,
    pub events_per_user: usize,
    pub seed: u64,
}

impl Default for DriftCorpusSpec {
    fn default() -> Self {
        DriftCorpusSpec {
            n_users: 2000,
            n_items: 500,
            horizon: 1_000_000,
            initial_frac: 0.2,
            decay: 1.0,
            affinity: 4.0,
            fresh_window: 0.1,
            events_per_user: 30,
            seed: 0,
        }
    }
}

impl DriftCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.events_per_user == 0 {
            return Err(Error::InvalidConfig(
                "drift corpus needs at least one user, item, and event".into(),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if !(self.initial_frac > 0.0 && self.initial_frac <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "initial item fraction {} outside (0, 1]",
                self.initial_frac
            )));
        }
        if !(self.fresh_window > 0.0 && self.fresh_window <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "freshness window {} outside (0, 1]",
                self.fresh_window
            )));
        }
        if self.decay < 0.0 || self.affinity < 0.0 {
            return Err(Error::InvalidConfig(
                "decay and affinity rates must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-item arrival times: an initial cohort at time zero, the remainder
/// uniform over the horizon.
pub fn item_arrivals(spec: &DriftCorpusSpec) -> Vec<i64> {
    let initial = ((spec.n_items as f64 * spec.initial_frac).ceil() as usize).min(spec.n_items);
    let mut rng = seeds::rng(spec.seed, "drift-arrivals", 0);
    (0..spec.n_items)
        .map(|i| {
            if i < initial {
                0
            } else {
                rng.gen_range(1..=spec.horizon)
            }
        })
        .collect()
}

/// Generate the log. Item identities get a random popularity rank, so
/// base popularity carries no information about arrival order.
pub fn generate_drift_corpus(spec: &DriftCorpusSpec) -> Result<InteractionLog> {
    spec.validate()?;
    let arrivals = item_arrivals(spec);

    let base_pop: Vec<f64> = {
        use rand::seq::SliceRandom;
        let mut ranks: Vec<usize> = (0..spec.n_items).collect();
        ranks.shuffle(&mut seeds::rng(spec.seed, "drift-popularity", 0));
        ranks
            .into_iter()
            .map(|r| 1.0 / ((r + 1) as f64).powf(0.8))
            .collect()
    };

    let horizon = spec.horizon as f64;
    let fresh = (spec.fresh_window * horizon).max(f64::MIN_POSITIVE);
    let user_digits = digits(spec.n_users);
    let item_digits = digits(spec.n_items);

    let mut records = Vec::with_capacity(spec.n_users * spec.events_per_user);
    let mut weights = vec![0.0; spec.n_items];
    for u in 0..spec.n_users {
        let mut rng = seeds::rng(spec.seed, "drift-user", u as u64);
        let mut times: Vec<i64> = (0..spec.events_per_user)
            .map(|_| rng.gen_range(0..=spec.horizon))
            .collect();
        times.sort_unstable();
        for &t in &times {
            let mut total = 0.0;
            for i in 0..spec.n_items {
                weights[i] = if arrivals[i] <= t {
                    let age = (t - arrivals[i]) as f64 / horizon;
                    let freshness = (1.0 - (t - arrivals[i]) as f64 / fresh).max(0.0);
                    base_pop[i] * (-spec.decay * age).exp() * (spec.affinity * freshness).exp()
                } else {
                    0.0
                };
                total += weights[i];
            }
            // the initial cohort guarantees availability at every t
            let mut draw = rng.gen::<f64>() * total;
            let mut chosen = None;
            let mut last_available = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    last_available = i;
                    draw -= w;
                    if draw <= 0.0 {
                        chosen = Some(i);
                        break;
                    }
                }
            }
            let chosen = chosen.unwrap_or(last_available);
            records.push(Interaction {
                user: format!("u{u:0user_digits$}"),
                item: format!("i{chosen:0item_digits$}"),
                timestamp: t,
                rating: None,
            });
        }
    }
    Ok(InteractionLog::new(records, None))
}

fn digits(n: usize) -> usize {
    let mut d = 1;
    let mut m = 10;
    while m < n {
        d += 1;
        m *= 10;
    }
    d
}
