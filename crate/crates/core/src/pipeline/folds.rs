//! User-grouped fold construction with greedy balancing of tweet totals and
//! per-code positive counts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};
use crate::util::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserLoad {
    pub user_id: String,
    pub n_tweets: usize,
    /// Positive counts ordered aggression, loss, substance use.
    pub positives: [usize; 3],
}

/// Per-user totals from tweets and their aligned labels.
pub fn user_loads(tweets: &[TweetRecord], labels: &[[bool; 3]]) -> Vec<UserLoad> {
    let mut map: BTreeMap<&str, UserLoad> = BTreeMap::new();
    for (t, l) in tweets.iter().zip(labels) {
        let e = map.entry(&t.user_id).or_insert_with(|| UserLoad {
            user_id: t.user_id.clone(),
            n_tweets: 0,
            positives: [0; 3],
        });
        e.n_tweets += 1;
        for c in 0..3 {
            e.positives[c] += usize::from(l[c]);
        }
    }
    map.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub user_fold: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, user_id: &str) -> Result<usize> {
        self.user_fold
            .get(user_id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("user {user_id} has no fold")))
    }

    pub fn tweet_folds(&self, tweets: &[TweetRecord]) -> Result<Vec<usize>> {
        tweets.iter().map(|t| self.fold_of(&t.user_id)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.k];
        for (u, &f) in &self.user_fold {
            if f >= self.k {
                return Err(Error::invalid(format!(
                    "user {u} assigned to fold {f} of {}",
                    self.k
                )));
            }
            used[f] = true;
        }
        if used.contains(&false) {
            return Err(Error::invalid("a fold has no users"));
        }
        Ok(())
    }
}

/// Greedy balancing: users in descending tweet count (ties in seeded random
/// order) each go to the fold whose loads, after adding the user, deviate
/// least from the running fold mean. Loads are tweet count and the three
/// positive counts, each normalized by its corpus total so they weigh alike.
pub fn make_folds(users: &[UserLoad], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::invalid("need at least one fold"));
    }
    if users.len() < k {
        return Err(Error::invalid(format!(
            "{} users cannot fill {k} folds",
            users.len()
        )));
    }
    let mut order: Vec<&UserLoad> = users.iter().collect();
    order.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    order.shuffle(&mut rng_from_seed(seed));
    order.sort_by(|a, b| b.n_tweets.cmp(&a.n_tweets));

    let vec_of = |u: &UserLoad| {
        [
            u.n_tweets as f64,
            u.positives[0] as f64,
            u.positives[1] as f64,
            u.positives[2] as f64,
        ]
    };
    let mut totals = [0.0f64; 4];
    for u in users {
        for (t, v) in totals.iter_mut().zip(vec_of(u)) {
            *t += v;
        }
    }
    let scale: Vec<f64> = totals
        .iter()
        .map(|&t| if t > 0.0 { 1.0 / t } else { 0.0 })
        .collect();

    let mut loads = vec![[0.0f64; 4]; k];
    let mut counts = vec![0usize; k];
    let mut assigned = [0.0f64; 4];
    let mut user_fold = BTreeMap::new();
    for (remaining, u) in (0..order.len()).rev().zip(&order) {
        let v = vec_of(u);
        for d in 0..4 {
            assigned[d] += v[d] * scale[d];
        }
        let empty_folds = counts.iter().filter(|&&c| c == 0).count();
        let mut best = (f64::INFINITY, 0);
        for f in 0..k {
            // keep enough users back to give every fold at least one
            if counts[f] > 0 && remaining < empty_folds {
                continue;
            }
            let mut cost = 0.0;
            for g in 0..k {
                for d in 0..4 {
                    let load = loads[g][d] + if g == f { v[d] * scale[d] } else { 0.0 };
                    cost += (load - assigned[d] / k as f64).powi(2);
                }
            }
            if cost < best.0 {
                best = (cost, f);
            }
        }
        let f = best.1;
        for d in 0..4 {
            loads[f][d] += v[d] * scale[d];
        }
        counts[f] += 1;
        user_fold.insert(u.user_id.clone(), f);
    }
    let out = FoldAssignment { k, seed, user_fold };
    out.validate()?;
    Ok(out)
}
