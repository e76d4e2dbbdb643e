//! Preference lists for children and families.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::MarketError;

/// Selection probabilities over `m` daycares with pairwise ratios in `[1/σ, σ]`.
pub fn bounded_distribution<R: Rng + ?Sized>(m: usize, sigma: f64, rng: &mut R) -> Result<Vec<f64>, MarketError> {
    if m == 0 {
        return Err(MarketError::Config("need at least one daycare".into()));
    }
    if sigma.is_nan() || sigma < 1.0 || sigma.is_infinite() {
        return Err(MarketError::Config(format!("sigma must be >= 1, got {sigma}")));
    }
    let w: Vec<f64> = (0..m).map(|_| if sigma == 1.0 { 1.0 } else { rng.random_range(1.0..=sigma) }).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Draw from `p` until `len` distinct indices are collected, in draw order.
pub fn gen_individual_prefs<R: Rng + ?Sized>(p: &[f64], len: usize, rng: &mut R) -> Result<Vec<usize>, MarketError> {
    if len > p.len() {
        return Err(MarketError::Config(format!("list length {len} exceeds {} daycares", p.len())));
    }
    let dist = WeightedIndex::new(p).map_err(|e| MarketError::Config(e.to_string()))?;
    let mut seen = vec![false; p.len()];
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let d = dist.sample(rng);
        if !std::mem::replace(&mut seen[d], true) {
            out.push(d);
        }
    }
    Ok(out)
}

/// A uniformly random subset of the product of the children's lists, in random order.
pub fn gen_family_prefs<T: Copy, R: Rng + ?Sized>(
    individual: &[Vec<T>],
    joint_len: usize,
    rng: &mut R,
) -> Result<Vec<Vec<T>>, MarketError> {
    if individual.iter().any(Vec::is_empty) {
        return Err(MarketError::Config("every child needs a non-empty list".into()));
    }
    let total = individual
        .iter()
        .try_fold(1usize, |acc, l| acc.checked_mul(l.len()))
        .ok_or_else(|| MarketError::Config("too many tuple combinations".into()))?;
    let amount = joint_len.min(total);
    let mut picks = index::sample(rng, total, amount).into_vec();
    picks.shuffle(rng);
    Ok(picks
        .into_iter()
        .map(|mut code| {
            // mixed radix, last child varies fastest
            let mut tuple = Vec::with_capacity(individual.len());
            for list in individual.iter().rev() {
                tuple.push(list[code % list.len()]);
                code /= list.len();
            }
            tuple.reverse();
            tuple
        })
        .collect())
}
