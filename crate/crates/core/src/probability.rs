//! Chance baselines for rank placement.
//!
//! With `T` teams whose final ranks are a uniformly random permutation, two
//! given teams finish exactly one rank apart with probability
//! `2(T-1)(T-2)!/T! = 2/T`; finishing one apart with both inside the top `K`
//! has probability `2(K-1)(T-2)!/T!`. Repeating the event `k` times in `n`
//! independent matches is binomial.

use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("team count must be at least 2, got {0}")]
    TooFewTeams(u64),
    #[error("top slots must satisfy 2 <= K <= T, got K={k}, T={t}")]
    TopSlots { t: u64, k: u64 },
    #[error("successes {k} exceed trials {n}")]
    Successes { n: u64, k: u64 },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
}

/// Exact `2(T-1)(T-2)!/T!`, reduced.
pub fn p_rank_adjacent_exact(teams: u64) -> Result<Ratio<u64>, DomainError> {
    if teams < 2 {
        return Err(DomainError::TooFewTeams(teams));
    }
    Ok(Ratio::new(2 * (teams - 1), teams * (teams - 1)))
}

pub fn p_rank_adjacent(teams: u64) -> Result<f64, DomainError> {
    p_rank_adjacent_exact(teams).map(to_f64)
}

/// Exact `2(K-1)(T-2)!/T!`: both teams in the top `K` and one rank apart.
pub fn p_rank_adjacent_top_exact(teams: u64, top: u64) -> Result<Ratio<u64>, DomainError> {
    if teams < 2 {
        return Err(DomainError::TooFewTeams(teams));
    }
    if top < 2 || top > teams {
        return Err(DomainError::TopSlots { t: teams, k: top });
    }
    Ok(Ratio::new(2 * (top - 1), teams * (teams - 1)))
}

pub fn p_rank_adjacent_top(teams: u64, top: u64) -> Result<f64, DomainError> {
    p_rank_adjacent_top_exact(teams, top).map(to_f64)
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `C(n, k) p^k (1-p)^(n-k)`.
pub fn binomial_event_prob(n: u64, k: u64, p: f64) -> Result<f64, DomainError> {
    if k > n {
        return Err(DomainError::Successes { n, k });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(DomainError::Probability(p));
    }
    Ok(binomial_coefficient(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
}

fn binomial_coefficient(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
