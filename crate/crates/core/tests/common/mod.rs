//! Shared fixtures and reference implementations for the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use collusion::features::{PairContext, PairFeatures};
use collusion::model::{Dataset, MatchRecord, PairKey, PlayerId, Position, Team};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small random dataset: few players so pairs meet often, coarse positions
/// so distances tie, colliding start times so ordering falls back to ids.
pub fn random_fixture(seed: u64, max_players: usize, max_matches: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_players = rng.random_range(6..=max_players);
    let players: Vec<PlayerId> = (0..n_players)
        .map(|i| PlayerId::new(format!("q{i:02}")))
        .collect();
    let n_matches = rng.random_range(1..=max_matches);
    let mut matches = Vec::with_capacity(n_matches);
    for m in 0..n_matches {
        let size = rng.random_range(2..=3usize);
        let max_teams = (n_players / size).min(6);
        let teams = rng.random_range(2..=max_teams.max(2));
        let mut pool = players.clone();
        pool.shuffle(&mut rng);
        let mut ranks: Vec<u32> = (1..=teams as u32).collect();
        ranks.shuffle(&mut rng);
        let mut landings = BTreeMap::new();
        let teams: Vec<Team> = (0..teams)
            .map(|t| {
                let members = pool[t * size..(t + 1) * size].to_vec();
                for p in &members {
                    let pos = Position::new(
                        rng.random_range(0..8) as f64 * 250.0,
                        rng.random_range(0..8) as f64 * 250.0,
                    );
                    landings.insert(p.clone(), pos);
                }
                Team {
                    index: t as u32,
                    players: members,
                    rank: ranks[t],
                }
            })
            .collect();
        matches.push(MatchRecord {
            match_id: format!("x{m:03}"),
            start_time: Utc
                .timestamp_opt(
                    1_700_000_000 + 60 * rng.random_range(0..n_matches as i64),
                    0,
                )
                .unwrap(),
            teams,
            landings,
        });
    }
    let mut friends = BTreeSet::new();
    for _ in 0..rng.random_range(0..6) {
        let a = rng.random_range(0..n_players);
        let b = rng.random_range(0..n_players);
        if a != b {
            friends.insert(PairKey::new(players[a].clone(), players[b].clone()).unwrap());
        }
    }
    Dataset::new(matches, friends).unwrap()
}

/// Reference pair features: every pair of active players, every match, in
/// time order.
pub fn brute_force_pairs(
    d: &Dataset,
    min_player_matches: usize,
    min_shared: usize,
    ctx: PairContext,
) -> Vec<PairFeatures> {
    let mut counts: BTreeMap<&PlayerId, usize> = BTreeMap::new();
    for m in d.matches() {
        for t in &m.teams {
            for p in &t.players {
                *counts.entry(p).or_default() += 1;
            }
        }
    }
    let active: Vec<&PlayerId> = counts
        .iter()
        .filter(|(_, &n)| n >= min_player_matches)
        .map(|(p, _)| *p)
        .collect();

    let mut out = Vec::new();
    for i in 0..active.len() {
        for j in i + 1..active.len() {
            let (a, b) = (active[i], active[j]);
            if let Some(f) = pair_reference(d, a, b) {
                let n = match ctx {
                    PairContext::Opponent => f.num_matches_opp,
                    PairContext::Teammate => f.num_matches_team,
                };
                if n >= min_shared.max(1) {
                    out.push(f);
                }
            }
        }
    }
    out
}

fn team_of<'m>(m: &'m MatchRecord, p: &PlayerId) -> Option<&'m Team> {
    m.teams.iter().find(|t| t.players.contains(p))
}

fn longest_run(ordinals: &[(u32, u32)]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (k, &(x, y)) in ordinals.iter().enumerate() {
        run = if k > 0 && ordinals[k - 1] == (x - 1, y - 1) {
            run + 1
        } else {
            1
        };
        best = best.max(run);
    }
    best
}

fn pair_reference(d: &Dataset, a: &PlayerId, b: &PlayerId) -> Option<PairFeatures> {
    let (mut oa, mut ob) = (0u32, 0u32);
    let mut opp: Vec<(u32, u32)> = Vec::new();
    let mut team: Vec<(u32, u32)> = Vec::new();
    let (mut dist_opp, mut dist_team) = (0.0, 0.0);
    let mut rank_sum = 0u64;
    let mut ids = Vec::new();
    for m in d.matches() {
        let (ta, tb) = (team_of(m, a), team_of(m, b));
        oa += ta.is_some() as u32;
        ob += tb.is_some() as u32;
        let (Some(ta), Some(tb)) = (ta, tb) else {
            continue;
        };
        let (pa, pb) = (m.landings[a], m.landings[b]);
        let dist = (pa.x - pb.x).hypot(pa.y - pb.y);
        ids.push(m.match_id.clone());
        if ta.index == tb.index {
            team.push((oa, ob));
            dist_team += dist;
        } else {
            opp.push((oa, ob));
            dist_opp += dist;
            rank_sum += (ta.rank as i64 - tb.rank as i64).unsigned_abs();
        }
    }
    if ids.is_empty() {
        return None;
    }
    let pair = PairKey::new(a.clone(), b.clone()).unwrap();
    let (n_opp, n_team) = (opp.len(), team.len());
    let friends = d.friendships().contains(&pair);
    Some(PairFeatures {
        acquaintance: friends || (n_opp >= 1 && n_team >= 1 && n_opp + n_team >= 3),
        num_matches_opp: n_opp,
        num_matches_team: n_team,
        max_consecutive_opp: longest_run(&opp),
        max_consecutive_team: longest_run(&team),
        avg_distance_opp: (n_opp > 0).then(|| dist_opp / n_opp as f64),
        avg_rank_diff_opp: (n_opp > 0).then(|| rank_sum as f64 / n_opp as f64),
        avg_distance_team: (n_team > 0).then(|| dist_team / n_team as f64),
        match_ids: ids,
        pair,
    })
}

/// Field-by-field comparison; the first difference as a message.
pub fn diff_features(got: &[PairFeatures], want: &[PairFeatures]) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!("{} rows, expected {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        if g != w {
            return Some(format!("got {g:?}\nwant {w:?}"));
        }
    }
    None
}
