//! Pairwise behavioral features.
//!
//! Every unordered pair of players that shared a match is observed once per
//! shared match, either as teammates or as opponents. Observations are folded
//! into one [`PairFeatures`] row per pair: landing proximity, rank placement
//! difference, acquaintance, number of shared matches and the longest run of
//! back-to-back shared matches.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::ActiveDataset;
use crate::model::{Dataset, PairKey, PlayerId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairContext {
    Teammate,
    Opponent,
}

/// One shared match of a pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairObservation {
    pub pair: PairKey,
    pub context: PairContext,
    pub match_id: String,
    pub distance: f64,
    /// `|rank(a) - rank(b)|`; absent for teammates.
    pub rank_diff: Option<u32>,
    pub rank_a: u32,
    pub rank_b: u32,
    /// 1-based position of the match in each player's own time-ordered sequence.
    pub match_ordinal_a: u32,
    pub match_ordinal_b: u32,
}

/// When a pair counts as acquainted without a platform friendship.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquaintanceRule {
    /// Minimum shared matches across both contexts.
    pub min_total: usize,
    /// Minimum shared matches in each of the two contexts.
    pub per_context: usize,
}

impl Default for AcquaintanceRule {
    fn default() -> Self {
        AcquaintanceRule {
            min_total: 3,
            per_context: 1,
        }
    }
}

impl AcquaintanceRule {
    pub fn holds(&self, friends: bool, n_team: usize, n_opp: usize) -> bool {
        friends
            || (n_team >= self.per_context
                && n_opp >= self.per_context
                && n_team + n_opp >= self.min_total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub pair: PairKey,
    pub num_matches_opp: usize,
    pub num_matches_team: usize,
    pub max_consecutive_opp: usize,
    pub max_consecutive_team: usize,
    pub avg_distance_opp: Option<f64>,
    pub avg_rank_diff_opp: Option<f64>,
    pub acquaintance: bool,
    pub avg_distance_team: Option<f64>,
    /// Every shared match, both contexts, in time order.
    pub match_ids: Vec<String>,
}

/// Column names of [`PairFeatures::detector_vector`], in order.
pub const FEATURE_NAMES: [&str; 5] = [
    "num_matches",
    "max_consecutive",
    "proximity",
    "rank_difference",
    "acquaintance",
];

impl PairFeatures {
    /// `[num_matches_opp, max_consecutive_opp, avg_distance_opp, avg_rank_diff_opp, acquaintance]`,
    /// or `None` when the pair never met as opponents.
    pub fn detector_vector(&self) -> Option<[f64; 5]> {
        Some([
            self.num_matches_opp as f64,
            self.max_consecutive_opp as f64,
            self.avg_distance_opp?,
            self.avg_rank_diff_opp?,
            if self.acquaintance { 1.0 } else { 0.0 },
        ])
    }

    pub fn matches_in(&self, context: PairContext) -> usize {
        match context {
            PairContext::Teammate => self.num_matches_team,
            PairContext::Opponent => self.num_matches_opp,
        }
    }
}

/// Longest run of observations that are back-to-back in both players' own
/// match sequences.
pub fn consecutive_streak(obs: &[PairObservation]) -> usize {
    let mut ordinals: Vec<(u32, u32)> = obs
        .iter()
        .map(|o| (o.match_ordinal_a, o.match_ordinal_b))
        .collect();
    ordinals.sort_unstable();
    streak_of(ordinals.into_iter())
}

fn streak_of(ordinals: impl Iterator<Item = (u32, u32)>) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<(u32, u32)> = None;
    for (a, b) in ordinals {
        run = match prev {
            Some((pa, pb)) if a == pa + 1 && b == pb + 1 => run + 1,
            _ => 1,
        };
        best = best.max(run);
        prev = Some((a, b));
    }
    best
}

/// One player's slot in one match, with players interned to indices whose
/// order matches `PlayerId` order.
#[derive(Debug, Clone, Copy)]
struct Slot {
    player: u32,
    team: u32,
    rank: u32,
    x: f64,
    y: f64,
    ordinal: u32,
}

#[derive(Debug, Clone, Copy)]
struct RawObs {
    lo: u32,
    hi: u32,
    match_idx: u32,
    opponent: bool,
    distance: f64,
    rank_lo: u32,
    rank_hi: u32,
    ord_lo: u32,
    ord_hi: u32,
}

struct Interned<'a> {
    players: Vec<&'a PlayerId>,
    slots: Vec<Vec<Slot>>,
}

fn intern(d: &Dataset) -> Interned<'_> {
    let mut players: Vec<&PlayerId> = d.matches().iter().flat_map(|m| m.players()).collect();
    players.sort_unstable();
    players.dedup();
    let index: HashMap<&PlayerId, u32> = players
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i as u32))
        .collect();

    let mut played = vec![0u32; players.len()];
    let slots = d
        .matches()
        .iter()
        .map(|m| {
            m.teams
                .iter()
                .flat_map(|t| t.players.iter().map(move |p| (t, p)))
                .map(|(t, p)| {
                    let idx = index[p];
                    played[idx as usize] += 1;
                    let pos = m.landings[p];
                    Slot {
                        player: idx,
                        team: t.index,
                        rank: t.rank,
                        x: pos.x,
                        y: pos.y,
                        ordinal: played[idx as usize],
                    }
                })
                .collect()
        })
        .collect();
    Interned { players, slots }
}

fn observe(match_idx: usize, slots: &[Slot], keep: impl Fn(u32, u32) -> bool) -> Vec<RawObs> {
    let mut out = Vec::new();
    for (i, s) in slots.iter().enumerate() {
        for t in &slots[i + 1..] {
            let (lo, hi) = if s.player < t.player { (s, t) } else { (t, s) };
            if !keep(lo.player, hi.player) {
                continue;
            }
            out.push(RawObs {
                lo: lo.player,
                hi: hi.player,
                match_idx: match_idx as u32,
                opponent: lo.team != hi.team,
                distance: (lo.x - hi.x).hypot(lo.y - hi.y),
                rank_lo: lo.rank,
                rank_hi: hi.rank,
                ord_lo: lo.ordinal,
                ord_hi: hi.ordinal,
            });
        }
    }
    out
}

/// All raw observations of pairs accepted by `keep`, sorted by (pair, match).
fn raw_observations(
    interned: &Interned<'_>,
    keep: impl Fn(u32, u32) -> bool + Sync,
) -> Vec<RawObs> {
    let per_match: Vec<Vec<RawObs>> = interned
        .slots
        .par_iter()
        .enumerate()
        .map(|(i, slots)| observe(i, slots, &keep))
        .collect();
    let mut all: Vec<RawObs> = per_match.into_iter().flatten().collect();
    all.par_sort_unstable_by_key(|o| (o.lo, o.hi, o.match_idx));
    all
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractConfig {
    pub min_shared: usize,
    pub context: PairContext,
    pub acquaintance: AcquaintanceRule,
}

impl ExtractConfig {
    pub fn new(min_shared: usize, context: PairContext) -> Self {
        ExtractConfig {
            min_shared,
            context,
            acquaintance: AcquaintanceRule::default(),
        }
    }
}

/// One row per pair of active players with at least `min_shared` shared
/// matches in `context`, sorted by pair.
pub fn extract_pairs(
    active: &ActiveDataset<'_>,
    min_shared: usize,
    context: PairContext,
) -> Vec<PairFeatures> {
    extract_pairs_with(active, &ExtractConfig::new(min_shared, context))
}

pub fn extract_pairs_with(active: &ActiveDataset<'_>, cfg: &ExtractConfig) -> Vec<PairFeatures> {
    let d = active.dataset();
    let interned = intern(d);
    let active_mask: Vec<bool> = interned
        .players
        .iter()
        .map(|p| active.is_active(p))
        .collect();
    let raw = raw_observations(&interned, |a, b| {
        active_mask[a as usize] && active_mask[b as usize]
    });
    let min_shared = cfg.min_shared.max(1);

    let groups: Vec<&[RawObs]> = raw.chunk_by(|x, y| (x.lo, x.hi) == (y.lo, y.hi)).collect();
    groups
        .into_par_iter()
        .filter_map(|group| {
            let n_opp = group.iter().filter(|o| o.opponent).count();
            let n_team = group.len() - n_opp;
            let n_ctx = match cfg.context {
                PairContext::Opponent => n_opp,
                PairContext::Teammate => n_team,
            };
            if n_ctx < min_shared {
                return None;
            }
            Some(summarize_group(&interned, d, group, &cfg.acquaintance))
        })
        .collect()
}

fn summarize_group(
    interned: &Interned<'_>,
    d: &Dataset,
    group: &[RawObs],
    rule: &AcquaintanceRule,
) -> PairFeatures {
    let first = group[0];
    let pair = PairKey::new(
        interned.players[first.lo as usize].clone(),
        interned.players[first.hi as usize].clone(),
    )
    .expect("interned indices of a pair are distinct");

    let mut n_opp = 0usize;
    let mut n_team = 0usize;
    let mut dist_opp = 0.0;
    let mut dist_team = 0.0;
    let mut rank_diff = 0u64;
    for o in group {
        if o.opponent {
            n_opp += 1;
            dist_opp += o.distance;
            rank_diff += u64::from(o.rank_lo.abs_diff(o.rank_hi));
        } else {
            n_team += 1;
            dist_team += o.distance;
        }
    }
    let streak = |opponent: bool| {
        streak_of(
            group
                .iter()
                .filter(|o| o.opponent == opponent)
                .map(|o| (o.ord_lo, o.ord_hi)),
        )
    };
    let friends = d.friendships().contains(&pair);
    PairFeatures {
        acquaintance: rule.holds(friends, n_team, n_opp),
        num_matches_opp: n_opp,
        num_matches_team: n_team,
        max_consecutive_opp: streak(true),
        max_consecutive_team: streak(false),
        avg_distance_opp: (n_opp > 0).then(|| dist_opp / n_opp as f64),
        avg_rank_diff_opp: (n_opp > 0).then(|| rank_diff as f64 / n_opp as f64),
        avg_distance_team: (n_team > 0).then(|| dist_team / n_team as f64),
        match_ids: group
            .iter()
            .map(|o| d.matches()[o.match_idx as usize].match_id.clone())
            .collect(),
        pair,
    }
}

/// Every shared match of one pair, in time order.
pub fn pair_observations(d: &Dataset, pair: &PairKey) -> Vec<PairObservation> {
    let mut ordinal_a = 0;
    let mut ordinal_b = 0;
    let mut out = Vec::new();
    for m in d.matches() {
        let team_a = m.team_of(pair.a());
        let team_b = m.team_of(pair.b());
        if team_a.is_some() {
            ordinal_a += 1;
        }
        if team_b.is_some() {
            ordinal_b += 1;
        }
        let (Some(ta), Some(tb)) = (team_a, team_b) else {
            continue;
        };
        let context = if ta.index == tb.index {
            PairContext::Teammate
        } else {
            PairContext::Opponent
        };
        out.push(PairObservation {
            pair: pair.clone(),
            context,
            match_id: m.match_id.clone(),
            distance: m.landings[pair.a()].distance(&m.landings[pair.b()]),
            rank_diff: (context == PairContext::Opponent).then(|| ta.rank.abs_diff(tb.rank)),
            rank_a: ta.rank,
            rank_b: tb.rank,
            match_ordinal_a: ordinal_a,
            match_ordinal_b: ordinal_b,
        });
    }
    out
}

/// Friendship, or enough shared matches on both sides of the table.
pub fn acquaintance(d: &Dataset, pair: &PairKey, rule: &AcquaintanceRule) -> bool {
    if d.friendships().contains(pair) {
        return true;
    }
    let obs = pair_observations(d, pair);
    let n_team = obs
        .iter()
        .filter(|o| o.context == PairContext::Teammate)
        .count();
    rule.holds(false, n_team, obs.len() - n_team)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with header `pair_a,pair_b,n_opp,n_team,streak,avg_dist,avg_rank_diff,acquaintance`.
pub fn write_features_csv<W: Write>(rows: &[PairFeatures], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pair_a",
        "pair_b",
        "n_opp",
        "n_team",
        "streak",
        "avg_dist",
        "avg_rank_diff",
        "acquaintance",
    ])?;
    for r in rows {
        w.write_record([
            r.pair.a().as_str(),
            r.pair.b().as_str(),
            &r.num_matches_opp.to_string(),
            &r.num_matches_team.to_string(),
            &r.max_consecutive_opp.to_string(),
            &opt(r.avg_distance_opp),
            &opt(r.avg_rank_diff_opp),
            if r.acquaintance { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}
