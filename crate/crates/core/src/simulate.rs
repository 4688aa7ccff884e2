//! Synthetic match data with planted colluding pairs.
//!
//! Background play: each match draws its lobby uniformly from the player
//! pool, fills teams in draw order (duo partners queue together when there is
//! room), assigns a uniformly random rank permutation, and lands every team
//! around a uniform anchor on a square map with members scattered at
//! teammate scale.
//!
//! Each planted pair meets as opponents in `colluder_matches` matches. The
//! single `colluder_strength` dial `s` controls, independently:
//! the meetings forming one back-to-back session (probability `s`, else
//! scattered), landing next to each other (per match, probability `s`),
//! placing both in the top half within two ranks (per match, probability `s`),
//! platform friendship (probability `s`) and one earlier match as teammates
//! (probability `s`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, IngestError};
use crate::model::{Dataset, MatchRecord, PairKey, PlayerId, Position, Team};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_players: usize,
    pub team_size: usize,
    pub teams_per_match: usize,
    pub num_matches: usize,
    pub colluder_pairs: usize,
    /// In `[0, 1]`; 0 leaves only the repeated meetings.
    pub colluder_strength: f64,
    /// Opponent meetings per planted pair.
    pub colluder_matches: usize,
    pub seed: u64,
    /// Side of the square map, in game units.
    pub map_extent: f64,
    /// Per-axis standard deviation of a player's landing around the team anchor.
    pub teammate_spread: f64,
    /// Fraction of background players who queue in fixed duos.
    pub duo_fraction: f64,
    /// Random background friendships (usually between players who never meet).
    pub background_friendships: usize,
    pub match_interval_secs: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_players: 2000,
            team_size: 2,
            teams_per_match: 20,
            num_matches: 1000,
            colluder_pairs: 10,
            colluder_strength: 0.9,
            colluder_matches: 6,
            seed: 0,
            map_extent: 80_000.0,
            // mean teammate distance sigma * sqrt(pi) ~ 2,000 units
            teammate_spread: 1_128.0,
            duo_fraction: 0.3,
            background_friendships: 100,
            match_interval_secs: 60,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Config(m));
        if self.team_size < 2 {
            return fail(format!("team_size {} < 2", self.team_size));
        }
        if self.teams_per_match < 2 {
            return fail(format!("teams_per_match {} < 2", self.teams_per_match));
        }
        // one partner of each planted pair may be unavailable to a lobby
        if self.teams_per_match * self.team_size + self.colluder_pairs > self.num_players {
            return fail(format!(
                "a match needs {} players but only {} are available",
                self.teams_per_match * self.team_size,
                self.num_players.saturating_sub(self.colluder_pairs)
            ));
        }
        if self.colluder_pairs * 2 * self.team_size > self.teams_per_match * self.team_size {
            return fail(format!(
                "{} colluder pairs do not fit on distinct teams of one match",
                self.colluder_pairs
            ));
        }
        if !(0.0..=1.0).contains(&self.colluder_strength) {
            return fail(format!(
                "colluder_strength {} outside [0, 1]",
                self.colluder_strength
            ));
        }
        if self.colluder_pairs > 0 {
            if self.colluder_matches < 3 {
                return fail("colluder_matches must be >= 3".into());
            }
            if self.num_matches < self.colluder_matches + 1 {
                return fail(format!(
                    "num_matches {} too small for {} planted meetings",
                    self.num_matches, self.colluder_matches
                ));
            }
        }
        if !(self.map_extent.is_finite() && self.map_extent > 0.0) {
            return fail("map_extent must be positive".into());
        }
        if !(self.teammate_spread.is_finite() && self.teammate_spread >= 0.0) {
            return fail("teammate_spread must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.duo_fraction) {
            return fail("duo_fraction outside [0, 1]".into());
        }
        if self.match_interval_secs <= 0 {
            return fail("match_interval_secs must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub colluding_pairs: BTreeSet<PairKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Plant {
    Opponents,
    Teammates,
}

struct PlantedPair {
    a: usize,
    b: usize,
}

fn player_ids(n: usize) -> Vec<PlayerId> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n)
        .map(|i| PlayerId::new(format!("p{i:0width$}")))
        .collect()
}

/// Deterministic for a fixed config.
pub fn generate(cfg: &SimConfig) -> Result<(Dataset, GroundTruth), SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.colluder_strength;
    let ids = player_ids(cfg.num_players);

    let colluders = index::sample(&mut rng, cfg.num_players, cfg.colluder_pairs * 2).into_vec();
    let pairs: Vec<PlantedPair> = colluders
        .chunks(2)
        .map(|c| PlantedPair { a: c[0], b: c[1] })
        .collect();
    let mut partner_of = vec![None; cfg.num_players];
    for p in &pairs {
        partner_of[p.a] = Some(p.b);
        partner_of[p.b] = Some(p.a);
    }

    let mut duo_of = vec![None; cfg.num_players];
    let mut background: Vec<usize> = (0..cfg.num_players)
        .filter(|i| partner_of[*i].is_none())
        .collect();
    background.shuffle(&mut rng);
    let duo_players = ((background.len() as f64 * cfg.duo_fraction) as usize) & !1;
    for d in background[..duo_players].chunks(2) {
        duo_of[d[0]] = Some(d[1]);
        duo_of[d[1]] = Some(d[0]);
    }

    // schedule planted matches
    let mut plans: BTreeMap<usize, Vec<(usize, Plant)>> = BTreeMap::new();
    let mut friendships = BTreeSet::new();
    let first_allowed = (cfg.num_matches / 5).max(1);
    let last_start = cfg.num_matches.saturating_sub(cfg.colluder_matches);
    for (i, pair) in pairs.iter().enumerate() {
        let session: Vec<usize> = if rng.random_bool(s) {
            let start = rng.random_range(first_allowed.min(last_start)..=last_start);
            (start..start + cfg.colluder_matches).collect()
        } else {
            let lo = first_allowed.min(last_start);
            let mut v: Vec<usize> =
                index::sample(&mut rng, cfg.num_matches - lo, cfg.colluder_matches)
                    .into_iter()
                    .map(|k| k + lo)
                    .collect();
            v.sort_unstable();
            v
        };
        for &m in &session {
            plans.entry(m).or_default().push((i, Plant::Opponents));
        }
        if rng.random_bool(s) {
            let m = rng.random_range(0..session[0]);
            plans.entry(m).or_default().push((i, Plant::Teammates));
        }
        if rng.random_bool(s) {
            friendships
                .insert(PairKey::new(ids[pair.a].clone(), ids[pair.b].clone()).expect("distinct"));
        }
    }
    for _ in 0..cfg.background_friendships {
        let x = rng.random_range(0..cfg.num_players);
        let y = rng.random_range(0..cfg.num_players);
        if let Ok(k) = PairKey::new(ids[x].clone(), ids[y].clone()) {
            friendships.insert(k);
        }
    }

    let spread = Normal::new(0.0, cfg.teammate_spread).expect("validated spread");
    let base: DateTime<Utc> = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let mut lobby = Generator {
        cfg,
        rng: &mut rng,
        spread,
        partner_of: &partner_of,
        duo_of: &duo_of,
        order: (0..cfg.num_players).collect(),
    };
    let empty = Vec::new();
    let matches = (0..cfg.num_matches)
        .map(|m| {
            let plan = plans.get(&m).unwrap_or(&empty);
            let mut record = lobby.play(m, plan, &pairs, &ids);
            record.start_time = base + Duration::seconds(cfg.match_interval_secs * m as i64);
            record
        })
        .collect();

    let truth = GroundTruth {
        colluding_pairs: pairs
            .iter()
            .map(|p| PairKey::new(ids[p.a].clone(), ids[p.b].clone()).expect("distinct"))
            .collect(),
    };
    let dataset = Dataset::new(matches, friendships).expect("generated match ids are unique");
    Ok((dataset, truth))
}

struct Generator<'a> {
    cfg: &'a SimConfig,
    rng: &'a mut ChaCha8Rng,
    spread: Normal<f64>,
    partner_of: &'a [Option<usize>],
    duo_of: &'a [Option<usize>],
    order: Vec<usize>,
}

impl Generator<'_> {
    fn play(
        &mut self,
        m: usize,
        plan: &[(usize, Plant)],
        pairs: &[PlantedPair],
        ids: &[PlayerId],
    ) -> MatchRecord {
        let cfg = self.cfg;
        let teams_n = cfg.teams_per_match;
        let mut teams: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.team_size); teams_n];
        let mut placed = vec![false; cfg.num_players];
        // (team of a, team of b) for every planted opponent meeting
        let mut meetings = Vec::new();
        let mut next_team = 0;
        for &(i, kind) in plan {
            let p = &pairs[i];
            match kind {
                Plant::Opponents => {
                    teams[next_team].push(p.a);
                    teams[next_team + 1].push(p.b);
                    meetings.push((next_team, next_team + 1));
                    next_team += 2;
                }
                Plant::Teammates => {
                    teams[next_team].extend([p.a, p.b]);
                    next_team += 1;
                }
            }
            placed[p.a] = true;
            placed[p.b] = true;
        }

        self.order.shuffle(self.rng);
        let mut cursor = 0;
        for team in teams.iter_mut() {
            while team.len() < cfg.team_size {
                let x = self.order[cursor];
                cursor += 1;
                // planted pairs only meet in their planted matches
                if placed[x] || self.partner_of[x].is_some_and(|y| placed[y]) {
                    continue;
                }
                team.push(x);
                placed[x] = true;
                if let Some(y) = self.duo_of[x] {
                    if !placed[y] && team.len() < cfg.team_size {
                        team.push(y);
                        placed[y] = true;
                    }
                }
            }
        }

        // shuffle team slots so planted teams are not always first
        let mut slot: Vec<usize> = (0..teams_n).collect();
        slot.shuffle(self.rng);

        let mut ranks: Vec<u32> = (1..=teams_n as u32).collect();
        ranks.shuffle(self.rng);
        let mut locked = BTreeSet::new();
        for &(ta, tb) in &meetings {
            if !self.rng.random_bool(cfg.colluder_strength) {
                continue;
            }
            let half = (teams_n / 2) as u32;
            let options: Vec<(u32, u32)> = (1..=half)
                .flat_map(|r1| (1..=half).map(move |r2| (r1, r2)))
                .filter(|&(r1, r2)| {
                    (1..=2).contains(&r1.abs_diff(r2))
                        && !locked.contains(&r1)
                        && !locked.contains(&r2)
                })
                .collect();
            if options.is_empty() {
                continue;
            }
            let (r1, r2) = options[self.rng.random_range(0..options.len())];
            let holder = ranks.iter().position(|&r| r == r1).unwrap();
            ranks.swap(ta, holder);
            let holder = ranks.iter().position(|&r| r == r2).unwrap();
            ranks.swap(tb, holder);
            locked.insert(r1);
            locked.insert(r2);
        }

        let extent = cfg.map_extent;
        let mut anchors: Vec<(f64, f64)> = (0..teams_n)
            .map(|_| {
                (
                    self.rng.random_range(0.0..extent),
                    self.rng.random_range(0.0..extent),
                )
            })
            .collect();
        for &(ta, tb) in &meetings {
            if self.rng.random_bool(cfg.colluder_strength) {
                let (x, y) = anchors[ta];
                anchors[tb] = (
                    (x + self.spread.sample(self.rng)).clamp(0.0, extent),
                    (y + self.spread.sample(self.rng)).clamp(0.0, extent),
                );
            }
        }

        let mut landings = BTreeMap::new();
        let mut out_teams = Vec::with_capacity(teams_n);
        for (t, members) in teams.iter().enumerate() {
            let (ax, ay) = anchors[t];
            for &p in members {
                let x = (ax + self.spread.sample(self.rng)).clamp(0.0, extent);
                let y = (ay + self.spread.sample(self.rng)).clamp(0.0, extent);
                landings.insert(ids[p].clone(), Position::new(x, y));
            }
            out_teams.push(Team {
                index: slot[t] as u32,
                players: members.iter().map(|&p| ids[p].clone()).collect(),
                rank: ranks[t],
            });
        }
        out_teams.sort_by_key(|t| t.index);

        MatchRecord {
            match_id: format!("m{m:06}"),
            start_time: DateTime::<Utc>::UNIX_EPOCH,
            teams: out_teams,
            landings,
        }
    }
}

/// Writes the match log, friendship list and `ground_truth.csv` into `dir`.
pub fn write_dataset(d: &Dataset, gt: &GroundTruth, dir: &Path) -> Result<(), SimError> {
    ingest::write_dir(d, dir)?;
    let f = File::create(dir.join(GROUND_TRUTH_FILE)).map_err(IngestError::from)?;
    ingest::write_pairs_csv(&gt.colluding_pairs, BufWriter::new(f))?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth, IngestError> {
    let list = ingest::parse_friendships(BufReader::new(File::open(path)?))?;
    Ok(GroundTruth {
        colluding_pairs: list.pairs,
    })
}
