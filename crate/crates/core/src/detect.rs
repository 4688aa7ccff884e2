//! Detection pipeline: active-player filter, opponent-pair features,
//! isolation forest, thresholding and the ranked report.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extract_pairs, PairContext, PairFeatures, FEATURE_NAMES};
use crate::iforest::{self, AnomalyScore, FeatureRanges, ForestError, ForestModel, ForestParams};
use crate::ingest::filter_active_players;
use crate::model::{Dataset, PairKey, PlayerId};
use crate::simulate::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Dataset,
    ActivePlayers,
    SharedMatches,
}

impl fmt::Display for FilterStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterStage::Dataset => "dataset has no matches",
            FilterStage::ActivePlayers => "no player reaches the minimum match count",
            FilterStage::SharedMatches => "no opponent pair reaches the minimum shared matches",
        })
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("nothing to score: {0}")]
    EmptyAfterFilter(FilterStage),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How scored pairs become flagged pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    /// Every negative score.
    #[default]
    ScoreZero,
    /// The `k` lowest scores.
    TopK(usize),
    /// The lowest `ceil(q * N)` scores, `q` in `(0, 1]`.
    Contamination(f64),
}

impl Threshold {
    pub fn validate(&self) -> Result<(), DetectError> {
        match *self {
            Threshold::ScoreZero => Ok(()),
            Threshold::TopK(0) => Err(DetectError::InvalidThreshold("k must be > 0".into())),
            Threshold::TopK(_) => Ok(()),
            Threshold::Contamination(q) if q > 0.0 && q <= 1.0 => Ok(()),
            Threshold::Contamination(q) => Err(DetectError::InvalidThreshold(format!(
                "contamination {q} outside (0, 1]"
            ))),
        }
    }

    /// Number of flagged pairs among `sorted` (ascending) scores.
    fn cutoff(&self, sorted: &[AnomalyScore]) -> usize {
        match *self {
            Threshold::ScoreZero => sorted.partition_point(|s| s.is_outlier()),
            Threshold::TopK(k) => k.min(sorted.len()),
            Threshold::Contamination(q) => {
                ((q * sorted.len() as f64).ceil() as usize).min(sorted.len())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub min_shared_matches: usize,
    pub min_player_matches: usize,
    pub forest: ForestParams,
    pub threshold: Threshold,
    /// Overrides `forest.scale_features`.
    pub scale_features: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            min_shared_matches: 5,
            min_player_matches: 3,
            forest: ForestParams::default(),
            threshold: Threshold::ScoreZero,
            scale_features: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedPair {
    pub pair: PairKey,
    pub score: AnomalyScore,
    pub features: PairFeatures,
    /// 1-based position in the report.
    pub rank_in_report: usize,
    /// Detector feature furthest from the population median after min-max scaling.
    pub dominant_feature: &'static str,
}

#[derive(Debug, Clone)]
pub struct Detection {
    /// Flagged pairs, most anomalous first.
    pub report: Vec<FlaggedPair>,
    /// Every qualifying opponent pair that was scored.
    pub scored: usize,
    pub model: ForestModel,
}

pub fn run_detection(d: &Dataset, cfg: &DetectConfig) -> Result<Detection, DetectError> {
    cfg.threshold.validate()?;
    if d.is_empty() {
        return Err(DetectError::EmptyAfterFilter(FilterStage::Dataset));
    }
    let active = filter_active_players(d, cfg.min_player_matches);
    if active.active_count() < 2 {
        return Err(DetectError::EmptyAfterFilter(FilterStage::ActivePlayers));
    }
    let rows = extract_pairs(&active, cfg.min_shared_matches, PairContext::Opponent);
    if rows.is_empty() {
        return Err(DetectError::EmptyAfterFilter(FilterStage::SharedMatches));
    }
    let vectors: Vec<[f64; 5]> = rows
        .iter()
        .map(|r| {
            r.detector_vector()
                .expect("opponent rows have opponent averages")
        })
        .collect();
    let params = ForestParams {
        scale_features: cfg.scale_features,
        ..cfg.forest
    };
    let model = iforest::fit(&vectors, &params)?;
    let scores = model.score_all(&vectors)?;
    let dominant = dominant_features(&vectors);

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        scores[i]
            .total_cmp(&scores[j])
            .then_with(|| rows[i].pair.cmp(&rows[j].pair))
    });
    let sorted: Vec<AnomalyScore> = order.iter().map(|&i| scores[i]).collect();
    let n_flagged = cfg.threshold.cutoff(&sorted);
    let scored = rows.len();
    let mut rows: Vec<Option<PairFeatures>> = rows.into_iter().map(Some).collect();
    let report = order[..n_flagged]
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let features = rows[i].take().expect("each row is reported once");
            FlaggedPair {
                pair: features.pair.clone(),
                score: scores[i],
                features,
                rank_in_report: pos + 1,
                dominant_feature: FEATURE_NAMES[dominant[i]],
            }
        })
        .collect();
    Ok(Detection {
        report,
        scored,
        model,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Index of the feature with the largest scaled deviation from the median,
/// per row; ties go to the earlier feature.
fn dominant_features(vectors: &[[f64; 5]]) -> Vec<usize> {
    let ranges = FeatureRanges::of(vectors);
    let scaled: Vec<Vec<f64>> = vectors.iter().map(|v| ranges.scale(v)).collect();
    let medians: Vec<f64> = (0..5)
        .map(|f| median(scaled.iter().map(|r| r[f]).collect()))
        .collect();
    scaled
        .iter()
        .map(|r| {
            let mut best = 0;
            for f in 1..5 {
                if (r[f] - medians[f]).abs() > (r[best] - medians[best]).abs() {
                    best = f;
                }
            }
            best
        })
        .collect()
}

/// Flat report row; the CSV and JSONL forms share it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rank: usize,
    pub pair_a: PlayerId,
    pub pair_b: PlayerId,
    pub anomaly_score: f64,
    pub acquaintance: bool,
    pub rank_difference: f64,
    pub max_consecutive: usize,
    pub proximity: f64,
    pub num_matches: usize,
    pub dominant_feature: String,
    pub num_matches_team: usize,
    pub max_consecutive_team: usize,
    pub proximity_team: Option<f64>,
    pub match_ids: String,
}

impl From<&FlaggedPair> for ReportRow {
    fn from(f: &FlaggedPair) -> Self {
        let x = &f.features;
        ReportRow {
            rank: f.rank_in_report,
            pair_a: f.pair.a().clone(),
            pair_b: f.pair.b().clone(),
            anomaly_score: f.score.value(),
            acquaintance: x.acquaintance,
            rank_difference: x.avg_rank_diff_opp.unwrap_or(f64::NAN),
            max_consecutive: x.max_consecutive_opp,
            proximity: x.avg_distance_opp.unwrap_or(f64::NAN),
            num_matches: x.num_matches_opp,
            dominant_feature: f.dominant_feature.to_owned(),
            num_matches_team: x.num_matches_team,
            max_consecutive_team: x.max_consecutive_team,
            proximity_team: x.avg_distance_team,
            match_ids: x.match_ids.join(";"),
        }
    }
}

impl TryFrom<ReportRow> for FlaggedPair {
    type Error = DetectError;

    fn try_from(r: ReportRow) -> Result<Self, DetectError> {
        let pair =
            PairKey::new(r.pair_a, r.pair_b).map_err(|e| DetectError::Report(e.to_string()))?;
        let dominant_feature = FEATURE_NAMES
            .iter()
            .find(|n| **n == r.dominant_feature)
            .ok_or_else(|| {
                DetectError::Report(format!("unknown feature {:?}", r.dominant_feature))
            })?;
        let match_ids = if r.match_ids.is_empty() {
            Vec::new()
        } else {
            r.match_ids.split(';').map(str::to_owned).collect()
        };
        Ok(FlaggedPair {
            score: AnomalyScore(r.anomaly_score),
            rank_in_report: r.rank,
            dominant_feature,
            features: PairFeatures {
                pair: pair.clone(),
                num_matches_opp: r.num_matches,
                num_matches_team: r.num_matches_team,
                max_consecutive_opp: r.max_consecutive,
                max_consecutive_team: r.max_consecutive_team,
                avg_distance_opp: Some(r.proximity),
                avg_rank_diff_opp: Some(r.rank_difference),
                acquaintance: r.acquaintance,
                avg_distance_team: r.proximity_team,
                match_ids,
            },
            pair,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl ReportFormat {
    /// `.jsonl` / `.json` paths are JSON lines, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => ReportFormat::Jsonl,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn write_report<W: Write>(
    report: &[FlaggedPair],
    format: ReportFormat,
    out: W,
) -> Result<(), DetectError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(out);
            w.write_record(REPORT_HEADER).map_err(csv_err)?;
            for f in report {
                w.serialize(ReportRow::from(f)).map_err(csv_err)?;
            }
            w.flush()?;
        }
        ReportFormat::Jsonl => {
            let mut out = io::BufWriter::new(out);
            for f in report {
                serde_json::to_writer(&mut out, &ReportRow::from(f))
                    .map_err(|e| DetectError::Report(e.to_string()))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

const REPORT_HEADER: [&str; 14] = [
    "rank",
    "pair_a",
    "pair_b",
    "anomaly_score",
    "acquaintance",
    "rank_difference",
    "max_consecutive",
    "proximity",
    "num_matches",
    "dominant_feature",
    "num_matches_team",
    "max_consecutive_team",
    "proximity_team",
    "match_ids",
];

fn csv_err(e: csv::Error) -> DetectError {
    DetectError::Report(e.to_string())
}

pub fn read_report<R: Read>(
    input: R,
    format: ReportFormat,
) -> Result<Vec<FlaggedPair>, DetectError> {
    let rows: Vec<ReportRow> = match format {
        ReportFormat::Csv => csv::Reader::from_reader(input)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(csv_err)?,
        ReportFormat::Jsonl => {
            let mut rows = Vec::new();
            for (i, line) in io::BufReader::new(input).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                rows.push(
                    serde_json::from_str(&line)
                        .map_err(|e| DetectError::Report(format!("line {}: {e}", i + 1)))?,
                );
            }
            rows
        }
    };
    let report: Vec<FlaggedPair> = rows
        .into_iter()
        .map(FlaggedPair::try_from)
        .collect::<Result<_, _>>()?;
    let mut seen = BTreeSet::new();
    for (i, f) in report.iter().enumerate() {
        if f.rank_in_report != i + 1 {
            return Err(DetectError::Report(format!(
                "row {} has rank {}",
                i + 1,
                f.rank_in_report
            )));
        }
        if !seen.insert(&f.pair) {
            return Err(DetectError::Report(format!("pair {} listed twice", f.pair)));
        }
    }
    Ok(report)
}

/// Reads a report file, choosing the format from its extension.
pub fn read_report_file(path: &Path) -> Result<Vec<FlaggedPair>, DetectError> {
    read_report(std::fs::File::open(path)?, ReportFormat::from_path(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub recall_at_k: f64,
    pub precision_at_k: f64,
    pub planted_found: usize,
    pub k: usize,
}

/// Top-`k` recall and precision. A report shorter than `k` contributes all of
/// its rows; precision still divides by `k`. Recall is 0 with no planted pairs.
pub fn evaluate(report: &[FlaggedPair], gt: &GroundTruth, k: usize) -> EvalResult {
    let found = report
        .iter()
        .take(k)
        .filter(|f| gt.colluding_pairs.contains(&f.pair))
        .count();
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    EvalResult {
        recall_at_k: ratio(found, gt.colluding_pairs.len()),
        precision_at_k: ratio(found, k),
        planted_found: found,
        k,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextStats {
    pub pairs: usize,
    pub avg_matches: f64,
    pub max_matches: usize,
    pub avg_distance: f64,
    /// Opponents only.
    pub avg_rank_diff: Option<f64>,
    pub pairs_3plus_consecutive: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub matches: usize,
    pub players: usize,
    pub active_players: usize,
    pub teammates: ContextStats,
    pub opponents: ContextStats,
    pub acquaintances: usize,
}

/// Pair statistics over players with at least `min_player_matches` matches;
/// a pair counts in a context once it shared one match there. Averages are
/// over pairs of their per-pair averages.
pub fn summarize(d: &Dataset, min_player_matches: usize) -> DatasetSummary {
    let active = filter_active_players(d, min_player_matches);
    let team = extract_pairs(&active, 1, PairContext::Teammate);
    let opp = extract_pairs(&active, 1, PairContext::Opponent);

    let stats = |rows: &[PairFeatures], ctx: PairContext| {
        let n = rows.len();
        let mean = |f: &dyn Fn(&PairFeatures) -> f64| {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let dist = |r: &PairFeatures| match ctx {
            PairContext::Teammate => r.avg_distance_team,
            PairContext::Opponent => r.avg_distance_opp,
        };
        let streak = |r: &PairFeatures| match ctx {
            PairContext::Teammate => r.max_consecutive_team,
            PairContext::Opponent => r.max_consecutive_opp,
        };
        ContextStats {
            pairs: n,
            avg_matches: mean(&|r| r.matches_in(ctx) as f64),
            max_matches: rows.iter().map(|r| r.matches_in(ctx)).max().unwrap_or(0),
            avg_distance: mean(&|r| dist(r).unwrap_or(0.0)),
            avg_rank_diff: (ctx == PairContext::Opponent)
                .then(|| mean(&|r| r.avg_rank_diff_opp.unwrap_or(0.0))),
            pairs_3plus_consecutive: rows.iter().filter(|r| streak(r) >= 3).count(),
        }
    };

    let acquainted: BTreeSet<&PairKey> = team
        .iter()
        .chain(&opp)
        .filter(|r| r.acquaintance)
        .map(|r| &r.pair)
        .collect();
    DatasetSummary {
        matches: d.matches().len(),
        players: d.appearances().len(),
        active_players: active.active_count(),
        teammates: stats(&team, PairContext::Teammate),
        opponents: stats(&opp, PairContext::Opponent),
        acquaintances: acquainted.len(),
    }
}
