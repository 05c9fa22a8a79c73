//! Equal error rate and minimum normalized tandem detection cost.
//!
//! Both metrics come from one exhaustive threshold sweep. A trial is accepted
//! when `score >= threshold`; the sweep visits `-inf` (accept everything),
//! every distinct score above the minimum, and `+inf` (reject everything).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Target trial, or bonafide speech for a countermeasure.
    Positive,
    /// Non-target trial, or spoofed speech.
    Negative,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "target" | "bonafide" => Ok(Label::Positive),
            "nontarget" | "spoof" => Ok(Label::Negative),
            other => Err(format!(
                "label must be target, nontarget, bonafide or spoof, found {other:?}"
            )),
        }
    }
}

/// Parallel scores and labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl ScoreSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimMismatch {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite score {bad}")));
        }
        Ok(Self { scores, labels })
    }

    /// Positives and negatives given as separate score lists.
    pub fn from_split(positives: &[f64], negatives: &[f64]) -> Result<Self> {
        let scores = positives.iter().chain(negatives).copied().collect();
        let labels = std::iter::repeat_n(Label::Positive, positives.len())
            .chain(std::iter::repeat_n(Label::Negative, negatives.len()))
            .collect();
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        let pos = self
            .labels
            .iter()
            .filter(|&&l| l == Label::Positive)
            .count();
        (pos, self.labels.len() - pos)
    }
}

/// Error counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Negatives with `score >= threshold`.
    pub false_accepts: usize,
    /// Positives with `score < threshold`.
    pub misses: usize,
}

struct Sweep {
    points: Vec<OperatingPoint>,
    n_pos: usize,
    n_neg: usize,
}

impl Sweep {
    fn far(&self, p: &OperatingPoint) -> f64 {
        p.false_accepts as f64 / self.n_neg as f64
    }

    fn frr(&self, p: &OperatingPoint) -> f64 {
        p.misses as f64 / self.n_pos as f64
    }
}

fn sweep(s: &ScoreSet) -> Result<Sweep> {
    let (n_pos, n_neg) = s.counts();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels(String::new()));
    }
    let mut order: Vec<(f64, Label)> = s
        .scores
        .iter()
        .copied()
        .zip(s.labels.iter().copied())
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = vec![OperatingPoint {
        threshold: f64::NEG_INFINITY,
        false_accepts: n_neg,
        misses: 0,
    }];
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = order[i].0;
        if i > 0 {
            points.push(OperatingPoint {
                threshold: v,
                false_accepts: n_neg - neg_below,
                misses: pos_below,
            });
        }
        while i < order.len() && order[i].0 == v {
            match order[i].1 {
                Label::Positive => pos_below += 1,
                Label::Negative => neg_below += 1,
            }
            i += 1;
        }
    }
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        false_accepts: 0,
        misses: n_pos,
    });
    Ok(Sweep {
        points,
        n_pos,
        n_neg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EerMode {
    /// `(FAR + FRR) / 2` at the threshold where `|FAR - FRR|` is smallest.
    #[default]
    Midpoint,
    /// Linear interpolation of the crossing between the two bracketing thresholds.
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

pub fn eer(s: &ScoreSet) -> Result<EerResult> {
    eer_with(s, EerMode::Midpoint)
}

pub fn eer_with(s: &ScoreSet, mode: EerMode) -> Result<EerResult> {
    let sw = sweep(s)?;
    let (np, nn) = (sw.n_pos as i128, sw.n_neg as i128);
    // FAR - FRR scaled by n_pos * n_neg, exact
    let gap = |p: &OperatingPoint| p.false_accepts as i128 * np - p.misses as i128 * nn;
    match mode {
        EerMode::Midpoint => {
            let best = sw
                .points
                .iter()
                .min_by_key(|p| gap(p).abs())
                .expect("sweep is never empty");
            Ok(EerResult {
                eer: (sw.far(best) + sw.frr(best)) / 2.0,
                threshold: best.threshold,
            })
        }
        EerMode::Interpolated => {
            let k = sw
                .points
                .iter()
                .position(|p| gap(p) <= 0)
                .expect("the +inf point always has FAR <= FRR");
            let cur = &sw.points[k];
            if gap(cur) == 0 {
                return Ok(EerResult {
                    eer: sw.far(cur),
                    threshold: cur.threshold,
                });
            }
            let prev = &sw.points[k - 1];
            let (d0, d1) = (sw.far(prev) - sw.frr(prev), sw.far(cur) - sw.frr(cur));
            let alpha = d0 / (d0 - d1);
            Ok(EerResult {
                eer: sw.far(prev) + alpha * (sw.far(cur) - sw.far(prev)),
                threshold: cur.threshold,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// One (FAR, FRR) point per distinct threshold, from accept-all to reject-all.
pub fn det_points(s: &ScoreSet) -> Result<Vec<DetPoint>> {
    let sw = sweep(s)?;
    Ok(sw
        .points
        .iter()
        .map(|p| DetPoint {
            threshold: p.threshold,
            far: sw.far(p),
            frr: sw.frr(p),
        })
        .collect())
}

/// Priors, costs and fixed ASV error rates for the tandem detection cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub p_target: f64,
    pub p_nontarget: f64,
    pub p_spoof: f64,
    pub c_miss_asv: f64,
    pub c_fa_asv: f64,
    pub c_miss_cm: f64,
    pub c_fa_cm: f64,
    pub p_miss_asv: f64,
    pub p_fa_asv: f64,
    pub p_miss_spoof_asv: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let priors = [self.p_target, self.p_nontarget, self.p_spoof];
        if priors.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidConfig("priors must be nonnegative".into()));
        }
        if (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("priors must sum to 1".into()));
        }
        let costs = [self.c_miss_asv, self.c_fa_asv, self.c_miss_cm, self.c_fa_cm];
        if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidConfig("costs must be positive".into()));
        }
        let rates = [self.p_miss_asv, self.p_fa_asv, self.p_miss_spoof_asv];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig(
                "ASV error rates must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Weight on the countermeasure miss rate.
    pub fn c1(&self) -> f64 {
        self.p_target * (self.c_miss_cm - self.c_miss_asv * self.p_miss_asv)
            - self.p_nontarget * self.c_fa_asv * self.p_fa_asv
    }

    /// Weight on the countermeasure false-alarm rate.
    pub fn c2(&self) -> f64 {
        self.c_fa_cm * self.p_spoof * (1.0 - self.p_miss_spoof_asv)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cost: CostModel =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cost.validate()?;
        Ok(cost)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfResult {
    pub min_tdcf_norm: f64,
    pub threshold: f64,
}

/// `min_t (C1 * Pmiss_cm(t) + C2 * Pfa_cm(t)) / min(C1, C2)`; bonafide scores are the positives.
pub fn min_tdcf(cm: &ScoreSet, cost: &CostModel) -> Result<TdcfResult> {
    cost.validate()?;
    let (c1, c2) = (cost.c1(), cost.c2());
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::IllPosedCostModel(format!("C1 = {c1}, C2 = {c2}")));
    }
    let sw = sweep(cm)?;
    let norm = c1.min(c2);
    let mut best = TdcfResult {
        min_tdcf_norm: f64::INFINITY,
        threshold: f64::NEG_INFINITY,
    };
    for p in &sw.points {
        let v = (c1 * sw.frr(p) + c2 * sw.far(p)) / norm;
        if v < best.min_tdcf_norm {
            best = TdcfResult {
                min_tdcf_norm: v,
                threshold: p.threshold,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    pub trial_id: String,
    /// `None` for trials written with group `-`.
    pub group: Option<String>,
    pub label: Label,
    pub score: f64,
}

/// Parse `trial_id<TAB>group<TAB>label<TAB>score` lines. Blank lines and `#` comments are skipped.
pub fn parse_scorefile(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = trimmed.split('\t').collect();
        if f.len() != 4 {
            return Err(err(format!(
                "expected 4 tab-separated fields, found {}",
                f.len()
            )));
        }
        let label = f[2].parse().map_err(err)?;
        let score: f64 = f[3]
            .parse()
            .map_err(|e| err(format!("score {:?}: {e}", f[3])))?;
        if !score.is_finite() {
            return Err(err(format!("non-finite score {score}")));
        }
        out.push(ScoreRecord {
            trial_id: f[0].to_string(),
            group: (f[1] != "-").then(|| f[1].to_string()),
            label,
            score,
        });
    }
    Ok(out)
}

pub fn format_scorefile(records: &[ScoreRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let label = match r.label {
            Label::Positive => "bonafide",
            Label::Negative => "spoof",
        };
        writeln!(
            out,
            "{}\t{}\t{label}\t{}",
            r.trial_id,
            r.group.as_deref().unwrap_or("-"),
            r.score
        )
        .unwrap();
    }
    out
}

/// Same as [`format_scorefile`] but with target/nontarget labels.
pub fn format_asv_scorefile(records: &[ScoreRecord]) -> String {
    format_scorefile(records)
        .replace("\tbonafide\t", "\ttarget\t")
        .replace("\tspoof\t", "\tnontarget\t")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Eer,
    Tdcf,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eer" => Ok(Metric::Eer),
            "tdcf" => Ok(Metric::Tdcf),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub eer: EerResult,
    pub min_tdcf: Option<TdcfResult>,
}

/// Per-group rows (sorted by name) then a pooled `ALL` row.
///
/// Ungrouped trials (group `-`) belong to every group, so per-attack rows
/// score each attack's spoofs against the shared bonafide trials.
pub fn evaluate_records(
    records: &[ScoreRecord],
    metric: Metric,
    cost: Option<&CostModel>,
) -> Result<Vec<GroupReport>> {
    let cost = match (metric, cost) {
        (Metric::Tdcf, None) => {
            return Err(Error::InvalidConfig("t-DCF needs a cost model".into()))
        }
        (Metric::Tdcf, Some(c)) => Some(c),
        (Metric::Eer, _) => None,
    };
    let groups: BTreeSet<&str> = records.iter().filter_map(|r| r.group.as_deref()).collect();
    let evaluate = |name: &str, keep: &dyn Fn(&ScoreRecord) -> bool| -> Result<GroupReport> {
        let chosen: Vec<&ScoreRecord> = records.iter().filter(|r| keep(r)).collect();
        let set = ScoreSet::new(
            chosen.iter().map(|r| r.score).collect(),
            chosen.iter().map(|r| r.label).collect(),
        )?;
        let (n_pos, n_neg) = set.counts();
        let with_name = |e: Error| match e {
            Error::DegenerateLabels(_) => Error::DegenerateLabels(format!(" (group {name})")),
            other => other,
        };
        Ok(GroupReport {
            group: name.to_string(),
            n_pos,
            n_neg,
            eer: eer(&set).map_err(with_name)?,
            min_tdcf: cost
                .map(|c| min_tdcf(&set, c))
                .transpose()
                .map_err(with_name)?,
        })
    };
    let mut out = Vec::new();
    for g in &groups {
        out.push(evaluate(g, &|r| {
            r.group.as_deref().is_none_or(|rg| rg == *g)
        })?);
    }
    out.push(evaluate("ALL", &|_| true)?);
    Ok(out)
}

/// CSV `group,n_pos,n_neg,eer,threshold[,min_tdcf]`.
pub fn report_csv(rows: &[GroupReport]) -> String {
    let with_tdcf = rows.iter().any(|r| r.min_tdcf.is_some());
    let mut out = String::from("group,n_pos,n_neg,eer,threshold");
    if with_tdcf {
        out.push_str(",min_tdcf");
    }
    out.push('\n');
    for r in rows {
        write!(
            out,
            "{},{},{},{},{}",
            r.group, r.n_pos, r.n_neg, r.eer.eer, r.eer.threshold
        )
        .unwrap();
        if let Some(t) = r.min_tdcf {
            write!(out, ",{}", t.min_tdcf_norm).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn evaluate_scorefile(
    path: impl AsRef<Path>,
    metric: Metric,
    cost: Option<&CostModel>,
) -> Result<Vec<GroupReport>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    evaluate_records(&parse_scorefile(&text)?, metric, cost)
}
