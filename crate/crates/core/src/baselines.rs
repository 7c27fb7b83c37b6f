//! Score-distribution post-retrieval predictors and linear interpolation
//! with a second predictor.
//!
//! All predictors read a descending list of retrieval scores, a reference
//! collection score `s(C)`, and the query length. Higher output means the
//! query is predicted to perform better.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::RetrievalRun;
use crate::error::{QppError, Result};

/// Offset used when shifting scores to be strictly positive.
pub const SHIFT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreListContext {
    scores: Vec<f64>,
    collection_score: f64,
    query_length: usize,
}

impl ScoreListContext {
    pub fn new(scores: Vec<f64>, collection_score: f64, query_length: usize) -> Result<Self> {
        if scores.is_empty() {
            return Err(QppError::Input("empty score list".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) || !collection_score.is_finite() {
            return Err(QppError::Input("non-finite score".into()));
        }
        if scores.windows(2).any(|w| w[0] < w[1]) {
            return Err(QppError::Input("scores must be sorted descending".into()));
        }
        if query_length == 0 {
            return Err(QppError::Input("query length must be >= 1".into()));
        }
        Ok(Self {
            scores,
            collection_score,
            query_length,
        })
    }

    /// Context for one query of a run. `s(C)` defaults to the mean score of
    /// the full retrieved list.
    pub fn from_run(
        run: &RetrievalRun,
        qid: &str,
        collection_score: Option<f64>,
        query_length: usize,
    ) -> Result<Self> {
        let scores = run
            .scores(qid)
            .ok_or_else(|| QppError::Input(format!("query {qid} not in run")))?;
        let sc = collection_score.unwrap_or_else(|| mean(&scores));
        Self::new(scores, sc, query_length)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn collection_score(&self) -> f64 {
        self.collection_score
    }

    pub fn query_length(&self) -> usize {
        self.query_length
    }

    fn top(&self, k: usize) -> Result<&[f64]> {
        if k == 0 || k > self.scores.len() {
            return Err(QppError::Input(format!(
                "depth {k} outside 1..={}",
                self.scores.len()
            )));
        }
        Ok(&self.scores[..k])
    }

    fn abs_collection_score(&self) -> Result<f64> {
        if self.collection_score == 0.0 {
            return Err(QppError::DegenerateDivision("collection score is 0".into()));
        }
        Ok(self.collection_score.abs())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn shifted(v: &[f64], min: f64) -> Vec<f64> {
    v.iter().map(|s| s - min + SHIFT_EPSILON).collect()
}

/// Population standard deviation of the top-k scores.
pub fn sigma_k(ctx: &ScoreListContext, k: usize) -> Result<f64> {
    Ok(population_std(ctx.top(k)?))
}

/// Normalized query commitment: σ_k / |s(C)|.
pub fn nqc(ctx: &ScoreListContext, k: usize) -> Result<f64> {
    let top = ctx.top(k)?;
    Ok(population_std(top) / ctx.abs_collection_score()?)
}

/// Weighted information gain: mean gain over s(C), scaled by 1/√|q|.
pub fn wig(ctx: &ScoreListContext, k: usize) -> Result<f64> {
    let top = ctx.top(k)?;
    let gain: f64 = top.iter().map(|s| s - ctx.collection_score).sum();
    Ok(gain / (k as f64 * (ctx.query_length as f64).sqrt()))
}

/// Score magnitude and variance. Scores are shifted to be positive (using the
/// top-k minimum) when any top-k score is <= 0.
pub fn smv(ctx: &ScoreListContext, k: usize) -> Result<f64> {
    let top = ctx.top(k)?;
    let sc = ctx.abs_collection_score()?;
    let min = top[k - 1];
    let vals = if min <= 0.0 { shifted(top, min) } else { top.to_vec() };
    let mu = mean(&vals);
    let total: f64 = vals.iter().map(|s| s * (s / mu).ln().abs()).sum();
    Ok(total / k as f64 / sc)
}

/// Standard deviation of the scores within `x_percent` of the top score,
/// normalised by |s(C)|. Uses the full list; scores are shifted positive when
/// the top score is <= 0.
pub fn n_sigma_x(ctx: &ScoreListContext, x_percent: f64) -> Result<f64> {
    if !(x_percent > 0.0 && x_percent <= 100.0) {
        return Err(QppError::Input(format!("x_percent {x_percent} outside (0, 100]")));
    }
    let sc = ctx.abs_collection_score()?;
    let all = &ctx.scores;
    let keyed = if all[0] <= 0.0 {
        shifted(all, all[all.len() - 1])
    } else {
        all.clone()
    };
    let threshold = x_percent / 100.0 * keyed[0];
    let selected: Vec<f64> = all
        .iter()
        .zip(&keyed)
        .filter(|(_, k)| **k >= threshold)
        .map(|(s, _)| *s)
        .collect();
    if selected.len() <= 1 {
        return Ok(0.0);
    }
    Ok(population_std(&selected) / sc)
}

/// A registered score-based predictor with its depth parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScorePredictor {
    SigmaK(usize),
    Nqc(usize),
    Wig(usize),
    Smv(usize),
    NSigma(f64),
}

impl ScorePredictor {
    /// Parse a method name (`sigma_k`, `nqc`, `wig`, `smv`, `nsigma`).
    pub fn from_name(name: &str, k: usize, x_percent: f64) -> Result<Self> {
        Ok(match name {
            "sigma_k" => ScorePredictor::SigmaK(k),
            "nqc" => ScorePredictor::Nqc(k),
            "wig" => ScorePredictor::Wig(k),
            "smv" => ScorePredictor::Smv(k),
            "nsigma" => ScorePredictor::NSigma(x_percent),
            other => return Err(QppError::Input(format!("unknown predictor '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScorePredictor::SigmaK(_) => "sigma_k",
            ScorePredictor::Nqc(_) => "nqc",
            ScorePredictor::Wig(_) => "wig",
            ScorePredictor::Smv(_) => "smv",
            ScorePredictor::NSigma(_) => "nsigma",
        }
    }

    /// Depth-based predictors use min(k, list length).
    pub fn evaluate(&self, ctx: &ScoreListContext) -> Result<f64> {
        let clamp = |k: usize| k.min(ctx.scores.len()).max(1);
        match *self {
            ScorePredictor::SigmaK(k) => sigma_k(ctx, clamp(k)),
            ScorePredictor::Nqc(k) => nqc(ctx, clamp(k)),
            ScorePredictor::Wig(k) => wig(ctx, clamp(k)),
            ScorePredictor::Smv(k) => smv(ctx, clamp(k)),
            ScorePredictor::NSigma(x) => n_sigma_x(ctx, x),
        }
    }
}

impl fmt::Display for ScorePredictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-query inputs that are not derivable from the run alone.
#[derive(Debug, Clone, Default)]
pub struct QuerySideInfo {
    pub collection_scores: BTreeMap<String, f64>,
    pub query_lengths: BTreeMap<String, usize>,
}

impl QuerySideInfo {
    pub fn context(&self, run: &RetrievalRun, qid: &str) -> Result<ScoreListContext> {
        let len = self.query_lengths.get(qid).copied().unwrap_or(1);
        ScoreListContext::from_run(run, qid, self.collection_scores.get(qid).copied(), len)
    }
}

/// Score every listed query with one predictor.
pub fn score_queries<'a>(
    predictor: ScorePredictor,
    run: &RetrievalRun,
    side: &QuerySideInfo,
    qids: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, f64>> {
    qids.into_iter()
        .map(|q| Ok((q.to_string(), predictor.evaluate(&side.context(run, q)?)?)))
        .collect()
}

/// Parse `qid s_c` lines.
pub fn parse_collection_scores(raw: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, sc] = cols[..] else {
            return Err(QppError::parse(i + 1, "expected 'qid s_c'"));
        };
        let sc: f64 = sc
            .parse()
            .map_err(|_| QppError::parse(i + 1, format!("bad score '{sc}'")))?;
        out.insert(qid.to_string(), sc);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationConfig {
    pub lambda: f64,
}

impl InterpolationConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(QppError::Input(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { lambda })
    }
}

/// Z-score normalise a set of values (population deviation); constant sets map to 0.
pub fn z_scores(values: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let v: Vec<f64> = values.values().copied().collect();
    let m = mean(&v);
    let sd = population_std(&v);
    values
        .iter()
        .map(|(q, x)| (q.clone(), if sd > 0.0 { (x - m) / sd } else { 0.0 }))
        .collect()
}

/// λ·z(primary) + (1-λ)·z(baseline) over an identical query set.
pub fn interpolate(
    primary: &BTreeMap<String, f64>,
    baseline: &BTreeMap<String, f64>,
    cfg: InterpolationConfig,
) -> Result<BTreeMap<String, f64>> {
    if primary.len() != baseline.len() || primary.keys().any(|q| !baseline.contains_key(q)) {
        return Err(QppError::Input(
            "interpolation inputs cover different queries".into(),
        ));
    }
    let zp = z_scores(primary);
    let zb = z_scores(baseline);
    let lambda = cfg.lambda;
    Ok(zp
        .iter()
        .map(|(q, p)| (q.clone(), lambda * p + (1.0 - lambda) * zb[q]))
        .collect())
}

impl FromStr for InterpolationConfig {
    type Err = QppError;
    fn from_str(s: &str) -> Result<Self> {
        let lambda = s
            .parse()
            .map_err(|_| QppError::Input(format!("bad lambda '{s}'")))?;
        Self::new(lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(scores: &[f64], sc: f64, qlen: usize) -> ScoreListContext {
        ScoreListContext::new(scores.to_vec(), sc, qlen).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-5
    }

    #[test]
    fn sigma_examples() {
        assert!(close(sigma_k(&ctx(&[3.0, 2.0, 1.0], 1.0, 1), 3).unwrap(), 0.81650));
        assert_eq!(sigma_k(&ctx(&[2.0, 2.0, 2.0], 1.0, 1), 3).unwrap(), 0.0);
        assert_eq!(sigma_k(&ctx(&[3.0, 2.0], 1.0, 1), 1).unwrap(), 0.0);
        assert!(sigma_k(&ctx(&[3.0], 1.0, 1), 2).is_err());
    }

    #[test]
    fn nqc_examples() {
        assert!(close(nqc(&ctx(&[3.0, 2.0, 1.0], 2.0, 1), 3).unwrap(), 0.40825));
        assert_eq!(nqc(&ctx(&[1.0, 1.0], 2.0, 1), 2).unwrap(), 0.0);
        let a = nqc(&ctx(&[3.0, 2.0, 1.0], 2.0, 1), 3).unwrap();
        let b = nqc(&ctx(&[21.0, 14.0, 7.0], 14.0, 1), 3).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(matches!(
            nqc(&ctx(&[3.0, 2.0], 0.0, 1), 2),
            Err(QppError::DegenerateDivision(_))
        ));
    }

    #[test]
    fn wig_examples() {
        assert_eq!(wig(&ctx(&[3.0, 2.0, 1.0], 1.0, 4), 3).unwrap(), 0.5);
        assert_eq!(wig(&ctx(&[1.0, 1.0], 1.0, 2), 2).unwrap(), 0.0);
        assert_eq!(wig(&ctx(&[2.0], 1.0, 1), 1).unwrap(), 1.0);
    }

    #[test]
    fn smv_examples() {
        assert_eq!(smv(&ctx(&[4.0, 4.0, 4.0], 1.0, 1), 3).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let v = smv(&ctx(&[2.0 * e, 2.0], 1.0, 1), 2).unwrap();
        assert!((v - 1.6527503395887968).abs() < 1e-12, "{v}");
        assert_eq!(smv(&ctx(&[5.0, 1.0], 1.0, 1), 1).unwrap(), 0.0);
        // Non-positive scores trigger the shift and stay finite.
        assert!(smv(&ctx(&[-1.0, -2.0, -4.0], -3.0, 1), 3).unwrap().is_finite());
    }

    #[test]
    fn n_sigma_examples() {
        assert_eq!(n_sigma_x(&ctx(&[10.0, 9.0, 1.0], 2.0, 1), 50.0).unwrap(), 0.25);
        assert_eq!(n_sigma_x(&ctx(&[10.0, 9.0, 1.0], 2.0, 1), 100.0).unwrap(), 0.0);
        assert_eq!(n_sigma_x(&ctx(&[3.0, 3.0, 3.0], 2.0, 1), 25.0).unwrap(), 0.0);
        assert!(n_sigma_x(&ctx(&[3.0], 2.0, 1), 0.0).is_err());
        // QL-style negative scores: shifted list [4+e, 3+e, e] keeps the top two at x=50.
        let v = n_sigma_x(&ctx(&[-5.0, -6.0, -9.0], -7.0, 1), 50.0).unwrap();
        assert!((v - 0.5 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn default_collection_score_is_list_mean() {
        let run = crate::data::parse_run("q Q0 a 1 3 t\nq Q0 b 2 1 t\n").unwrap();
        let c = ScoreListContext::from_run(&run, "q", None, 1).unwrap();
        assert_eq!(c.collection_score(), 2.0);
        let c = ScoreListContext::from_run(&run, "q", Some(5.0), 1).unwrap();
        assert_eq!(c.collection_score(), 5.0);
    }

    fn map(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(q, x)| (q.to_string(), *x)).collect()
    }

    #[test]
    fn interpolation() {
        let p = map(&[("a", 1.0), ("b", -1.0)]);
        let b = map(&[("a", -1.0), ("b", 1.0)]);
        let out = interpolate(&p, &b, InterpolationConfig::new(0.75).unwrap()).unwrap();
        assert!((out["a"] - 0.5).abs() < 1e-15 && (out["b"] + 0.5).abs() < 1e-15);
        let c = map(&[("a", 1.0), ("z", 2.0)]);
        assert!(interpolate(&p, &c, InterpolationConfig::new(0.5).unwrap()).is_err());
        assert!(InterpolationConfig::new(1.5).is_err());
    }
}
