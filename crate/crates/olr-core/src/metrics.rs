//! Evaluation metrics: pairwise average cost (Cavg), equal error rate,
//! minimum detection cost, DET operating points and identification rate.
//!
//! Detection conventions, shared by every threshold sweep:
//! a trial decides "yes" iff its score >= theta; candidate thresholds are
//! the distinct finite pooled scores plus one cut above the maximum.
//! Negative-infinity scores (lost trials) never decide yes.

use std::io::Write as _;
use std::path::Path;

use crate::backend::ScoreVector;
use crate::corpus::LanguageCode;
use crate::error::{Error, Result};

/// One scored test segment with its ground truth.
#[derive(Clone, Debug)]
pub struct Trial {
    pub segment_id: String,
    pub truth: LanguageCode,
    pub scores: ScoreVector,
}

/// Score table over a fixed language order.
#[derive(Clone, Debug)]
pub struct TrialScores {
    languages: Vec<LanguageCode>,
    trials: Vec<Trial>,
}

impl TrialScores {
    pub fn new(languages: Vec<LanguageCode>, trials: Vec<Trial>) -> Result<Self> {
        if languages.is_empty() {
            return Err(Error::Config("no languages".to_string()));
        }
        for trial in &trials {
            if trial.scores.len() != languages.len() {
                return Err(Error::DimensionMismatch {
                    what: "score vector vs languages",
                    expected: languages.len(),
                    got: trial.scores.len(),
                });
            }
            if !languages.contains(&trial.truth) {
                return Err(Error::Config(format!(
                    "segment {} has truth {} outside the language set",
                    trial.segment_id, trial.truth
                )));
            }
        }
        Ok(TrialScores { languages, trials })
    }

    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    fn truth_index(&self, trial: &Trial) -> usize {
        self.languages.iter().position(|&l| l == trial.truth).unwrap()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MetricConfig {
    pub p_target: f64,
    /// Hard decision threshold for Cavg; the submission convention fixes 0.
    pub decision_threshold: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            p_target: 0.5,
            decision_threshold: 0.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::Config(format!(
                "p_target must be in (0, 1), got {}",
                self.p_target
            )));
        }
        Ok(())
    }
}

/// Cavg with its per-pair miss/false-alarm breakdown.
#[derive(Clone, Debug)]
pub struct CavgBreakdown {
    pub cavg: f64,
    /// P_Miss per target language.
    pub p_miss: Vec<f64>,
    /// P_FA[target][nontarget]; the diagonal is unused and zero.
    pub p_fa: Vec<Vec<f64>>,
}

/// Average pairwise detection cost under hard threshold decisions.
pub fn compute_cavg(trials: &TrialScores, cfg: &MetricConfig) -> Result<CavgBreakdown> {
    cfg.validate()?;
    let n_lang = trials.languages.len();
    if n_lang < 2 {
        return Err(Error::Config(
            "Cavg needs at least 2 languages".to_string(),
        ));
    }
    let mut counts = vec![0usize; n_lang];
    for trial in &trials.trials {
        counts[trials.truth_index(trial)] += 1;
    }
    for (i, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::MissingLanguage(trials.languages[i].to_string()));
        }
    }

    let theta = cfg.decision_threshold;
    let mut p_miss = vec![0.0f64; n_lang];
    let mut p_fa = vec![vec![0.0f64; n_lang]; n_lang];
    for trial in &trials.trials {
        let truth = trials.truth_index(trial);
        let scores = trial.scores.scores();
        if !(scores[truth] >= theta) {
            p_miss[truth] += 1.0;
        }
        for target in 0..n_lang {
            if target != truth && scores[target] >= theta {
                p_fa[target][truth] += 1.0;
            }
        }
    }
    for t in 0..n_lang {
        p_miss[t] /= counts[t] as f64;
        for n in 0..n_lang {
            if n != t {
                p_fa[t][n] /= counts[n] as f64;
            }
        }
    }

    // Summing the raw false-alarm rates before applying the non-target
    // prior keeps the closed-form cases (all-yes, all-lost) exact.
    let mut cavg = 0.0;
    for t in 0..n_lang {
        let fa_sum: f64 = (0..n_lang).filter(|&n| n != t).map(|n| p_fa[t][n]).sum();
        cavg += cfg.p_target * p_miss[t]
            + (1.0 - cfg.p_target) * fa_sum / (n_lang as f64 - 1.0);
    }
    cavg /= n_lang as f64;

    Ok(CavgBreakdown { cavg, p_miss, p_fa })
}

/// Pools each segment's per-language scores into detection trials:
/// one (score, is_target) pair per language per segment.
pub fn pool_detection_trials(trials: &TrialScores) -> Vec<(f64, bool)> {
    let mut pooled = Vec::with_capacity(trials.len() * trials.languages.len());
    for trial in &trials.trials {
        let truth = trials.truth_index(trial);
        for (i, &score) in trial.scores.scores().iter().enumerate() {
            pooled.push((score, i == truth));
        }
    }
    pooled
}

/// Miss/false-alarm counts swept over the candidate thresholds, in
/// descending threshold order (p_miss non-increasing, p_fa non-decreasing).
fn sweep_operating_points(pooled: &[(f64, bool)]) -> Result<Vec<(f64, f64)>> {
    let n_target = pooled.iter().filter(|(_, t)| *t).count();
    let n_nontarget = pooled.len() - n_target;
    if n_target == 0 || n_nontarget == 0 {
        return Err(Error::InsufficientData(
            "need at least one target and one non-target trial".to_string(),
        ));
    }

    let mut sorted: Vec<(f64, bool)> = pooled
        .iter()
        .copied()
        .filter(|(s, _)| s.is_finite())
        .collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // Above-max cut: everything finite decides "no".
    let mut points = Vec::with_capacity(sorted.len() + 1);
    let mut yes_targets = 0usize;
    let mut yes_nontargets = 0usize;
    points.push((1.0, 0.0));

    let mut idx = 0;
    while idx < sorted.len() {
        // Take the whole tie group at this threshold.
        let threshold = sorted[idx].0;
        while idx < sorted.len() && sorted[idx].0 == threshold {
            if sorted[idx].1 {
                yes_targets += 1;
            } else {
                yes_nontargets += 1;
            }
            idx += 1;
        }
        points.push((
            1.0 - yes_targets as f64 / n_target as f64,
            yes_nontargets as f64 / n_nontarget as f64,
        ));
    }
    Ok(points)
}

/// Equal error rate with linear interpolation between adjacent
/// operating points.
pub fn compute_eer(pooled: &[(f64, bool)]) -> Result<f64> {
    let points = sweep_operating_points(pooled)?;
    // p_miss - p_fa decreases from +1-ish to negative; find the sign change.
    for pair in points.windows(2) {
        let (m1, f1) = pair[0];
        let (m2, f2) = pair[1];
        let d1 = m1 - f1;
        let d2 = m2 - f2;
        if d1 == 0.0 {
            return Ok(m1);
        }
        if d1 > 0.0 && d2 <= 0.0 {
            if d2 == 0.0 {
                return Ok(m2);
            }
            let t = d1 / (d1 - d2);
            return Ok(m1 + t * (m2 - m1));
        }
    }
    // No crossing inside the sweep: clamp to the nearest end.
    let (m_last, f_last) = *points.last().unwrap();
    Ok(if m_last - f_last > 0.0 { m_last } else { points[0].0 })
}

/// Minimum over candidate thresholds of the prior-weighted detection
/// cost, plus the operating point where it is attained (ties keep the
/// lowest-p_fa point).
pub fn compute_min_dcf(pooled: &[(f64, bool)], cfg: &MetricConfig) -> Result<(f64, (f64, f64))> {
    cfg.validate()?;
    let points = sweep_operating_points(pooled)?;
    let mut best = f64::INFINITY;
    let mut best_point = (0.0, 0.0);
    for &(p_miss, p_fa) in &points {
        let dcf = cfg.p_target * p_miss + (1.0 - cfg.p_target) * p_fa;
        if dcf < best {
            best = dcf;
            best_point = (p_fa, p_miss);
        }
    }
    Ok((best, best_point))
}

/// DET curve data: one (p_fa, p_miss) point per candidate threshold,
/// p_fa ascending, plus the minDCF operating point.
#[derive(Clone, Debug)]
pub struct DetCurve {
    pub points: Vec<(f64, f64)>,
    pub min_dcf_point: (f64, f64),
}

pub fn det_points(pooled: &[(f64, bool)], cfg: &MetricConfig) -> Result<DetCurve> {
    let swept = sweep_operating_points(pooled)?;
    let (_, min_dcf_point) = compute_min_dcf(pooled, cfg)?;
    let points = swept.into_iter().map(|(p_miss, p_fa)| (p_fa, p_miss)).collect();
    Ok(DetCurve {
        points,
        min_dcf_point,
    })
}

/// Identification by argmax over each segment's score vector; ties break
/// to the lowest canonical index. Returns (idr, correct, incorrect).
pub fn compute_idr(trials: &TrialScores) -> Result<(f64, usize, usize)> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no trials".to_string()));
    }
    let mut correct = 0usize;
    for trial in &trials.trials {
        if trial.scores.argmax() == trials.truth_index(trial) {
            correct += 1;
        }
    }
    let incorrect = trials.len() - correct;
    Ok((correct as f64 / trials.len() as f64, correct, incorrect))
}

/// The full metric bundle for one scored system.
#[derive(Clone, Debug)]
pub struct MetricReport {
    pub languages: Vec<LanguageCode>,
    pub n_segments: usize,
    pub lost_trials: usize,
    pub cavg: f64,
    pub eer: f64,
    pub min_dcf: f64,
    pub idr: f64,
    pub t_correct: usize,
    pub t_incorrect: usize,
    pub p_miss: Vec<f64>,
    pub p_fa: Vec<Vec<f64>>,
    pub det: DetCurve,
}

/// Computes every metric over one trial table.
pub fn evaluate(trials: &TrialScores, cfg: &MetricConfig) -> Result<MetricReport> {
    let breakdown = compute_cavg(trials, cfg)?;
    let pooled = pool_detection_trials(trials);
    let eer = compute_eer(&pooled)?;
    let (min_dcf, _) = compute_min_dcf(&pooled, cfg)?;
    let det = det_points(&pooled, cfg)?;
    let (idr, t_correct, t_incorrect) = compute_idr(trials)?;
    let lost_trials = trials.trials.iter().filter(|t| t.scores.is_lost()).count();
    Ok(MetricReport {
        languages: trials.languages.clone(),
        n_segments: trials.len(),
        lost_trials,
        cavg: breakdown.cavg,
        eer,
        min_dcf,
        idr,
        t_correct,
        t_incorrect,
        p_miss: breakdown.p_miss,
        p_fa: breakdown.p_fa,
        det,
    })
}

impl MetricReport {
    /// One row in the conventional comparison layout:
    /// Cavg*100, EER%, minDCF, IDR%.
    pub fn table_row(&self, system: &str) -> String {
        format!(
            "{system:<24} {:>8.2} {:>7.2} {:>8.4} {:>7.2}",
            self.cavg * 100.0,
            self.eer * 100.0,
            self.min_dcf,
            self.idr * 100.0
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<24} {:>8} {:>7} {:>8} {:>7}",
            "System", "Cavg*100", "EER%", "minDCF", "IDR%"
        )
    }

    /// Machine-readable key-value rendering.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n_segments {}\n", self.n_segments));
        out.push_str(&format!("lost_trials {}\n", self.lost_trials));
        out.push_str(&format!("cavg {}\n", self.cavg));
        out.push_str(&format!("eer {}\n", self.eer));
        out.push_str(&format!("min_dcf {}\n", self.min_dcf));
        out.push_str(&format!("idr {}\n", self.idr));
        out.push_str(&format!("t_correct {}\n", self.t_correct));
        out.push_str(&format!("t_incorrect {}\n", self.t_incorrect));
        for (i, lang) in self.languages.iter().enumerate() {
            out.push_str(&format!("p_miss {lang} {}\n", self.p_miss[i]));
        }
        for (t, lang_t) in self.languages.iter().enumerate() {
            for (n, lang_n) in self.languages.iter().enumerate() {
                if t != n {
                    out.push_str(&format!("p_fa {lang_t} {lang_n} {}\n", self.p_fa[t][n]));
                }
            }
        }
        out
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9). The DET plotting scale.
pub fn normal_deviate(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Writes DET points: normal-deviate coordinates then raw probabilities,
/// one operating point per line. Probabilities are clamped away from 0/1
/// in the deviate columns so the file stays finite and plot-ready.
pub fn write_det_points(path: &Path, det: &DetCurve) -> Result<()> {
    const CLAMP: f64 = 1e-6;
    let mut out = Vec::new();
    writeln!(out, "# nd_p_fa nd_p_miss p_fa p_miss").unwrap();
    let (fa, miss) = det.min_dcf_point;
    writeln!(out, "# min_dcf_point {fa} {miss}").unwrap();
    for &(p_fa, p_miss) in &det.points {
        writeln!(
            out,
            "{} {} {p_fa} {p_miss}",
            normal_deviate(p_fa.clamp(CLAMP, 1.0 - CLAMP)),
            normal_deviate(p_miss.clamp(CLAMP, 1.0 - CLAMP)),
        )
        .unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
