//! Satisfied/violated decisions for the four metamorphic relations.
//!
//! MR1 asks for a strong negative rank correlation between occlusion level
//! and score. MR2 to MR4 ask that no follow-up group lose more than a small
//! fraction of the baseline score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricRecord, Task};
use crate::testgen::{MrId, TcId};

pub const DEFAULT_MIN_ABS_RHO: f64 = 0.8;
pub const DEFAULT_EPSILON: f64 = 0.05;

pub const METHOD_SPEARMAN: &str = "spearman_rank_correlation";
pub const METHOD_DEGRADATION: &str = "max_relative_degradation";

/// Ratio a verdict is computed on. F1 is the primary one; the other two are
/// reported as supplementary rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    F1,
    Precision,
    Recall,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::F1, ScoreKind::Precision, ScoreKind::Recall];

    pub fn of(self, r: &MetricRecord) -> f64 {
        match self {
            ScoreKind::F1 => r.f1,
            ScoreKind::Precision => r.precision,
            ScoreKind::Recall => r.recall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrVerdict {
    pub mr: MrId,
    pub model: String,
    pub task: Task,
    pub score: ScoreKind,
    pub verdict: Verdict,
    /// Satisfied only because nothing varied (MR1) or the baseline was zero
    /// (MR2 to MR4).
    pub vacuous: bool,
    pub method: String,
    /// Spearman rho for MR1, largest relative drop for MR2 to MR4.
    pub statistic: f64,
    /// MR1 requires `statistic <= -threshold`; the others `statistic <= threshold`.
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    /// Records the statistic was computed from, baseline first.
    pub records: Vec<MetricRecord>,
}

impl MrVerdict {
    pub fn is_primary(&self) -> bool {
        self.score == ScoreKind::F1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub min_abs_rho: f64,
    pub epsilon_mr2: f64,
    pub epsilon_mr3: f64,
    pub epsilon_mr4: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self::uniform(DEFAULT_MIN_ABS_RHO, DEFAULT_EPSILON)
    }
}

impl VerifyConfig {
    pub fn uniform(min_abs_rho: f64, epsilon: f64) -> Self {
        Self {
            min_abs_rho,
            epsilon_mr2: epsilon,
            epsilon_mr3: epsilon,
            epsilon_mr4: epsilon,
        }
    }

    pub fn epsilon(&self, mr: MrId) -> f64 {
        match mr {
            MrId::Mr1 => f64::NAN,
            MrId::Mr2 => self.epsilon_mr2,
            MrId::Mr3 => self.epsilon_mr3,
            MrId::Mr4 => self.epsilon_mr4,
        }
    }
}

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. A series with
/// every value tied has no association and yields 0.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Parameter(format!(
            "series lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rank correlation needs at least 3 points, got {}",
            xs.len()
        )));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_same_cell(records: &[&MetricRecord]) -> Result<()> {
    if let Some(first) = records.first() {
        if let Some(r) = records
            .iter()
            .find(|r| r.model != first.model || r.task != first.task)
        {
            return Err(Error::Parameter(format!(
                "records mix cells: {}/{} and {}/{}",
                first.model, first.task, r.model, r.task
            )));
        }
    }
    Ok(())
}

/// MR1 over the 21 occlusion levels. With a baseline supplied, a series
/// that never departs from the baseline score is satisfied vacuously.
pub fn verify_mr1(
    records: &[MetricRecord],
    baseline: Option<&MetricRecord>,
    min_abs_rho: f64,
    score: ScoreKind,
) -> Result<MrVerdict> {
    let mut by_level: BTreeMap<u8, &MetricRecord> = BTreeMap::new();
    for r in records {
        let level = r.tc_id.occlusion_level().ok_or_else(|| {
            Error::Parameter(format!("{} is not an occlusion level", r.tc_id))
        })?;
        if by_level.insert(level, r).is_some() {
            return Err(Error::Parameter(format!("duplicate record for {}", r.tc_id)));
        }
    }
    let missing: Vec<String> = (1..=21u8)
        .filter(|l| !by_level.contains_key(l))
        .map(|l| TcId::Occlusion(l).to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteSeries(format!(
            "MR1 needs all 21 levels; missing {}",
            missing.join(", ")
        )));
    }
    let series: Vec<&MetricRecord> = by_level.values().copied().collect();
    let mut all: Vec<&MetricRecord> = baseline.into_iter().collect();
    all.extend(&series);
    check_same_cell(&all)?;

    let levels: Vec<f64> = by_level.keys().map(|&l| l as f64).collect();
    let values: Vec<f64> = series.iter().map(|r| score.of(r)).collect();
    let rho = spearman(&levels, &values)?;

    let mut flags = Vec::new();
    let vacuous = baseline.is_some_and(|b| values.iter().all(|&v| v == score.of(b)));
    let verdict = if vacuous {
        flags.push("score never departs from baseline; correlation undefined".into());
        Verdict::Satisfied
    } else if rho <= -min_abs_rho {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    };
    Ok(MrVerdict {
        mr: MrId::Mr1,
        model: series[0].model.clone(),
        task: series[0].task,
        score,
        verdict,
        vacuous,
        method: METHOD_SPEARMAN.into(),
        statistic: rho,
        threshold: min_abs_rho,
        flags,
        records: all.into_iter().cloned().collect(),
    })
}

/// Bounded degradation: the largest relative drop from the baseline score
/// over the follow-ups must not exceed `epsilon`.
pub fn verify_non_degradation(
    mr: MrId,
    baseline: &MetricRecord,
    followups: &[MetricRecord],
    epsilon: f64,
    score: ScoreKind,
) -> Result<MrVerdict> {
    if followups.is_empty() {
        return Err(Error::InsufficientData(format!("{mr} has no follow-up records")));
    }
    let mut all = vec![baseline];
    all.extend(followups);
    check_same_cell(&all)?;

    let base = score.of(baseline);
    let mut flags = Vec::new();
    let statistic = if base == 0.0 {
        flags.push("baseline score is zero; degradation undefined".into());
        0.0
    } else {
        followups
            .iter()
            .map(|f| (base - score.of(f)) / base)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let verdict = if statistic <= epsilon {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    };
    let mut records: Vec<MetricRecord> = all.into_iter().cloned().collect();
    records[1..].sort_by_key(|r| r.tc_id);
    Ok(MrVerdict {
        mr,
        model: baseline.model.clone(),
        task: baseline.task,
        score,
        verdict,
        vacuous: base == 0.0,
        method: METHOD_DEGRADATION.into(),
        statistic,
        threshold: epsilon,
        flags,
        records,
    })
}

/// One verdict per (model, MR, task, score) present in `records`, in that
/// order. An MR is evaluated only if some of its follow-up records exist.
pub fn verify_all(records: &[MetricRecord], config: &VerifyConfig) -> Result<Vec<MrVerdict>> {
    let mut cells: BTreeMap<(&str, Task), Vec<&MetricRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.model.as_str(), r.task)).or_default().push(r);
    }
    let models: BTreeSet<&str> = cells.keys().map(|(m, _)| *m).collect();

    let mut out = Vec::new();
    for model in models {
        for mr in MrId::ALL {
            for task in Task::ALL {
                let Some(cell) = cells.get(&(model, task)) else {
                    continue;
                };
                let follow: Vec<MetricRecord> = cell
                    .iter()
                    .filter(|r| r.tc_id.mr() == Some(mr))
                    .map(|r| (*r).clone())
                    .collect();
                if follow.is_empty() {
                    continue;
                }
                let baseline = cell.iter().find(|r| r.tc_id == TcId::Baseline).copied();
                for score in ScoreKind::ALL {
                    let v = if mr == MrId::Mr1 {
                        verify_mr1(&follow, baseline, config.min_abs_rho, score)?
                    } else {
                        let baseline = baseline.ok_or_else(|| {
                            Error::InsufficientData(format!(
                                "no baseline record for {model}/{task}"
                            ))
                        })?;
                        verify_non_degradation(mr, baseline, &follow, config.epsilon(mr), score)?
                    };
                    out.push(v);
                }
            }
        }
    }
    Ok(out)
}

/// True when any primary (F1) verdict is violated.
pub fn any_violated(verdicts: &[MrVerdict]) -> bool {
    verdicts
        .iter()
        .any(|v| v.is_primary() && v.verdict == Verdict::Violated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{derive, ConfusionCounts};
    use proptest::prelude::*;

    fn rec(tc: TcId, f1: f64) -> MetricRecord {
        MetricRecord {
            model: "m".into(),
            tc_id: tc,
            task: Task::Segmentation,
            counts: ConfusionCounts::default(),
            precision: f1,
            recall: f1,
            f1,
        }
    }

    fn tc1_series(f: impl Fn(u8) -> f64) -> Vec<MetricRecord> {
        (1..=21).map(|l| rec(TcId::Occlusion(l), f(l))).collect()
    }

    /// Textbook formula 1 - 6 sum d^2 / (n (n^2 - 1)), valid without ties.
    fn rank_formula(xs: &[f64], ys: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|&a| 1.0 + v.iter().filter(|&&b| b < a).count() as f64)
                .collect()
        };
        let (rx, ry) = (rank(xs), rank(ys));
        let n = xs.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn spearman_basics() {
        let lv: Vec<f64> = (1..=21).map(f64::from).collect();
        let dec: Vec<f64> = lv.iter().map(|l| 100.0 - l * l).collect();
        assert_eq!(spearman(&lv, &dec).unwrap(), -1.0);
        assert_eq!(spearman(&lv, &[0.7; 21]).unwrap(), 0.0);
        assert!(matches!(spearman(&[1.0, 2.0], &[2.0, 1.0]), Err(Error::InsufficientData(_))));
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn tied_series_matches_scipy() {
        // scipy.stats.spearmanr reference values
        let lv: Vec<f64> = (1..=21).map(f64::from).collect();
        let stair: Vec<f64> = tc1_series(|l| match l {
            1..=4 => 1.0,
            5..=8 => 0.75,
            9..=12 => 0.5,
            13..=16 => 0.25,
            _ => 0.0,
        })
        .iter()
        .map(|r| r.f1)
        .collect();
        assert!((spearman(&lv, &stair).unwrap() - -0.9803259463254868).abs() < 1e-12);
        let cliff: Vec<f64> = lv.iter().map(|&l| if l >= 17.0 { 0.0 } else { 1.0 }).collect();
        assert!((spearman(&lv, &cliff).unwrap() - -0.7385489458759964).abs() < 1e-12);
    }

    #[test]
    fn mr1_verdicts() {
        let v = verify_mr1(&tc1_series(|l| 1.0 - l as f64 / 21.0), None, 0.8, ScoreKind::F1).unwrap();
        assert_eq!((v.statistic, v.verdict), (-1.0, Verdict::Satisfied));
        assert_eq!(v.method, METHOD_SPEARMAN);

        let flat = verify_mr1(&tc1_series(|_| 0.6), None, 0.8, ScoreKind::F1).unwrap();
        assert_eq!((flat.statistic, flat.verdict, flat.vacuous), (0.0, Verdict::Violated, false));

        // four evenly spaced cliffs still rank-correlate strongly
        let stair = tc1_series(|l| 1.0 - ((l - 1) / 4).min(4) as f64 * 0.25);
        let v = verify_mr1(&stair, None, 0.8, ScoreKind::F1).unwrap();
        assert!((v.statistic - -0.9803259463254868).abs() < 1e-12);
        assert_eq!(v.verdict, Verdict::Satisfied);

        // a single late cliff leaves long plateaus and fails the bound
        let late = tc1_series(|l| if l >= 17 { 0.2 } else { 0.9 });
        let v = verify_mr1(&late, None, 0.8, ScoreKind::F1).unwrap();
        assert!((v.statistic - -0.7385489458759964).abs() < 1e-12);
        assert_eq!(v.verdict, Verdict::Violated);
    }

    #[test]
    fn mr1_vacuous_for_unchanged_perfect_series() {
        let base = rec(TcId::Baseline, 1.0);
        let v = verify_mr1(&tc1_series(|_| 1.0), Some(&base), 0.8, ScoreKind::F1).unwrap();
        assert!(v.vacuous);
        assert_eq!(v.verdict, Verdict::Satisfied);
        assert_eq!(v.statistic, 0.0);
        assert_eq!(v.records.len(), 22);
        assert_eq!(v.records[0].tc_id, TcId::Baseline);
    }

    #[test]
    fn mr1_requires_all_levels() {
        let mut s = tc1_series(|l| l as f64);
        s.remove(6);
        let err = verify_mr1(&s, None, 0.8, ScoreKind::F1).unwrap_err();
        assert!(matches!(err, Error::IncompleteSeries(ref m) if m.contains("TC1_L7")));
    }

    #[test]
    fn degradation_examples() {
        let base = rec(TcId::Baseline, 0.9644);
        let same = verify_non_degradation(MrId::Mr2, &base, &[rec(TcId::Numbered(3), 0.9644)], 0.05, ScoreKind::F1).unwrap();
        assert_eq!((same.statistic, same.verdict), (0.0, Verdict::Satisfied));

        let drop = verify_non_degradation(MrId::Mr2, &base, &[rec(TcId::Numbered(3), 0.90)], 0.05, ScoreKind::F1).unwrap();
        assert!((drop.statistic - 0.0667772708419743).abs() < 1e-12);
        assert_eq!(drop.verdict, Verdict::Violated);

        let zero = verify_non_degradation(MrId::Mr3, &rec(TcId::Baseline, 0.0), &[rec(TcId::Numbered(7), 0.0)], 0.05, ScoreKind::F1).unwrap();
        assert_eq!((zero.statistic, zero.verdict, zero.vacuous), (0.0, Verdict::Satisfied, true));
        assert!(!zero.flags.is_empty());

        assert!(matches!(
            verify_non_degradation(MrId::Mr4, &base, &[], 0.05, ScoreKind::F1),
            Err(Error::InsufficientData(_))
        ));
    }

    fn cell(model: &str, task: Task, tc: TcId, counts: ConfusionCounts) -> MetricRecord {
        derive(model, tc, task, counts)
    }

    #[test]
    fn verify_all_is_presence_based() {
        let good = ConfusionCounts { tp: 10, fp: 0, fn_: 0 };
        let bad = ConfusionCounts { tp: 2, fp: 0, fn_: 8 };
        let mut records = Vec::new();
        for task in Task::ALL {
            records.push(cell("m", task, TcId::Baseline, good));
            for tc in MrId::Mr3.test_cases() {
                records.push(cell("m", task, tc, good));
            }
            for tc in MrId::Mr4.test_cases() {
                records.push(cell("m", task, tc, if tc == TcId::Numbered(13) { bad } else { good }));
            }
        }
        let vs = verify_all(&records, &VerifyConfig::default()).unwrap();
        assert_eq!(vs.len(), 2 * 2 * 3);
        assert!(vs.iter().all(|v| v.mr != MrId::Mr1 && v.mr != MrId::Mr2));
        let primary: Vec<_> = vs.iter().filter(|v| v.is_primary()).collect();
        assert!(primary.iter().filter(|v| v.mr == MrId::Mr3).all(|v| v.verdict == Verdict::Satisfied));
        assert!(primary.iter().filter(|v| v.mr == MrId::Mr4).all(|v| v.verdict == Verdict::Violated));
        assert!(any_violated(&vs));
    }

    #[test]
    fn verify_all_needs_baseline_for_bounded_relations() {
        let c = ConfusionCounts { tp: 1, fp: 0, fn_: 0 };
        let records = vec![cell("m", Task::Segmentation, TcId::Numbered(2), c)];
        assert!(matches!(
            verify_all(&records, &VerifyConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    proptest! {
        #[test]
        fn matches_rank_formula_on_permutations(perm in Just((1..=21).map(f64::from).collect::<Vec<_>>()).prop_shuffle()) {
            let lv: Vec<f64> = (1..=21).map(f64::from).collect();
            prop_assert!((spearman(&lv, &perm).unwrap() - rank_formula(&lv, &perm)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_maps(ys in prop::collection::vec(0.0..1.0f64, 21)) {
            let lv: Vec<f64> = (1..=21).map(f64::from).collect();
            let mapped: Vec<f64> = ys.iter().map(|y| (3.0 * y).exp() + 2.0).collect();
            let a = spearman(&lv, &ys).unwrap();
            prop_assert!((a - spearman(&lv, &mapped).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }

        #[test]
        fn degradation_is_scale_free(base in 0.05..1.0f64, fs in prop::collection::vec(0.0..1.0f64, 1..6), k in 0.1..1.0f64, rot in 0usize..6) {
            let follow: Vec<MetricRecord> = fs.iter().enumerate().map(|(i, &f)| rec(TcId::Numbered(2 + i as u8), f)).collect();
            let a = verify_non_degradation(MrId::Mr2, &rec(TcId::Baseline, base), &follow, 0.05, ScoreKind::F1).unwrap();
            let scaled: Vec<MetricRecord> = fs.iter().enumerate().map(|(i, &f)| rec(TcId::Numbered(2 + i as u8), f * k)).collect();
            let b = verify_non_degradation(MrId::Mr2, &rec(TcId::Baseline, base * k), &scaled, 0.05, ScoreKind::F1).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
            if (a.statistic - 0.05).abs() > 1e-9 {
                prop_assert_eq!(a.verdict, b.verdict);
            }
            let mut shuffled = follow.clone();
            let r = rot % shuffled.len();
            shuffled.rotate_left(r);
            let c = verify_non_degradation(MrId::Mr2, &rec(TcId::Baseline, base), &shuffled, 0.05, ScoreKind::F1).unwrap();
            prop_assert_eq!(c, a);
        }

        #[test]
        fn repeating_a_level_value_keeps_strong_series_strong(
            drops in prop::collection::vec(0.0..0.05f64, 20), repeat_at in 1usize..21,
        ) {
            // strictly decreasing series, then one level copies its predecessor
            let mut f = vec![1.0];
            for d in &drops {
                let last = *f.last().unwrap();
                f.push(last - d - 1e-3);
            }
            f[repeat_at] = f[repeat_at - 1];
            let recs = tc1_series(|l| f[l as usize - 1]);
            let v = verify_mr1(&recs, None, 0.8, ScoreKind::F1).unwrap();
            // one tie in an otherwise perfect order costs at most a sliver of rho
            prop_assert!(v.statistic <= -0.99);
            prop_assert_eq!(v.verdict, Verdict::Satisfied);
        }
    }
}
