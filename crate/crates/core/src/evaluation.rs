//! Precision/recall/F1, precision-recall curves and experiment sweeps.

use std::collections::HashSet;
use std::path::Path;

use crate::dataset::{self, NoisyTestSet};
use crate::error::{Error, Result};
use crate::extraction::{rank_order, ScoredPair, Scorer};
use crate::fsio;
use crate::model::{ModelParams, Side};
use crate::rng;
use crate::text::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision is 0 when nothing is extracted.
pub fn precision_recall_f1<'a>(
    extracted: impl IntoIterator<Item = &'a (usize, usize)>,
    gold: &HashSet<(usize, usize)>,
) -> Result<Prf> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let extracted: HashSet<(usize, usize)> = extracted.into_iter().copied().collect();
    let hits = extracted.iter().filter(|x| gold.contains(x)).count() as f64;
    let precision = if extracted.is_empty() {
        0.0
    } else {
        hits / extracted.len() as f64
    };
    let recall = hits / gold.len() as f64;
    Ok(Prf {
        precision,
        recall,
        f1: f1(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub rho: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub extracted: usize,
}

/// One point per distinct score, thresholds descending. At threshold `ρ` the
/// extracted set is every pair with `p >= ρ`.
pub fn pr_curve(scored: &[ScoredPair], gold: &HashSet<(usize, usize)>) -> Result<Vec<PrPoint>> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(rank_order);
    let g = gold.len() as f64;
    let mut curve = Vec::new();
    let mut hits = 0usize;
    let mut k = 0;
    while k < sorted.len() {
        let p = sorted[k].p;
        while k < sorted.len() && sorted[k].p == p {
            hits += gold.contains(&(sorted[k].i, sorted[k].j)) as usize;
            k += 1;
        }
        let precision = hits as f64 / k as f64;
        let recall = hits as f64 / g;
        curve.push(PrPoint {
            rho: p as f64,
            precision,
            recall,
            f1: f1(precision, recall),
            extracted: k,
        });
    }
    Ok(curve)
}

/// Step-wise area: `Σ (R_k − R_{k−1}) · P_k` along increasing recall.
pub fn auc_pr(curve: &[PrPoint]) -> f64 {
    let mut area = 0.0;
    let mut prev_r = 0.0;
    for pt in curve {
        area += (pt.recall - prev_r).max(0.0) * pt.precision;
        prev_r = prev_r.max(pt.recall);
    }
    area.clamp(0.0, 1.0)
}

/// Point with maximal F1; ties go to the higher threshold.
pub fn best_operating_point(curve: &[PrPoint]) -> Result<PrPoint> {
    curve
        .iter()
        .copied()
        .reduce(|best, pt| {
            if pt.f1 > best.f1 || (pt.f1 == best.f1 && pt.rho > best.rho) {
                pt
            } else {
                best
            }
        })
        .ok_or(Error::EmptyCurve)
}

pub fn curve_csv(curve: &[PrPoint]) -> String {
    let mut s = String::from("rho,precision,recall,f1,extracted\n");
    for p in curve {
        s.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{}\n",
            p.rho, p.precision, p.recall, p.f1, p.extracted
        ));
    }
    s
}

pub fn write_curve(path: &Path, curve: &[PrPoint]) -> Result<()> {
    fsio::write_atomic(path, curve_csv(curve).as_bytes())
}

/// Something that can score the candidate pairs of a test set. Pairs a system
/// refuses to consider are simply absent from the result.
pub trait PairScorer {
    fn score_testset(&self, set: &NoisyTestSet) -> Result<Vec<ScoredPair>>;
}

/// The siamese classifier plus the vocabularies it was trained with.
pub struct NeuralSystem {
    pub params: ModelParams<f32>,
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
}

impl PairScorer for NeuralSystem {
    fn score_testset(&self, set: &NoisyTestSet) -> Result<Vec<ScoredPair>> {
        let scorer = Scorer::new(&self.params);
        let src = scorer.encode_collection(&set.source, Side::Source, &self.source_vocab)?;
        let tgt = scorer.encode_collection(&set.target, Side::Target, &self.target_vocab)?;
        let mut out = Vec::with_capacity(src.len() * tgt.len());
        scorer.score_cartesian(&src, &tgt, |s| out.push(s));
        Ok(out)
    }
}

/// Headline numbers of one system on one test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Report {
    pub best: PrPoint,
    pub auc: f64,
    pub gold: usize,
    pub candidates: usize,
}

pub fn evaluate_scored(scored: &[ScoredPair], set: &NoisyTestSet) -> Result<(Report, Vec<PrPoint>)> {
    let gold = set.gold_set();
    let curve = pr_curve(scored, &gold)?;
    let best = best_operating_point(&curve).unwrap_or(PrPoint {
        rho: 1.0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        extracted: 0,
    });
    Ok((
        Report {
            best,
            auc: auc_pr(&curve),
            gold: gold.len(),
            candidates: set.candidate_count(),
        },
        curve,
    ))
}

pub fn evaluate(system: &dyn PairScorer, set: &NoisyTestSet) -> Result<(Report, Vec<PrPoint>)> {
    evaluate_scored(&system.score_testset(set)?, set)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Negatives per positive (m-sweep) or 0 for noise sweeps.
    pub m: usize,
    pub seed: u64,
    pub noise_ratio: f64,
    pub report: Report,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("m,seed,r,precision,recall,f1,rho,auc\n");
    for r in rows {
        let b = &r.report.best;
        s.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.m, r.seed, r.noise_ratio, b.precision, b.recall, b.f1, b.rho, r.report.auc
        ));
    }
    s
}

/// Draws the `p` parallel pairs for seed `seed` from the pool.
pub fn sample_parallel(pool: &[(String, String)], p: usize, seed: u64) -> Result<Vec<(String, String)>> {
    if pool.len() < p {
        return Err(Error::InvalidArgument(format!(
            "parallel pool has {} pairs, {p} requested",
            pool.len()
        )));
    }
    let mut r = rng::derived(seed, &[rng::stream::NOISE, 0]);
    let picks = rand::seq::index::sample(&mut r, pool.len(), p).into_vec();
    Ok(picks.into_iter().map(|k| pool[k].clone()).collect())
}

/// For each seed, samples `p` parallel pairs, then for each ratio builds a
/// noisy test set from them and evaluates `system` on it.
pub fn noise_sweep(
    system: &dyn PairScorer,
    parallel_pool: &[(String, String)],
    heldout_pool: &[String],
    p: usize,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let sample = sample_parallel(parallel_pool, p, seed)?;
        for &r in ratios {
            let set = dataset::synthesize_noisy_testset(&sample, heldout_pool, r, seed)?;
            let (report, _) = evaluate(system, &set)?;
            rows.push(SweepRow {
                m: 0,
                seed,
                noise_ratio: r,
                report,
            });
        }
    }
    Ok(rows)
}

/// Mean best-point metrics per noise ratio, ratios in first-seen order.
pub fn average_by_ratio(rows: &[SweepRow]) -> Vec<(f64, Prf)> {
    let mut ratios: Vec<f64> = Vec::new();
    for r in rows {
        if !ratios.contains(&r.noise_ratio) {
            ratios.push(r.noise_ratio);
        }
    }
    ratios
        .into_iter()
        .map(|ratio| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.noise_ratio == ratio).collect();
            let n = sel.len() as f64;
            let mean = |f: fn(&PrPoint) -> f64| sel.iter().map(|r| f(&r.report.best)).sum::<f64>() / n;
            (
                ratio,
                Prf {
                    precision: mean(|b| b.precision),
                    recall: mean(|b| b.recall),
                    f1: mean(|b| b.f1),
                },
            )
        })
        .collect()
}

/// Trains one system per `(seed, m)` through `train` and evaluates it on every
/// test set. Rows come out seed-major, then by `m`, then by test set.
pub fn m_sweep<F>(ms: &[usize], seeds: &[u64], testsets: &[NoisyTestSet], mut train: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(usize, u64) -> Result<Box<dyn PairScorer>>,
{
    let mut rows = Vec::new();
    for &seed in seeds {
        for &m in ms {
            let system = train(m, seed)?;
            for set in testsets {
                let (report, _) = evaluate(system.as_ref(), set)?;
                rows.push(SweepRow {
                    m,
                    seed,
                    noise_ratio: set.noise_ratio,
                    report,
                });
            }
        }
    }
    Ok(rows)
}
