//! Quantum-equilibrium sampling and Monte Carlo statistics.
//!
//! The incident packet has constant amplitude over `|z| ≤ w/2`, so |Ψ|² is
//! exactly uniform there and sampling needs no rejection step.
//!
//! Draws are counter-addressed: sample `i` of stream `s` is the ChaCha8
//! output at word position `2i` of stream `s`, seeded from the master seed.
//! Stage `j` of a chain uses stream `j`, so the value a particle sees at a
//! stage does not depend on evaluation order or on how many stages exist.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::apparatus::{
    self, ApparatusError, ChainOutcome, ExperimentChain, Selection, Sign, TransverseMode,
};
use crate::spinor::{self, Spinor};

/// |z| above this fails a Born comparison.
pub const FAIL_Z: f64 = 4.0;

fn uniform_at(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng.random::<f64>()
}

/// Transverse start position for draw `index` of `stream`, uniform on
/// `[-w/2, w/2)`.
pub fn transverse_position(seed: u64, stream: u64, index: u64, w: f64) -> f64 {
    (uniform_at(seed, stream, index) - 0.5) * w
}

/// `n` positions distributed as |Ψ|² over the incident packet.
pub fn sample_initial(n: usize, w: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random::<f64>() - 0.5) * w).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunStats {
    /// Counts per surviving outcome sequence (one sign per stage).
    pub counts: BTreeMap<Vec<Sign>, u64>,
    pub n_total: u64,
    pub n_discarded: u64,
    pub seed: u64,
}

impl RunStats {
    pub fn survivors(&self) -> u64 {
        self.n_total - self.n_discarded
    }
}

/// Start positions used for particle `index` at every stage.
pub fn particle_positions(chain: &ExperimentChain, seed: u64, index: u64) -> Vec<f64> {
    chain
        .stages()
        .iter()
        .enumerate()
        .map(|(j, st)| transverse_position(seed, j as u64, index, st.device.w()))
        .collect()
}

/// Runs particle `index` of the ensemble.
pub fn simulate_particle(
    chain: &ExperimentChain,
    seed: u64,
    index: u64,
    mode: TransverseMode,
) -> Result<(Vec<f64>, ChainOutcome), ApparatusError> {
    let z0s = particle_positions(chain, seed, index);
    let out = apparatus::run_chain_with_mode(chain, &z0s, mode)?;
    Ok((z0s, out))
}

pub fn run_ensemble(
    chain: &ExperimentChain,
    n: u64,
    seed: u64,
) -> Result<RunStats, ApparatusError> {
    run_ensemble_with_mode(chain, n, seed, TransverseMode::Fresh)
}

pub fn run_ensemble_with_mode(
    chain: &ExperimentChain,
    n: u64,
    seed: u64,
    mode: TransverseMode,
) -> Result<RunStats, ApparatusError> {
    let mut counts = BTreeMap::new();
    let mut n_discarded = 0;
    for i in 0..n {
        let (_, out) = simulate_particle(chain, seed, i, mode)?;
        match out {
            ChainOutcome::Completed(_) => *counts.entry(out.signs()).or_insert(0) += 1,
            ChainOutcome::Discarded { .. } => n_discarded += 1,
        }
    }
    Ok(RunStats {
        counts,
        n_total: n,
        n_discarded,
        seed,
    })
}

/// Quantum prediction for a chain: probability of each surviving sign
/// sequence, from Born factors alone (no trajectories involved).
pub fn predict_chain(chain: &ExperimentChain) -> BTreeMap<Vec<Sign>, f64> {
    fn walk(
        chain: &ExperimentChain,
        stage: usize,
        spin: Spinor,
        prob: f64,
        prefix: &mut Vec<Sign>,
        out: &mut BTreeMap<Vec<Sign>, f64>,
    ) {
        let Some(st) = chain.stages().get(stage) else {
            out.insert(prefix.clone(), prob);
            return;
        };
        let (plus, minus) = spinor::eigenspinors(st.device.axis());
        let (p_plus, p_minus) = spinor::born_probabilities(&spin, st.device.axis());
        for (sign, p, next) in [(Sign::Plus, p_plus, plus), (Sign::Minus, p_minus, minus)] {
            let allowed = match st.selection {
                Selection::MeasureBoth => true,
                Selection::KeepUpperPort => {
                    apparatus::port_for(sign, &st.device) == crate::trajectory::Branch::Upper
                }
                Selection::KeepLowerPort => {
                    apparatus::port_for(sign, &st.device) == crate::trajectory::Branch::Lower
                }
            };
            if !allowed || p == 0.0 {
                continue;
            }
            prefix.push(sign);
            walk(chain, stage + 1, next, prob * p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = BTreeMap::new();
    walk(chain, 0, *chain.input(), 1.0, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornRow {
    /// Outcome labels such as `+z`, or `survived` for the survival row.
    pub labels: Vec<String>,
    pub count: u64,
    pub freq: f64,
    pub predicted: f64,
    pub stderr: f64,
    /// Non-finite when the prediction is certain and the data disagree.
    pub z: f64,
    pub pass: bool,
}

impl BornRow {
    pub fn new(labels: Vec<String>, count: u64, n: u64, predicted: f64) -> Self {
        let freq = count as f64 / n as f64;
        let stderr = (predicted * (1.0 - predicted) / n as f64).max(0.0).sqrt();
        let diff = freq - predicted;
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self {
            labels,
            count,
            freq,
            predicted,
            stderr,
            z,
            pass: z.abs() <= FAIL_Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornReport {
    pub n_total: u64,
    pub n_survivors: u64,
    /// Survival through the post-selection stages; absent for chains with
    /// no post-selection or an empty run.
    pub survival: Option<BornRow>,
    /// Outcome frequencies among survivors against conditional predictions.
    pub outcomes: Vec<BornRow>,
    pub pass: bool,
}

pub fn sequence_labels(chain: &ExperimentChain, signs: &[Sign]) -> Vec<String> {
    chain
        .stages()
        .iter()
        .zip(signs)
        .map(|(st, s)| format!("{}{}", s.symbol(), st.device.axis().label()))
        .collect()
}

pub fn compare_to_born(stats: &RunStats, chain: &ExperimentChain) -> BornReport {
    compare_with_predictions(stats, chain, &predict_chain(chain))
}

/// Compares `stats` against an explicit prediction (joint probabilities of
/// surviving sequences; their sum is the survival probability).
pub fn compare_with_predictions(
    stats: &RunStats,
    chain: &ExperimentChain,
    predicted: &BTreeMap<Vec<Sign>, f64>,
) -> BornReport {
    let survivors = stats.survivors();
    let p_survive: f64 = predicted.values().sum();
    let post_selected = chain
        .stages()
        .iter()
        .any(|s| s.selection != Selection::MeasureBoth);

    let survival = (post_selected && stats.n_total > 0)
        .then(|| BornRow::new(vec!["survived".into()], survivors, stats.n_total, p_survive));

    let mut outcomes = Vec::new();
    if survivors > 0 {
        let mut keys: Vec<&Vec<Sign>> = predicted.keys().collect();
        for k in stats.counts.keys() {
            if !predicted.contains_key(k) {
                keys.push(k);
            }
        }
        keys.sort();
        for key in keys {
            let count = stats.counts.get(key).copied().unwrap_or(0);
            let p = predicted.get(key).copied().unwrap_or(0.0);
            let conditional = if p_survive > 0.0 { p / p_survive } else { 0.0 };
            outcomes.push(BornRow::new(
                sequence_labels(chain, key),
                count,
                survivors,
                conditional,
            ));
        }
    }
    let pass = survival.as_ref().is_none_or(|r| r.pass) && outcomes.iter().all(|r| r.pass);
    BornReport {
        n_total: stats.n_total,
        n_survivors: survivors,
        survival,
        outcomes,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus::Stage;
    use crate::spinor::MeasurementAxis;
    use crate::wavefield::{DeviceConfig, Polarity};

    fn sg_z() -> DeviceConfig {
        DeviceConfig::new(MeasurementAxis::z(), Polarity::Standard, 1.0, 100.0, 5.0).unwrap()
    }

    fn two_thirds() -> Spinor {
        Spinor::real((2.0f64 / 3.0).sqrt(), (1.0f64 / 3.0).sqrt()).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let a = sample_initial(4, 1.0, 7);
        assert_eq!(a, sample_initial(4, 1.0, 7));
        assert_ne!(a, sample_initial(4, 1.0, 8));
        assert!(sample_initial(1000, 2.0, 1)
            .iter()
            .all(|z| (-1.0..1.0).contains(z)));
    }

    #[test]
    fn uniform_moments() {
        let n = 1_000_000;
        let w = 1.0;
        let zs = sample_initial(n, w, 42);
        let mean = zs.iter().sum::<f64>() / n as f64;
        assert!(
            mean.abs() <= 4.0 * w / (12.0 * n as f64).sqrt(),
            "mean {mean}"
        );
        let upper = zs.iter().filter(|z| **z > 0.0).count() as f64 / n as f64;
        assert!(
            (upper - 0.5).abs() <= 4.0 * 0.5 / (n as f64).sqrt(),
            "upper {upper}"
        );
    }

    #[test]
    fn counter_addressed_draws_are_order_free() {
        let forward: Vec<f64> = (0..50).map(|i| transverse_position(9, 2, i, 1.0)).collect();
        let backward: Vec<f64> = (0..50)
            .rev()
            .map(|i| transverse_position(9, 2, i, 1.0))
            .collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(
            transverse_position(9, 0, 3, 1.0),
            transverse_position(9, 1, 3, 1.0)
        );
    }

    #[test]
    fn eigenstate_is_always_plus() {
        let chain = ExperimentChain::single(sg_z(), Spinor::up_z()).unwrap();
        let stats = run_ensemble(&chain, 2000, 3).unwrap();
        assert_eq!(stats.counts.get(&vec![Sign::Plus]), Some(&2000));
        let report = compare_to_born(&stats, &chain);
        assert!(report.pass);
        assert_eq!(report.outcomes.len(), 1);
        assert_eq!(report.outcomes[0].z, 0.0);
    }

    #[test]
    fn wrong_prediction_fails() {
        let chain = ExperimentChain::single(sg_z(), two_thirds()).unwrap();
        let stats = run_ensemble(&chain, 100_000, 42).unwrap();
        let good = compare_to_born(&stats, &chain);
        assert!(good.pass, "{good:?}");
        let mut wrong = BTreeMap::new();
        wrong.insert(vec![Sign::Plus], 0.5);
        wrong.insert(vec![Sign::Minus], 0.5);
        let bad = compare_with_predictions(&stats, &chain, &wrong);
        assert!(!bad.pass);
        assert!(bad.outcomes[0].z.abs() > 100.0, "{}", bad.outcomes[0].z);
    }

    #[test]
    fn empty_run_has_no_rows() {
        let chain = ExperimentChain::single(sg_z(), two_thirds()).unwrap();
        let stats = run_ensemble(&chain, 0, 1).unwrap();
        let report = compare_to_born(&stats, &chain);
        assert!(report.outcomes.is_empty());
        assert!(report.survival.is_none());
        assert!(report.pass);
    }

    #[test]
    fn prediction_for_post_selected_chain() {
        let x = sg_z().with_axis(MeasurementAxis::x());
        let chain = ExperimentChain::new(
            vec![
                Stage {
                    device: sg_z(),
                    selection: Selection::KeepUpperPort,
                },
                Stage {
                    device: x,
                    selection: Selection::KeepUpperPort,
                },
                Stage {
                    device: sg_z(),
                    selection: Selection::MeasureBoth,
                },
            ],
            Spinor::up_z(),
        )
        .unwrap();
        let p = predict_chain(&chain);
        assert_eq!(p.len(), 2);
        for v in p.values() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_keep_upper_keeps_minus() {
        let rev = sg_z().with_polarity(Polarity::Reversed);
        let chain = ExperimentChain::new(
            vec![
                Stage {
                    device: rev,
                    selection: Selection::KeepUpperPort,
                },
                Stage {
                    device: sg_z(),
                    selection: Selection::MeasureBoth,
                },
            ],
            two_thirds(),
        )
        .unwrap();
        let p = predict_chain(&chain);
        assert_eq!(
            p.keys().cloned().collect::<Vec<_>>(),
            vec![vec![Sign::Minus, Sign::Minus]]
        );
        assert!((p[&vec![Sign::Minus, Sign::Minus]] - 1.0 / 3.0).abs() < 1e-12);
    }
}
