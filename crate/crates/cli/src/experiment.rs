use std::io::Write;
use std::time::Instant;

use channelcert::certify::{
    depolarizing_test_uses, test_identity_depolarizing, test_identity_unitary, unitary_test_uses,
    ChannelOracle, Decision,
};
use channelcert::channel::{diamond_bounds, LocalSearch};
use channelcert::random::{epsilon_far_unitary_channel, haar_unitary, random_channel};
use channelcert::{ComplexMatrix, Error, KrausChannel, RngStream};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GroundTruth, Mode};
use crate::CliError;

/// Random-stream lanes of one trial.
const LANE_INSTANCE: u64 = 0;
const LANE_ORACLE: u64 = 1;
const LANE_TESTER: u64 = 2;

/// Redraws allowed when building a channel far from depolarizing.
const FAR_RETRIES: usize = 16;

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment_id: String,
    pub trial: u64,
    pub d_in: usize,
    pub d_out: usize,
    pub epsilon: f64,
    pub ground_truth: GroundTruth,
    pub verdict: Decision,
    pub uses_consumed: u64,
    pub wall_time_ms: u64,
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock time per trial. Off by default since it breaks
    /// byte-identical reruns.
    pub timing: bool,
}

#[derive(Debug, Clone)]
struct Job {
    experiment_id: String,
    trial: u64,
    d_in: usize,
    d_out: usize,
    epsilon: f64,
    ground_truth: GroundTruth,
}

/// Stable identifier for one (shape, epsilon, ground truth) cell.
pub fn experiment_id(
    mode: Mode,
    d_in: usize,
    d_out: usize,
    eps_index: usize,
    gt: GroundTruth,
) -> String {
    format!(
        "{}-{d_in}x{d_out}-e{eps_index}-{}",
        mode.as_str(),
        gt.as_str()
    )
}

fn jobs(config: &ExperimentConfig, mode: Mode) -> Vec<Job> {
    let mut out = Vec::new();
    for &(d_in, d_out) in &config.dims {
        for (ei, &epsilon) in config.epsilons.iter().enumerate() {
            for &ground_truth in &config.ground_truths {
                let experiment_id = experiment_id(mode, d_in, d_out, ei, ground_truth);
                for _ in 0..config.trials {
                    let trial = out.len() as u64;
                    out.push(Job {
                        experiment_id: experiment_id.clone(),
                        trial,
                        d_in,
                        d_out,
                        epsilon,
                        ground_truth,
                    });
                }
            }
        }
    }
    out
}

/// `(1 - t) D + t R` with `t = eps / L`, where `L` is a certified lower
/// bound on the diamond distance of a random channel `R` from `D`. The
/// result is at diamond distance at least `eps` from `D`.
pub fn far_from_depolarizing(
    d_in: usize,
    d_out: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<KrausChannel, Error> {
    let dep = KrausChannel::depolarizing(d_in, d_out);
    let rank = d_in.div_ceil(d_out);
    let mut best = 0.0_f64;
    for _ in 0..FAR_RETRIES {
        let r = random_channel(d_in, d_out, rank, rng)?;
        let lower = diamond_bounds(&r, &dep, &LocalSearch::default(), &[], rng)?.lower;
        best = best.max(lower);
        if lower >= eps {
            let t = eps / lower;
            let kraus = dep
                .kraus()
                .iter()
                .map(|a| a.scale_real((1.0 - t).sqrt()))
                .chain(r.kraus().iter().map(|a| a.scale_real(t.sqrt())))
                .collect();
            return KrausChannel::new(d_in, d_out, kraus);
        }
    }
    Err(Error::SamplingExhausted {
        attempts: FAR_RETRIES,
        detail: format!(
            "best certified diamond distance from depolarizing was {best:.4}, need {eps}"
        ),
    })
}

fn unitary_instance(
    d: usize,
    eps: f64,
    gt: GroundTruth,
    u: &ComplexMatrix,
    rng: &mut RngStream,
) -> Result<KrausChannel, Error> {
    match gt {
        GroundTruth::Null => KrausChannel::unitary(u),
        GroundTruth::Far => epsilon_far_unitary_channel(d, eps, rng)?
            .channel
            .followed_by_unitary(u),
        GroundTruth::Gap => epsilon_far_unitary_channel(d, eps / 2.0, rng)?
            .channel
            .followed_by_unitary(u),
    }
}

fn depolarizing_instance(
    d_in: usize,
    d_out: usize,
    eps: f64,
    gt: GroundTruth,
    rng: &mut RngStream,
) -> Result<KrausChannel, Error> {
    match gt {
        GroundTruth::Null => Ok(KrausChannel::depolarizing(d_in, d_out)),
        GroundTruth::Far => far_from_depolarizing(d_in, d_out, eps, rng),
        GroundTruth::Gap => far_from_depolarizing(d_in, d_out, eps / 2.0, rng),
    }
}

fn run_job(
    config: &ExperimentConfig,
    mode: Mode,
    seed: u64,
    job: &Job,
    opts: RunOptions,
) -> Result<TrialRecord, Error> {
    let start = Instant::now();
    let mut inst = RngStream::with_lane(seed, job.trial, LANE_INSTANCE);
    let mut alg = RngStream::with_lane(seed, job.trial, LANE_TESTER);
    let oracle_rng = RngStream::with_lane(seed, job.trial, LANE_ORACLE);
    let verdict = match mode {
        Mode::Unitary => {
            let u = haar_unitary(job.d_in, &mut inst);
            let ch = unitary_instance(job.d_in, job.epsilon, job.ground_truth, &u, &mut inst)?;
            let mut oracle = ChannelOracle::new(ch, oracle_rng);
            test_identity_unitary(&mut oracle, &u, job.epsilon, config.distance, &mut alg)?
        }
        Mode::Depolarizing => {
            let ch = depolarizing_instance(
                job.d_in,
                job.d_out,
                job.epsilon,
                job.ground_truth,
                &mut inst,
            )?;
            let mut oracle = ChannelOracle::new(ch, oracle_rng);
            test_identity_depolarizing(
                &mut oracle,
                job.epsilon,
                config.rounds_or_default(),
                config.c_cal,
                &mut alg,
            )?
        }
    };
    Ok(TrialRecord {
        experiment_id: job.experiment_id.clone(),
        trial: job.trial,
        d_in: job.d_in,
        d_out: job.d_out,
        epsilon: job.epsilon,
        ground_truth: job.ground_truth,
        verdict: verdict.decision,
        uses_consumed: verdict.uses,
        wall_time_ms: if opts.timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
        seed,
        stream_id: job.trial,
    })
}

/// Runs every trial of `config` on the current rayon pool. Trial `k` draws
/// all randomness from `RngStream::with_lane(seed, k, lane)`, so the result
/// does not depend on the number of threads.
pub fn run(
    config: &ExperimentConfig,
    mode: Mode,
    opts: RunOptions,
) -> Result<Vec<TrialRecord>, CliError> {
    config.validate(mode)?;
    let seed = config.resolved_seed()?;
    let mut records = jobs(config, mode)
        .par_iter()
        .map(|job| run_job(config, mode, seed, job, opts))
        .collect::<Result<Vec<_>, Error>>()?;
    records.sort_by_key(|r| r.trial);
    Ok(records)
}

/// Closed-form channel-use count of one trial of `mode`.
pub fn expected_uses(
    config: &ExperimentConfig,
    mode: Mode,
    d_in: usize,
    d_out: usize,
    eps: f64,
) -> Result<u64, Error> {
    match mode {
        Mode::Unitary => unitary_test_uses(d_in, eps, config.distance),
        Mode::Depolarizing => {
            depolarizing_test_uses(d_in, d_out, eps, config.rounds_or_default(), config.c_cal)
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "experiment_id",
    "trial",
    "d_in",
    "d_out",
    "epsilon",
    "ground_truth",
    "verdict",
    "uses_consumed",
    "wall_time_ms",
    "seed",
    "stream_id",
];

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn verdict_str(d: Decision) -> &'static str {
    match d {
        Decision::NullHypothesis => "null_hypothesis",
        Decision::Alternative => "alternative",
    }
}

pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> Result<(), CliError> {
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    csv.write_record(CSV_HEADER)?;
    for r in records {
        csv.write_record([
            r.experiment_id.clone(),
            r.trial.to_string(),
            r.d_in.to_string(),
            r.d_out.to_string(),
            fmt_float(r.epsilon),
            r.ground_truth.as_str().to_string(),
            verdict_str(r.verdict).to_string(),
            r.uses_consumed.to_string(),
            r.wall_time_ms.to_string(),
            r.seed.to_string(),
            r.stream_id.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Wilson score interval at 95% for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Aggregate of one experiment cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentSummary {
    pub experiment_id: String,
    pub ground_truth: GroundTruth,
    pub trials: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub ci95: (f64, f64),
    /// Required rejection rate bound, if the ground truth carries one.
    pub requirement: Option<String>,
    pub holds: bool,
}

/// Per-experiment rejection rates, checked against the testers' guarantees:
/// at most 1/3 false alarms on `null` and at least 2/3 detections on `far`.
pub fn summarize(records: &[TrialRecord]) -> Vec<ExperimentSummary> {
    let mut ids: Vec<&str> = records.iter().map(|r| r.experiment_id.as_str()).collect();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let rows: Vec<&TrialRecord> =
                records.iter().filter(|r| r.experiment_id == id).collect();
            let gt = rows[0].ground_truth;
            let n = rows.len();
            let k = rows
                .iter()
                .filter(|r| r.verdict == Decision::Alternative)
                .count();
            let rate = k as f64 / n as f64;
            let (requirement, holds) = match gt {
                GroundTruth::Null => (Some("rate <= 1/3".to_string()), rate <= 1.0 / 3.0),
                GroundTruth::Far => (Some("rate >= 2/3".to_string()), rate >= 2.0 / 3.0),
                GroundTruth::Gap => (None, true),
            };
            ExperimentSummary {
                experiment_id: id.to_string(),
                ground_truth: gt,
                trials: n,
                rejections: k,
                rejection_rate: rate,
                ci95: wilson_interval(k, n),
                requirement,
                holds,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(0.3), "2.9999999999999999e-1");
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn wilson_brackets_the_rate() {
        let (lo, hi) = wilson_interval(150, 200);
        assert!(lo < 0.75 && 0.75 < hi);
        assert!(wilson_interval(0, 200).0 < 1e-12);
        assert!(wilson_interval(200, 200).1 > 0.999_999);
    }

    #[test]
    fn far_depolarizing_instance_is_certified() {
        let mut rng = RngStream::new(3, 0);
        let ch = far_from_depolarizing(2, 2, 1.0, &mut rng).unwrap();
        let dep = KrausChannel::depolarizing(2, 2);
        let b = diamond_bounds(&ch, &dep, &LocalSearch::default(), &[], &mut rng).unwrap();
        assert!(b.lower >= 1.0 - 1e-6 && b.lower <= b.upper + 1e-9, "{b:?}");
    }

    #[test]
    fn trial_indices_are_global() {
        let mut c = ExperimentConfig::unitary_default();
        c.trials = 3;
        let js = jobs(&c, Mode::Unitary);
        assert_eq!(js.len(), 6);
        assert!(js.iter().enumerate().all(|(i, j)| j.trial == i as u64));
        assert_eq!(js[3].experiment_id, "unitary-8x8-e0-far");
    }
}
