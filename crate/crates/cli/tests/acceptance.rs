//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use channelcert::certify::{
    state_cert_2norm, unitary_test_uses, Decision, DistanceMode, Hypothesis, KnownState,
    DEFAULT_C_CAL,
};
use channelcert::channel::{
    average_fidelity, average_fidelity_mc, diamond_bounds, entanglement_fidelity,
    trace_distance_lb, ChoiOperator, LocalSearch,
};
use channelcert::linalg::{hermitian_eig, trace_norm, DensityMatrix, PureState};
use channelcert::random::{
    epsilon_far_unitary_channel, gaussian_perturbation, gaussian_perturbed_depolarizing, ginibre,
    in_good_event, monte_carlo, random_channel, GAUSSIAN_EPS_MAX,
};
use channelcert::weingarten::{
    expected_x, f_alpha, f_alpha_direct, first_moment_purity, haar_moment_report,
    lemma1_closed_form, sample_x, second_moment_purity, variance_ratio_exact,
    verify_f_alpha_bounds, weingarten_matrix, Permutation,
};
use channelcert::{KrausChannel, RngStream};
use channelcert_cli::experiment::{expected_uses, far_from_depolarizing, wilson_interval};
use channelcert_cli::{run, ExperimentConfig, GroundTruth, Mode, RunOptions, TrialRecord};
use sha2::{Digest, Sha256};

const SEED: u64 = 20_240_601;

// Tolerances and thresholds, fixed here.
const WG_ANCHOR_REL: f64 = 1e-12;
const WG_SUM_REL: f64 = 1e-10;
const MC_SIGMAS: f64 = 4.0;
const MOMENT_SAMPLES: usize = 100_000;
const FIDELITY_SAMPLES: usize = 20_000;
const LEMMA1_SAMPLES: usize = 20_000;
const VARIANCE_MAX: f64 = 105.0;
const F_SUM_REL: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-8;
const FID_DIAMOND_SLACK: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-12;
const ANTI_CONC_MIN: f64 = 1e-3;
const ANTI_CONC_SAMPLES: usize = 100_000;
const GOOD_EVENT_MIN: f64 = 0.5;

/// Monte Carlo seed for case `case` of criterion `criterion`; ranges of
/// different criteria never overlap.
fn mc_seed(criterion: u64, case: u64) -> u64 {
    SEED + (criterion << 32) + case
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rate(records: &[TrialRecord], gt: GroundTruth) -> (usize, usize) {
    let rows: Vec<_> = records.iter().filter(|r| r.ground_truth == gt).collect();
    (
        rows.iter()
            .filter(|r| r.verdict == Decision::Alternative)
            .count(),
        rows.len(),
    )
}

fn uses_match(records: &[TrialRecord], cfg: &ExperimentConfig, mode: Mode) -> bool {
    records.iter().all(|r| {
        r.uses_consumed > 0
            && expected_uses(cfg, mode, r.d_in, r.d_out, r.epsilon)
                .is_ok_and(|u| u == r.uses_consumed)
    })
}

fn weingarten_anchors() -> Outcome {
    let mut worst_anchor = 0.0_f64;
    for d in 3..=8usize {
        let df = d as f64;
        let w1 = weingarten_matrix(1, d).unwrap();
        let w2 = weingarten_matrix(2, d).unwrap();
        let w3 = weingarten_matrix(3, d).unwrap();
        let q3 = df * (df * df - 1.0) * (df * df - 4.0);
        let cases = [
            (w1.by_cycle_type(&[1]), 1.0 / df),
            (w2.by_cycle_type(&[1, 1]), 1.0 / (df * df - 1.0)),
            (w2.by_cycle_type(&[2]), -1.0 / (df * (df * df - 1.0))),
            (w3.by_cycle_type(&[1, 1, 1]), (df * df - 2.0) / q3),
            (
                w3.by_cycle_type(&[2, 1]),
                -1.0 / ((df * df - 1.0) * (df * df - 4.0)),
            ),
            (w3.by_cycle_type(&[3]), 2.0 / q3),
        ];
        for (got, want) in cases {
            worst_anchor = worst_anchor.max((got.unwrap() - want).abs() / want.abs());
        }
    }
    let mut worst_sum = 0.0_f64;
    for n in 1..=4usize {
        for d in n..=8usize {
            let want = 1.0 / (0..n).map(|k| (d + k) as f64).product::<f64>();
            let got = weingarten_matrix(n, d).unwrap().sum();
            worst_sum = worst_sum.max((got - want).abs() / want);
        }
    }
    outcome(
        worst_anchor <= WG_ANCHOR_REL && worst_sum <= WG_SUM_REL,
        format!("max rel err anchors {worst_anchor:.2e}, sums {worst_sum:.2e}"),
    )
}

fn haar_moments() -> Outcome {
    let mut rng = RngStream::new(SEED, 2);
    let mut ok = 0;
    let mut worst_z = 0.0_f64;
    for case in 0..20u64 {
        let n = 1 + (rng.uniform() * 4.0) as usize;
        let d = n.max(2) + (rng.uniform() * (6 - n.max(2)) as f64) as usize;
        let scale = 1.0 / (d as f64).sqrt();
        let a: Vec<_> = (0..n)
            .map(|_| ginibre(d, d, &mut rng).scale_real(scale))
            .collect();
        let b: Vec<_> = (0..n)
            .map(|_| ginibre(d, d, &mut rng).scale_real(scale))
            .collect();
        let r = haar_moment_report(&a, &b, MOMENT_SAMPLES, mc_seed(2, case)).unwrap();
        worst_z = worst_z.max(r.z_score());
        ok += usize::from(r.within(MC_SIGMAS));
    }
    outcome(
        ok >= 19,
        format!("{ok}/20 within {MC_SIGMAS} stderr, max |z| {worst_z:.2}"),
    )
}

fn average_fidelity_law() -> Outcome {
    let mut rng = RngStream::new(SEED, 3);
    let mut law_ok = 0;
    for t in 0..50u64 {
        let d = 2 + (t % 3) as usize;
        let ch = random_channel(d, d, 1 + (t % 4) as usize, &mut rng).unwrap();
        let exact = average_fidelity(&ch).unwrap();
        let fe = entanglement_fidelity(&ch).unwrap();
        let law = (1.0 + d as f64 * fe) / (1.0 + d as f64);
        let mc = average_fidelity_mc(&ch, FIDELITY_SAMPLES, mc_seed(3, t)).unwrap();
        let agree = (exact - law).abs() < 1e-12 && (mc.mean - law).abs() <= MC_SIGMAS * mc.stderr;
        law_ok += usize::from(agree);
    }
    let mut ineq_ok = 0;
    for t in 0..100u64 {
        let d = 2 + (t % 3) as usize;
        let ch = random_channel(d, d, 1 + (t % 3) as usize, &mut rng).unwrap();
        let id = KrausChannel::identity(d);
        let lb = trace_distance_lb(&ch, &id, &LocalSearch::default(), &[], &mut rng)
            .unwrap()
            .value;
        let fe = entanglement_fidelity(&ch).unwrap();
        ineq_ok += usize::from(fe <= 1.0 - lb * lb / (4.0 * d as f64) + FID_DIAMOND_SLACK);
    }
    outcome(
        law_ok == 50 && ineq_ok == 100,
        format!("law {law_ok}/50, fidelity-distance inequality {ineq_ok}/100"),
    )
}

fn moment_identity() -> Outcome {
    let mut rng = RngStream::new(SEED, 4);
    let mut ok = 0;
    let mut worst_z = 0.0_f64;
    for t in 0..50u64 {
        let d_in = 1 + (rng.uniform() * 4.0) as usize;
        let d_out = 1 + (rng.uniform() * 4.0) as usize;
        let rank = d_in.div_ceil(d_out) + (rng.uniform() * 3.0) as usize;
        let ch = random_channel(d_in, d_out, rank, &mut rng).unwrap();
        let closed = lemma1_closed_form(&ch);
        let est = monte_carlo(LEMMA1_SAMPLES, mc_seed(4, t), |r| sample_x(&ch, r));
        let diff = (est.mean - closed).abs();
        if est.stderr > 1e-12 {
            worst_z = worst_z.max(diff / est.stderr);
        }
        ok += usize::from(diff <= MC_SIGMAS * est.stderr + 1e-12);
    }
    outcome(
        ok == 50,
        format!("{ok}/50 within {MC_SIGMAS} stderr, max |z| {worst_z:.2}"),
    )
}

fn variance_theorem() -> Outcome {
    let mut rng = RngStream::new(SEED, 5);
    let mut channels = Vec::new();
    for _ in 0..100 {
        let d_in = 2 + (rng.uniform() * 3.0) as usize;
        let d_out = 2 + (rng.uniform() * 3.0) as usize;
        let rank = d_in.div_ceil(d_out) + (rng.uniform() * 3.0) as usize;
        channels.push((
            "random",
            random_channel(d_in, d_out, rank, &mut rng).unwrap(),
        ));
    }
    for (d, eps) in [(2, 0.3), (4, 0.5), (8, 0.2)] {
        channels.push((
            "unitary_mixture",
            epsilon_far_unitary_channel(d, eps, &mut rng)
                .unwrap()
                .channel,
        ));
    }
    for (d_in, d_out) in [(1, 8), (2, 4), (2, 8)] {
        let adv =
            gaussian_perturbed_depolarizing(d_in, d_out, GAUSSIAN_EPS_MAX, &mut rng, 1000).unwrap();
        channels.push(("gaussian_depolarizing", adv.channel));
    }
    let mut worst_ratio = 0.0_f64;
    let mut worst_family = "";
    let mut violations = 0;
    let mut sum_mismatch = 0;
    let mut direct_checked = 0;
    for (family, ch) in &channels {
        let r = variance_ratio_exact(ch).unwrap();
        if r > worst_ratio {
            worst_ratio = r;
            worst_family = family;
        }
        violations += verify_f_alpha_bounds(ch)
            .unwrap()
            .iter()
            .filter(|b| b.value > b.bound + BOUND_SLACK)
            .count();
        // sum over S_4 by the fast contraction against the direct evaluation
        let k = ch.num_kraus();
        if k.pow(4) * ch.d_out().pow(2) <= channelcert::weingarten::F_ALPHA_GUARD {
            direct_checked += 1;
            let (mut fast, mut direct) = (0.0, 0.0);
            for a in Permutation::all(4) {
                fast += f_alpha(ch, &a).unwrap().re;
                direct += f_alpha_direct(ch, &a).unwrap().re;
            }
            if (fast - direct).abs() > F_SUM_REL * direct.abs() {
                sum_mismatch += 1;
            }
        }
        // E[Y]^2 <= E[Y^2] <= 1 for the output purity Y
        let (p1, p2) = (first_moment_purity(ch), second_moment_purity(ch).unwrap());
        if p2 < p1 * p1 - 1e-12 || p2 > 1.0 + 1e-12 {
            sum_mismatch += 1;
        }
    }
    outcome(
        worst_ratio <= VARIANCE_MAX && violations == 0 && sum_mismatch == 0,
        format!(
            "{} channels, max Var/E^2 {worst_ratio:.4} ({worst_family}), bound violations {violations}, \
             F-sum mismatches {sum_mismatch} ({direct_checked} checked directly)",
            channels.len()
        ),
    )
}

fn unitary_tester_end_to_end() -> Outcome {
    let uses = unitary_test_uses(8, 0.3, DistanceMode::Trace).unwrap();
    let cfg = ExperimentConfig {
        seed: Some(SEED),
        dims: vec![(8, 8)],
        epsilons: vec![0.3],
        trials: 200,
        ..ExperimentConfig::default()
    };
    let recs = run(&cfg, Mode::Unitary, RunOptions::default()).unwrap();
    let (fa, n0) = rate(&recs, GroundTruth::Null);
    let (det, n1) = rate(&recs, GroundTruth::Far);
    let (lo, hi) = wilson_interval(det, n1);
    let uses_ok =
        uses_match(&recs, &cfg, Mode::Unitary) && recs.iter().all(|r| r.uses_consumed == 440);
    outcome(
        uses == 440 && uses_ok && fa == 0 && n0 == 200 && n1 == 200 && det as f64 / n1 as f64 >= 2.0 / 3.0,
        format!(
            "N = {uses}, false alarms {fa}/{n0}, detection {det}/{n1} = {:.3} (95% CI [{lo:.3}, {hi:.3}])",
            det as f64 / n1 as f64
        ),
    )
}

fn state_certifier() -> Outcome {
    let (d, eta, delta) = (16, 0.2, 0.1);
    let (mut h0, mut h1) = (0, 0);
    for t in 0..200u64 {
        let mut alg = RngStream::with_lane(SEED, t, 2);
        let mut mixed = KnownState::new(
            DensityMatrix::maximally_mixed(d),
            RngStream::with_lane(SEED, t, 0),
        );
        h0 += usize::from(
            state_cert_2norm(&mut mixed, eta, delta, DEFAULT_C_CAL, &mut alg)
                .unwrap()
                .hypothesis
                == Hypothesis::H0,
        );
        let pure = PureState::basis(d, 0).unwrap().projector();
        let mut far = KnownState::new(pure, RngStream::with_lane(SEED, t, 1));
        h1 += usize::from(
            state_cert_2norm(&mut far, eta, delta, DEFAULT_C_CAL, &mut alg)
                .unwrap()
                .hypothesis
                == Hypothesis::H1,
        );
    }
    outcome(
        h0 >= 180 && h1 >= 180,
        format!("maximally mixed -> H0 {h0}/200, pure -> H1 {h1}/200"),
    )
}

fn depolarizing_components() -> Outcome {
    let mut rng = RngStream::new(SEED, 8);
    // certified far instances: diamond lower bound >= eps
    let mut instances = Vec::new();
    for (d_in, d_out, eps) in [(2, 2, 1.0), (2, 3, 0.8), (3, 2, 0.5), (2, 4, 1.0)] {
        let ch = far_from_depolarizing(d_in, d_out, eps, &mut rng).unwrap();
        let dep = KrausChannel::depolarizing(d_in, d_out);
        let lower = diamond_bounds(&ch, &dep, &LocalSearch::default(), &[], &mut rng)
            .unwrap()
            .lower;
        instances.push((ch, eps, lower));
    }
    for (d_in, d_out) in [(2, 8), (1, 16)] {
        let adv =
            gaussian_perturbed_depolarizing(d_in, d_out, GAUSSIAN_EPS_MAX, &mut rng, 1000).unwrap();
        let w = adv.witness.value;
        instances.push((adv.channel, GAUSSIAN_EPS_MAX, w));
    }
    let mut min_anti = f64::INFINITY;
    let mut expect_ok = true;
    let mut certified = true;
    for (i, (ch, eps, lower)) in instances.iter().enumerate() {
        certified &= *lower >= eps - 1e-9;
        let ex = expected_x(ch).unwrap();
        let (di, dout) = (ch.d_in() as f64, ch.d_out() as f64);
        expect_ok &= ex >= eps * eps / (2.0 * di * di * dout);
        let est = monte_carlo(ANTI_CONC_SAMPLES, mc_seed(8, i as u64), |r| {
            f64::from(u8::from(sample_x(ch, r) >= 0.5 * ex))
        });
        min_anti = min_anti.min(est.mean);
    }
    let a = min_anti >= ANTI_CONC_MIN;

    let cfg = ExperimentConfig {
        seed: Some(SEED),
        dims: vec![(2, 2)],
        epsilons: vec![1.0],
        trials: 50,
        rounds: Some(50),
        ..ExperimentConfig::default()
    };
    let recs = run(&cfg, Mode::Depolarizing, RunOptions::default()).unwrap();
    let (fa, n0) = rate(&recs, GroundTruth::Null);
    let (det, n1) = rate(&recs, GroundTruth::Far);
    let c = uses_match(&recs, &cfg, Mode::Depolarizing)
        && fa as f64 / n0 as f64 <= 1.0 / 3.0
        && det as f64 / n1 as f64 >= 2.0 / 3.0;
    outcome(
        certified && a && expect_ok && c,
        format!(
            "(a) min P(X >= E[X]/2) = {min_anti:.4}; (b) E[X] bound {}; (c) 50 rounds: false alarms {fa}/{n0}, \
             detection {det}/{n1}",
            if expect_ok && certified { "holds" } else { "fails" }
        ),
    )
}

fn adversarial_constructions() -> Outcome {
    let mut rng = RngStream::new(SEED, 9);
    let mut worst_witness = 0.0_f64;
    for t in 0..100 {
        let d = 2 + t % 7;
        let eps = 0.05 + 0.95 * rng.uniform();
        let adv = epsilon_far_unitary_channel(d, eps, &mut rng).unwrap();
        worst_witness = worst_witness.max((adv.witness.value - eps).abs());
    }
    let (mut psd_ok, mut wit_ok) = (0, 0);
    for _ in 0..100 {
        let adv = gaussian_perturbed_depolarizing(2, 8, GAUSSIAN_EPS_MAX, &mut rng, 1000).unwrap();
        let choi = adv.channel.choi();
        let min_eig = *hermitian_eig(choi.matrix()).unwrap().values.last().unwrap();
        let valid = ChoiOperator::new(choi.matrix().clone(), 2, 8).is_ok();
        psd_ok += usize::from(valid && min_eig >= -PSD_TOL);
        let direct = {
            let dep = KrausChannel::depolarizing(2, 8);
            let a = adv.channel.apply_pure(&adv.witness.input).unwrap();
            let b = dep.apply_pure(&adv.witness.input).unwrap();
            trace_norm(&(a.matrix() - b.matrix()))
        };
        wit_ok += usize::from(direct >= GAUSSIAN_EPS_MAX - WITNESS_TOL);
    }
    let accepted = (0..1000)
        .filter(|_| in_good_event(&gaussian_perturbation(16, &mut rng)))
        .count();
    let acc = accepted as f64 / 1000.0;
    outcome(
        worst_witness <= WITNESS_TOL && psd_ok == 100 && wit_ok == 100 && acc >= GOOD_EVENT_MIN,
        format!(
            "unitary witness max err {worst_witness:.1e}; gaussian PSD {psd_ok}/100, witness {wit_ok}/100; \
             acceptance at d_out=16 {acc:.3}"
        ),
    )
}

fn csv_hash(args: &[&str], threads: usize) -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("out.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_channelcert"))
        .args(args)
        .args([
            "--threads",
            &threads.to_string(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["certify-unitary", "--seed", "7", "--trials", "40"],
        &[
            "certify-depolarizing",
            "--seed",
            "7",
            "--trials",
            "6",
            "--rounds",
            "10",
        ],
        &[
            "complexity-curve",
            "--mode",
            "unitary",
            "--seed",
            "7",
            "--trials",
            "10",
        ],
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for args in runs {
        match [1, 4, 1]
            .into_iter()
            .map(|t| csv_hash(args, t))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(h) => {
                let same = h.windows(2).all(|w| w[0] == w[1]);
                pass &= same;
                detail.push(format!(
                    "{} {}",
                    args[0],
                    if same { &h[0][..12] } else { "differs" }
                ));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{} failed: {}", args[0], e.trim()));
            }
        }
    }
    outcome(pass, detail.join("; "))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "1 weingarten anchors",
            Duration::from_secs(1),
            weingarten_anchors,
        ),
        (
            "2 haar moments vs sampling",
            Duration::from_secs(120),
            haar_moments,
        ),
        (
            "3 average fidelity law",
            Duration::from_secs(120),
            average_fidelity_law,
        ),
        (
            "4 moment identity",
            Duration::from_secs(120),
            moment_identity,
        ),
        (
            "5 variance bound and F table",
            Duration::from_secs(600),
            variance_theorem,
        ),
        (
            "6 unitary tester",
            Duration::from_secs(60),
            unitary_tester_end_to_end,
        ),
        (
            "7 state certifier",
            Duration::from_secs(300),
            state_certifier,
        ),
        (
            "8 depolarizing tester parts",
            Duration::from_secs(900),
            depolarizing_components,
        ),
        (
            "9 adversarial constructions",
            Duration::from_secs(120),
            adversarial_constructions,
        ),
        ("10 determinism", Duration::from_secs(60), determinism),
    ];
    let mut failures = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        failures += usize::from(!pass);
        println!(
            "criterion {name}: {} [{:.2}s / {}s] {}{}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail,
            if in_time { "" } else { " (over time budget)" }
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
