//! Metered channel access and the identity testers.
//!
//! The unitary tester measures each output against the projector onto the
//! ideal output. The depolarizing tester reduces to certifying that
//! `N(phi phi^*)` is maximally mixed in 2-norm, which in turn reduces to a
//! collision-based uniformity test on the outcomes of a Haar-random POVM.

use serde::{Deserialize, Serialize};

use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, PureState};
use crate::povm::{
    conjugated, haar_columns_povm, outcome_distribution, two_outcome_projector, CategoricalSampler,
    Povm,
};
use crate::random::{haar_state, RngStream};

/// Calibrated constant of the collision tester's sample budget
/// `C_cal sqrt(n) ln(1/delta) / gamma^2`.
pub const DEFAULT_C_CAL: f64 = 6.0;

/// Default number of rounds of the depolarizing tester.
pub const DEFAULT_DEPOLARIZING_ROUNDS: usize = 2200;

/// Oracle access to a hidden channel: submit a pure input and a POVM, get
/// one outcome back. Every outcome costs one channel use.
pub struct ChannelOracle {
    channel: KrausChannel,
    rng: RngStream,
    uses: u64,
}

impl ChannelOracle {
    pub fn new(channel: KrausChannel, rng: RngStream) -> Self {
        Self {
            channel,
            rng,
            uses: 0,
        }
    }

    pub fn d_in(&self) -> usize {
        self.channel.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.channel.d_out()
    }

    pub fn uses(&self) -> u64 {
        self.uses
    }

    fn check_povm(&self, povm: &Povm, d: usize) -> Result<()> {
        if povm.dim() != d {
            return Err(Error::Shape(format!(
                "POVM acts on {}, channel output is {d}",
                povm.dim()
            )));
        }
        Ok(())
    }

    /// One use: measure `N(|input><input|)` with `povm`.
    pub fn query(&mut self, input: &PureState, povm: &Povm) -> Result<usize> {
        self.check_povm(povm, self.d_out())?;
        let dist = outcome_distribution(povm, &self.channel.apply_pure(input)?)?;
        let x = CategoricalSampler::new(&dist)?.sample(&mut self.rng);
        self.uses += 1;
        Ok(x)
    }

    /// `n` uses with the same input and POVM, returned as outcome counts.
    pub fn query_counts(&mut self, input: &PureState, povm: &Povm, n: u64) -> Result<Vec<u64>> {
        self.check_povm(povm, self.d_out())?;
        let dist = outcome_distribution(povm, &self.channel.apply_pure(input)?)?;
        let counts = CategoricalSampler::new(&dist)?.counts(n, &mut self.rng);
        self.uses += n;
        Ok(counts)
    }

    /// One use with a `d_anc`-dimensional ancilla passed through untouched.
    pub fn query_with_ancilla(
        &mut self,
        input: &PureState,
        d_anc: usize,
        povm: &Povm,
    ) -> Result<usize> {
        self.check_povm(povm, d_anc * self.d_out())?;
        let dist = outcome_distribution(povm, &self.channel.apply_with_ancilla(input, d_anc)?)?;
        let x = CategoricalSampler::new(&dist)?.sample(&mut self.rng);
        self.uses += 1;
        Ok(x)
    }
}

/// Source of independent copies of a fixed state, measured in bulk.
pub trait StateCopies {
    fn dim(&self) -> usize;

    /// Outcome counts from measuring `n` fresh copies with `povm`.
    fn measure_counts(&mut self, povm: &Povm, n: u64) -> Result<Vec<u64>>;
}

/// Copies of an explicitly known state.
pub struct KnownState {
    rho: DensityMatrix,
    rng: RngStream,
    consumed: u64,
}

impl KnownState {
    pub fn new(rho: DensityMatrix, rng: RngStream) -> Self {
        Self {
            rho,
            rng,
            consumed: 0,
        }
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }
}

impl StateCopies for KnownState {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn measure_counts(&mut self, povm: &Povm, n: u64) -> Result<Vec<u64>> {
        let dist = outcome_distribution(povm, &self.rho)?;
        self.consumed += n;
        Ok(CategoricalSampler::new(&dist)?.counts(n, &mut self.rng))
    }
}

/// Copies of `N(|input><input|)`, each one a channel use.
pub struct ChannelOutputCopies<'a> {
    pub oracle: &'a mut ChannelOracle,
    pub input: PureState,
}

impl StateCopies for ChannelOutputCopies<'_> {
    fn dim(&self) -> usize {
        self.oracle.d_out()
    }

    fn measure_counts(&mut self, povm: &Povm, n: u64) -> Result<Vec<u64>> {
        self.oracle.query_counts(&self.input, povm, n)
    }
}

/// Parameters of the collision tester.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityPlan {
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
    pub batches: usize,
    pub batch_size: u64,
    /// `(1 + gamma^2 / 2) / n`.
    pub threshold: f64,
}

impl UniformityPlan {
    /// `ceil(log2(1/delta))` batches rounded up to an odd count, each of
    /// `ceil(C_cal sqrt(n) ln(1/delta) / (gamma^2 batches))` samples.
    ///
    /// # Errors
    /// [`Error::Domain`] unless `n >= 1`, `0 < gamma <= 1`, `0 < delta < 1`, `c_cal > 0`.
    pub fn new(n: usize, gamma: f64, delta: f64, c_cal: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("alphabet size must be positive".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(c_cal > 0.0 && c_cal.is_finite()) {
            return Err(Error::Domain(format!(
                "C_cal must be positive, got {c_cal}"
            )));
        }
        let mut batches = ((1.0 / delta).log2().ceil() as usize).max(1);
        if batches % 2 == 0 {
            batches += 1;
        }
        let m = c_cal * (n as f64).sqrt() * (1.0 / delta).ln() / (gamma * gamma);
        let batch_size = ((m / batches as f64).ceil() as u64).max(2);
        Ok(Self {
            n,
            gamma,
            delta,
            batches,
            batch_size,
            threshold: (1.0 + gamma * gamma / 2.0) / n as f64,
        })
    }

    pub fn required_samples(&self) -> u64 {
        if self.n == 1 {
            return 0;
        }
        self.batches as u64 * self.batch_size
    }
}

/// Result of the collision tester.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformityOutcome {
    pub uniform: bool,
    pub plan: UniformityPlan,
    /// Per-batch collision rate `#{i < j : x_i = x_j} / C(s, 2)`.
    pub statistics: Vec<f64>,
}

fn collision_rate(counts: &[u64], s: u64) -> f64 {
    let pairs: f64 = counts
        .iter()
        .map(|&c| (c as f64) * (c as f64 - 1.0) / 2.0)
        .sum();
    pairs / ((s as f64) * (s as f64 - 1.0) / 2.0)
}

fn decide(plan: UniformityPlan, statistics: Vec<f64>) -> UniformityOutcome {
    let far = statistics.iter().filter(|&&c| c > plan.threshold).count();
    UniformityOutcome {
        uniform: 2 * far < plan.batches,
        plan,
        statistics,
    }
}

/// Distinguishes the uniform distribution on `n` symbols from any
/// distribution at total variation distance at least `gamma`, with error
/// probability at most `delta` on either side.
///
/// # Errors
/// [`Error::InsufficientSamples`] if fewer than the planned number of
/// samples is supplied; [`Error::InvalidInput`] for symbols `>= n`.
pub fn uniformity_test(
    samples: &[usize],
    n: usize,
    gamma: f64,
    delta: f64,
    c_cal: f64,
) -> Result<UniformityOutcome> {
    let plan = UniformityPlan::new(n, gamma, delta, c_cal)?;
    if n == 1 {
        return Ok(UniformityOutcome {
            uniform: true,
            plan,
            statistics: Vec::new(),
        });
    }
    let need = plan.required_samples() as usize;
    if samples.len() < need {
        return Err(Error::InsufficientSamples {
            required: need,
            provided: samples.len(),
        });
    }
    if let Some(&bad) = samples.iter().find(|&&x| x >= n) {
        return Err(Error::InvalidInput(format!(
            "symbol {bad} outside alphabet of size {n}"
        )));
    }
    let s = plan.batch_size as usize;
    let statistics = samples[..need]
        .chunks(s)
        .map(|batch| {
            let mut counts = vec![0u64; n];
            batch.iter().for_each(|&x| counts[x] += 1);
            collision_rate(&counts, plan.batch_size)
        })
        .collect();
    Ok(decide(plan, statistics))
}

/// [`uniformity_test`] over per-batch outcome histograms returned by `draw_batch(batch_size)`.
pub fn uniformity_test_from_counts(
    plan: UniformityPlan,
    mut draw_batch: impl FnMut(u64) -> Result<Vec<u64>>,
) -> Result<UniformityOutcome> {
    if plan.n == 1 {
        return Ok(UniformityOutcome {
            uniform: true,
            plan,
            statistics: Vec::new(),
        });
    }
    let mut statistics = Vec::with_capacity(plan.batches);
    for _ in 0..plan.batches {
        let counts = draw_batch(plan.batch_size)?;
        if counts.len() != plan.n || counts.iter().sum::<u64>() != plan.batch_size {
            return Err(Error::InvalidInput(
                "batch histogram does not match the plan".into(),
            ));
        }
        statistics.push(collision_rate(&counts, plan.batch_size));
    }
    Ok(decide(plan, statistics))
}

/// Hypothesis returned by the state certifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    /// The state is maximally mixed.
    H0,
    /// The state is at least `eta` away from maximally mixed in 2-norm.
    H1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateCertOutcome {
    pub hypothesis: Hypothesis,
    pub copies: u64,
    /// Number of Haar bases in the measurement.
    pub l: usize,
    pub uniformity: UniformityOutcome,
}

/// `max(1, ceil(ln(2/delta) / 4))`.
pub fn num_bases(delta: f64) -> usize {
    ((2.0 / delta).ln() / 4.0).ceil().max(1.0) as usize
}

/// Collision-test plan used by [`state_cert_2norm`].
pub fn state_cert_plan(d: usize, eta: f64, delta: f64, c_cal: f64) -> Result<UniformityPlan> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "state certification needs d >= 2, got {d}"
        )));
    }
    let max_eta = ((d as f64 - 1.0) / d as f64).sqrt();
    if !(eta > 0.0 && eta <= max_eta + 1e-15) {
        return Err(Error::Domain(format!(
            "eta must lie in (0, {max_eta:.6}], got {eta}"
        )));
    }
    UniformityPlan::new(num_bases(delta) * d, eta / 20.0, delta, c_cal)
}

/// Tests `rho = I/d` against `||rho - I/d||_2 >= eta`, measuring copies with
/// the columns of `l` fresh Haar unitaries and running the collision tester
/// at `gamma = eta / 20`.
pub fn state_cert_2norm(
    copies: &mut dyn StateCopies,
    eta: f64,
    delta: f64,
    c_cal: f64,
    rng: &mut RngStream,
) -> Result<StateCertOutcome> {
    let d = copies.dim();
    let plan = state_cert_plan(d, eta, delta, c_cal)?;
    let l = num_bases(delta);
    let povm = haar_columns_povm(d, l, rng)?;
    let uniformity = uniformity_test_from_counts(plan, |s| copies.measure_counts(&povm, s))?;
    let hypothesis = if uniformity.uniform {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    };
    Ok(StateCertOutcome {
        hypothesis,
        copies: plan.required_samples(),
        l,
        uniformity,
    })
}

/// Distance in which the unitary tester's `epsilon` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Trace,
    Diamond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    NullHypothesis,
    Alternative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundStat {
    pub round: usize,
    pub uses: u64,
    /// Measurement outcome (unitary tester) or 0/1 for H0/H1 (depolarizing tester).
    pub outcome: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub uses: u64,
    pub rounds: Vec<RoundStat>,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 2], got {eps}"
        )));
    }
    Ok(())
}

/// `ceil(4 ln3 (d+1) / eps^2)` (trace) or `ceil(16 ln3 (d+1) / eps^4)` (diamond).
pub fn unitary_test_uses(d: usize, eps: f64, mode: DistanceMode) -> Result<u64> {
    check_epsilon(eps)?;
    let base = 3f64.ln() * (d as f64 + 1.0);
    let n = match mode {
        DistanceMode::Trace => 4.0 * base / (eps * eps),
        DistanceMode::Diamond => 16.0 * base / eps.powi(4),
    };
    Ok(n.ceil() as u64)
}

/// Tests `N = U . U^dag` against `N` being `eps`-far from it. Each round
/// sends a fresh Haar state `phi` and measures `{U phi phi^* U^dag, I - ...}`;
/// any complement outcome rejects.
pub fn test_identity_unitary(
    oracle: &mut ChannelOracle,
    u: &ComplexMatrix,
    eps: f64,
    mode: DistanceMode,
    rng: &mut RngStream,
) -> Result<TestVerdict> {
    let d = oracle.d_in();
    if oracle.d_out() != d || u.rows() != d || u.cols() != d {
        return Err(Error::Shape(format!(
            "target unitary is {}x{}, channel maps {} -> {}",
            u.rows(),
            u.cols(),
            d,
            oracle.d_out()
        )));
    }
    let n = unitary_test_uses(d, eps, mode)?;
    let start = oracle.uses();
    let mut rounds = Vec::with_capacity(n as usize);
    let mut reject = false;
    for k in 0..n as usize {
        let phi = haar_state(d, rng);
        let povm = conjugated(&two_outcome_projector(&phi), u)?;
        let x = oracle.query(&phi, &povm)?;
        reject |= x == 1;
        rounds.push(RoundStat {
            round: k,
            uses: 1,
            outcome: x,
        });
    }
    let decision = if reject {
        Decision::Alternative
    } else {
        Decision::NullHypothesis
    };
    Ok(TestVerdict {
        decision,
        uses: oracle.uses() - start,
        rounds,
    })
}

/// Per-round 2-norm threshold `eps / (2 sqrt(d_out) d_in)`.
pub fn depolarizing_eta(d_in: usize, d_out: usize, eps: f64) -> f64 {
    eps / (2.0 * (d_out as f64).sqrt() * d_in as f64)
}

/// Exact number of channel uses of [`test_identity_depolarizing`].
pub fn depolarizing_test_uses(
    d_in: usize,
    d_out: usize,
    eps: f64,
    rounds: usize,
    c_cal: f64,
) -> Result<u64> {
    check_epsilon(eps)?;
    let plan = state_cert_plan(
        d_out,
        depolarizing_eta(d_in, d_out, eps),
        1.0 / (3.0 * rounds as f64),
        c_cal,
    )?;
    Ok(rounds as u64 * plan.required_samples())
}

/// Tests `N = D` (completely depolarizing) against `N` being `eps`-far in
/// diamond distance. Each of `rounds` rounds certifies `N(phi phi^*)` for a
/// fresh Haar `phi` at `eta = eps / (2 sqrt(d_out) d_in)` and
/// `delta = 1/(3 rounds)`; any `H1` rejects.
pub fn test_identity_depolarizing(
    oracle: &mut ChannelOracle,
    eps: f64,
    rounds: usize,
    c_cal: f64,
    rng: &mut RngStream,
) -> Result<TestVerdict> {
    check_epsilon(eps)?;
    if rounds == 0 {
        return Err(Error::Domain("at least one round is required".into()));
    }
    let (d_in, d_out) = (oracle.d_in(), oracle.d_out());
    let eta = depolarizing_eta(d_in, d_out, eps);
    let delta = 1.0 / (3.0 * rounds as f64);
    let start = oracle.uses();
    let mut stats = Vec::with_capacity(rounds);
    let mut reject = false;
    for k in 0..rounds {
        let phi = haar_state(d_in, rng);
        let before = oracle.uses();
        let mut copies = ChannelOutputCopies {
            oracle: &mut *oracle,
            input: phi,
        };
        let out = state_cert_2norm(&mut copies, eta, delta, c_cal, rng)?;
        let h1 = out.hypothesis == Hypothesis::H1;
        reject |= h1;
        stats.push(RoundStat {
            round: k,
            uses: oracle.uses() - before,
            outcome: usize::from(h1),
        });
    }
    let decision = if reject {
        Decision::Alternative
    } else {
        Decision::NullHypothesis
    };
    Ok(TestVerdict {
        decision,
        uses: oracle.uses() - start,
        rounds: stats,
    })
}

/// Error rates of the collision tester at one grid point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
    pub c_cal: f64,
    /// Fraction of uniform inputs declared far.
    pub false_alarm: f64,
    /// Fraction of inputs at distance exactly `gamma` declared uniform.
    pub miss: f64,
}

/// Distribution on `n` symbols (`n` even) at total variation exactly `gamma` from uniform.
pub fn boundary_distribution(n: usize, gamma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i < n / 2 {
                (1.0 + 2.0 * gamma) / n as f64
            } else {
                (1.0 - 2.0 * gamma) / n as f64
            }
        })
        .collect()
}

/// Empirical error rates of the collision tester with constant `c_cal`.
pub fn calibration_point(
    n: usize,
    gamma: f64,
    delta: f64,
    c_cal: f64,
    trials: usize,
    seed: u64,
) -> Result<CalibrationPoint> {
    let plan = UniformityPlan::new(n, gamma, delta, c_cal)?;
    let uniform = CategoricalSampler::new(&vec![1.0 / n as f64; n])?;
    let far = CategoricalSampler::new(&boundary_distribution(n, gamma))?;
    let mut false_alarm = 0;
    let mut miss = 0;
    for t in 0..trials {
        let mut rng = RngStream::new(seed, t as u64);
        if !uniformity_test_from_counts(plan, |s| Ok(uniform.counts(s, &mut rng)))?.uniform {
            false_alarm += 1;
        }
        if uniformity_test_from_counts(plan, |s| Ok(far.counts(s, &mut rng)))?.uniform {
            miss += 1;
        }
    }
    Ok(CalibrationPoint {
        n,
        gamma,
        delta,
        c_cal,
        false_alarm: false_alarm as f64 / trials as f64,
        miss: miss as f64 / trials as f64,
    })
}
