//! Seeded random streams, Haar sampling, Monte Carlo helpers and the two
//! adversarial channel families.
//!
//! Every stream is ChaCha20 (`rand_chacha`). The 256-bit key comes from
//! `seed_from_u64(seed)`, the ChaCha stream id is `stream_id`, and a *lane*
//! offsets the word position by `lane * 2^64`. Distinct
//! `(seed, stream_id, lane)` triples never share output, whatever the thread
//! layout.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{kraus_from_choi_matrix, ChannelJson, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, trace_norm, ComplexMatrix, DensityMatrix, PureState, C64};

/// Deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha20Rng,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::with_lane(seed, stream_id, 0)
    }

    /// Independent sub-stream of `(seed, stream_id)`.
    pub fn with_lane(seed: u64, stream_id: u64, lane: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        inner.set_word_pos((lane as u128) << 64);
        Self {
            inner,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Complex Gaussian with `E|z|^2 = 1`.
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        C64::new(self.normal() * s, self.normal() * s)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `rows x cols` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut RngStream) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_normal())
}

/// Haar-random unitary: QR of a Ginibre matrix, with column `i` of `Q`
/// multiplied by `r_ii / |r_ii|` so that `R` has a positive diagonal.
pub fn haar_unitary(d: usize, rng: &mut RngStream) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let qr = DMatrix::from_fn(d, d, |i, j| g[(i, j)]).qr();
    let (q, r) = (qr.q(), qr.r());
    ComplexMatrix::from_fn(d, d, |i, j| {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        q[(i, j)] * phase
    })
}

/// Haar-random pure state. A normalised complex Gaussian vector has the
/// same law as a column of a Haar unitary.
pub fn haar_state(d: usize, rng: &mut RngStream) -> PureState {
    loop {
        let v: Vec<C64> = (0..d).map(|_| rng.complex_normal()).collect();
        if let Ok(s) = PureState::normalized(v) {
            return s;
        }
    }
}

/// Random state `G G^dag / Tr(G G^dag)` with `G` a `d x rank` Ginibre matrix.
pub fn random_density(d: usize, rank: usize, rng: &mut RngStream) -> DensityMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_matrix_unchecked(m.scale_real(1.0 / tr).hermitian_part())
}

/// Random channel with `kraus_rank` Kraus operators, cut from the first
/// `d_in` columns of a Haar unitary on `d_out * kraus_rank`.
///
/// # Errors
/// [`Error::InvalidInput`] if `d_out * kraus_rank < d_in`.
pub fn random_channel(
    d_in: usize,
    d_out: usize,
    kraus_rank: usize,
    rng: &mut RngStream,
) -> Result<KrausChannel> {
    if d_in == 0 || d_out == 0 || kraus_rank == 0 || d_out * kraus_rank < d_in {
        return Err(Error::InvalidInput(format!(
            "no isometry from {d_in} into {d_out} x {kraus_rank}"
        )));
    }
    let u = haar_unitary(d_out * kraus_rank, rng);
    let kraus = (0..kraus_rank)
        .map(|k| ComplexMatrix::from_fn(d_out, d_in, |o, i| u[(k * d_out + o, i)]))
        .collect();
    KrausChannel::new(d_in, d_out, kraus)
}

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Samples per shard. Fixed so that results do not depend on the thread count.
pub const MC_SHARD: usize = 2048;

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Self = Self {
        n: 0.0,
        mean: 0.0,
        m2: 0.0,
    };

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }

    fn estimate(self) -> McEstimate {
        let var = if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr: (var / self.n.max(1.0)).sqrt(),
            samples: self.n as usize,
        }
    }
}

/// Averages `k` statistics over `samples` draws. Shard `s` uses
/// `RngStream::new(seed, s)`; shards are reduced in index order.
pub fn monte_carlo_vec<F>(samples: usize, seed: u64, k: usize, f: F) -> Vec<McEstimate>
where
    F: Fn(&mut RngStream, &mut [f64]) + Sync,
{
    let shards = samples.div_ceil(MC_SHARD);
    let partials: Vec<Vec<Moments>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::new(seed, s as u64);
            let mut acc = vec![Moments::EMPTY; k];
            let mut buf = vec![0.0; k];
            let n = MC_SHARD.min(samples - s * MC_SHARD);
            for _ in 0..n {
                f(&mut rng, &mut buf);
                for (a, &x) in acc.iter_mut().zip(&buf) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::EMPTY; k];
    for p in partials {
        for (t, m) in total.iter_mut().zip(p) {
            *t = t.merge(m);
        }
    }
    total.into_iter().map(Moments::estimate).collect()
}

pub fn monte_carlo<F>(samples: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&mut RngStream) -> f64 + Sync,
{
    monte_carlo_vec(samples, seed, 1, |rng, out| out[0] = f(rng))[0]
}

/// Adversarial family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `rho -> (rho + U_V rho U_V^dag) / 2`, far from the identity.
    UnitaryMixture,
    /// Depolarizing plus a Gaussian rank-one perturbation, far from depolarizing.
    GaussianDepolarizing,
}

/// Input state certifying the distance, with the value it attains.
#[derive(Debug, Clone)]
pub struct Witness {
    pub input: PureState,
    /// `||(N - reference)(|input><input|)||_1`.
    pub value: f64,
}

/// Channel drawn from an adversarial family together with its witness.
#[derive(Debug, Clone)]
pub struct AdversarialChannel {
    pub family: Family,
    pub epsilon: f64,
    pub channel: KrausChannel,
    pub witness: Witness,
    /// Rejection-sampling attempts used (1 for the unitary family).
    pub attempts: usize,
    /// `U_V` for the unitary family, the Hermitian perturbation `U` otherwise.
    pub perturbation: ComplexMatrix,
}

impl AdversarialChannel {
    /// The channel the family is measured against.
    pub fn reference(&self) -> KrausChannel {
        match self.family {
            Family::UnitaryMixture => KrausChannel::identity(self.channel.d_in()),
            Family::GaussianDepolarizing => {
                KrausChannel::depolarizing(self.channel.d_in(), self.channel.d_out())
            }
        }
    }

    pub fn to_json(&self) -> AdversarialJson {
        let c = ChannelJson::from(&self.channel);
        AdversarialJson {
            d_in: c.d_in,
            d_out: c.d_out,
            kraus: c.kraus,
            family: self.family,
            epsilon: self.epsilon,
            witness: WitnessJson {
                input: self
                    .witness
                    .input
                    .amplitudes()
                    .iter()
                    .map(|z| [z.re, z.im])
                    .collect(),
                value: self.witness.value,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessJson {
    pub input: Vec<[f64; 2]>,
    pub value: f64,
}

/// Channel JSON extended with family metadata and the witness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialJson {
    pub d_in: usize,
    pub d_out: usize,
    pub kraus: Vec<Vec<[f64; 2]>>,
    pub family: Family,
    pub epsilon: f64,
    pub witness: WitnessJson,
}

fn witness_value(ch: &KrausChannel, reference: &KrausChannel, input: &PureState) -> Result<f64> {
    let a = ch.apply_pure(input)?;
    let b = reference.apply_pure(input)?;
    Ok(trace_norm(&(a.matrix() - b.matrix())))
}

/// Channel `rho -> (rho + U_V rho U_V^dag)/2` with `U_V = V R V^dag`, `V`
/// Haar and `R` the rotation `|0> -> sqrt(1-eps^2)|0> + eps|1>` on the first
/// two basis vectors. The witness `V|0>` attains exactly `eps`.
///
/// # Errors
/// [`Error::Domain`] unless `d >= 2` and `0 < eps <= 1`.
pub fn epsilon_far_unitary_channel(
    d: usize,
    eps: f64,
    rng: &mut RngStream,
) -> Result<AdversarialChannel> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "unitary family needs d >= 2, got {d}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1], got {eps}"
        )));
    }
    let v = haar_unitary(d, rng);
    let c = (1.0 - eps * eps).sqrt();
    let mut r = ComplexMatrix::identity(d);
    r[(0, 0)] = C64::new(c, 0.0);
    r[(1, 0)] = C64::new(eps, 0.0);
    r[(0, 1)] = C64::new(-eps, 0.0);
    r[(1, 1)] = C64::new(c, 0.0);
    let uv = &(&v * &r) * &v.adjoint();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let channel = KrausChannel::new(
        d,
        d,
        vec![ComplexMatrix::identity(d).scale_real(h), uv.scale_real(h)],
    )?;
    let input = PureState::normalized(v.column(0))?;
    let value = witness_value(&channel, &KrausChannel::identity(d), &input)?;
    Ok(AdversarialChannel {
        family: Family::UnitaryMixture,
        epsilon: eps,
        channel,
        witness: Witness { input, value },
        attempts: 1,
        perturbation: uv,
    })
}

/// Hermitian zero-diagonal matrix whose off-diagonal entries are complex
/// Gaussians of variance `16 / d_out`.
pub fn gaussian_perturbation(d_out: usize, rng: &mut RngStream) -> ComplexMatrix {
    let sigma = (16.0 / d_out as f64).sqrt();
    let mut u = ComplexMatrix::zeros(d_out, d_out);
    for x in 0..d_out {
        for y in x + 1..d_out {
            let z = rng.complex_normal() * sigma;
            u[(x, y)] = z;
            u[(y, x)] = z.conj();
        }
    }
    u
}

/// Acceptance event `||U||_1 >= d_out` and `||U||_inf <= 32`.
pub fn in_good_event(u: &ComplexMatrix) -> bool {
    trace_norm(u) >= u.rows() as f64 && operator_norm(u) <= 32.0
}

/// Largest admissible `epsilon` for [`gaussian_perturbed_depolarizing`].
pub const GAUSSIAN_EPS_MAX: f64 = 1.0 / 32.0;

/// `N(rho) = Tr(rho) I/d_out + (eps/d_out) <w*|rho|w*> U`, with `w` Haar and `U`
/// from [`gaussian_perturbation`] conditioned on [`in_good_event`].
///
/// The Choi operator is `I/D + (eps/D) |w><w| (x) U` with `D = d_in d_out`;
/// Kraus operators are extracted from it. The witness input is `conj(w)`.
///
/// # Errors
/// [`Error::Domain`] unless `0 < eps <= 1/32`, and
/// [`Error::SamplingExhausted`] if `max_retries` draws all miss the event.
pub fn gaussian_perturbed_depolarizing(
    d_in: usize,
    d_out: usize,
    eps: f64,
    rng: &mut RngStream,
    max_retries: usize,
) -> Result<AdversarialChannel> {
    if d_in == 0 || d_out < 2 {
        return Err(Error::Domain(format!(
            "need d_in >= 1 and d_out >= 2, got {d_in}, {d_out}"
        )));
    }
    if !(eps > 0.0 && eps <= GAUSSIAN_EPS_MAX) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1/32], got {eps}"
        )));
    }
    let w = haar_unitary(d_in, rng).column(0);
    let mut attempts = 0;
    let mut worst = (f64::INFINITY, 0.0_f64);
    let u = loop {
        if attempts == max_retries {
            return Err(Error::SamplingExhausted {
                attempts,
                detail: format!(
                    "min ||U||_1 = {:.3}, max ||U||_inf = {:.3}",
                    worst.0, worst.1
                ),
            });
        }
        attempts += 1;
        let u = gaussian_perturbation(d_out, rng);
        if in_good_event(&u) {
            break u;
        }
        worst = (worst.0.min(trace_norm(&u)), worst.1.max(operator_norm(&u)));
    };
    let big_d = (d_in * d_out) as f64;
    let ww = ComplexMatrix::outer(&w, &w);
    let choi = &ComplexMatrix::identity(d_in * d_out).scale_real(1.0 / big_d)
        + &ww.kron(&u).scale_real(eps / big_d);
    let channel = kraus_from_choi_matrix(&choi.hermitian_part(), d_in, d_out)?;
    let input = PureState::normalized(w.iter().map(|z| z.conj()).collect())?;
    let value = witness_value(&channel, &KrausChannel::depolarizing(d_in, d_out), &input)?;
    Ok(AdversarialChannel {
        family: Family::GaussianDepolarizing,
        epsilon: eps,
        channel,
        witness: Witness { input, value },
        attempts,
        perturbation: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::new(5, 1).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s0 = RngStream::new(5, 0);
        let mut s1 = RngStream::new(5, 1);
        let mut l1 = RngStream::with_lane(5, 0, 1);
        let x = s0.next_u64();
        assert_ne!(x, s1.next_u64());
        assert_ne!(x, l1.next_u64());
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = RngStream::new(0, 0);
        for d in 1..7 {
            assert!(haar_unitary(d, &mut rng).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn haar_trace_second_moment() {
        // E|Tr U|^2 = 1 for Haar U, sensitive to a biased phase convention
        let est = monte_carlo(40_000, 17, |rng| haar_unitary(3, rng).trace().norm_sqr());
        assert!((est.mean - 1.0).abs() < 4.0 * est.stderr, "{est:?}");
        let est = monte_carlo(40_000, 18, |rng| {
            haar_unitary(3, rng)[(0, 0)].norm_sqr().powi(2)
        });
        assert!((est.mean - 2.0 / 12.0).abs() < 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn monte_carlo_is_shard_deterministic() {
        let a = monte_carlo(10_000, 3, |rng| rng.uniform());
        let b = monte_carlo(10_000, 3, |rng| rng.uniform());
        assert_eq!(a, b);
        assert!((a.mean - 0.5).abs() < 4.0 * a.stderr);
    }

    #[test]
    fn random_channel_is_cptp() {
        let mut rng = RngStream::new(2, 0);
        let ch = random_channel(3, 2, 2, &mut rng).unwrap();
        assert!(ch.cptp_residual() < 1e-12);
        assert!(random_channel(5, 2, 2, &mut rng).is_err());
    }

    #[test]
    fn unitary_family_witness_is_epsilon() {
        let mut rng = RngStream::new(9, 0);
        for eps in [0.05, 0.3, 1.0] {
            let adv = epsilon_far_unitary_channel(5, eps, &mut rng).unwrap();
            assert!((adv.witness.value - eps).abs() < 1e-10);
        }
        assert!(epsilon_far_unitary_channel(5, 1.5, &mut rng).is_err());
        assert!(epsilon_far_unitary_channel(1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn gaussian_family_domain_and_exhaustion() {
        let mut rng = RngStream::new(4, 0);
        assert!(matches!(
            gaussian_perturbed_depolarizing(2, 4, 0.1, &mut rng, 10),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gaussian_perturbed_depolarizing(2, 4, 0.01, &mut rng, 0),
            Err(Error::SamplingExhausted { .. })
        ));
        let adv = gaussian_perturbed_depolarizing(2, 4, 1.0 / 32.0, &mut rng, 1000).unwrap();
        let expected = adv.epsilon / 4.0 * trace_norm(&adv.perturbation);
        assert!((adv.witness.value - expected).abs() < 1e-9);
        assert!(adv.witness.value >= adv.epsilon - 1e-12);
    }
}
