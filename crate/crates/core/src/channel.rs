//! Quantum channels in Kraus form, their Choi operators and the distance
//! measures used by the testers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, inner, inv_sqrt_pd, operator_norm, partial_trace, schatten_norm, trace_norm,
    vec_norm, ComplexMatrix, DensityMatrix, PureState, SchattenP, Subsystem, Tolerances, C64,
};
use crate::random::{haar_state, monte_carlo, McEstimate, RngStream};

/// Tolerance on `||sum A_k^dag A_k - I||_inf`.
pub const TAU_CPTP: f64 = 1e-8;

/// Relative eigenvalue cutoff used when extracting Kraus operators from a Choi matrix.
pub const CHOI_RANK_CUTOFF: f64 = 1e-10;

/// CPTP map `C^{d_in x d_in} -> C^{d_out x d_out}` given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    d_in: usize,
    d_out: usize,
    kraus: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Validates shapes and trace preservation at [`TAU_CPTP`].
    ///
    /// # Errors
    /// [`Error::Shape`] for wrongly sized operators, [`Error::NotCptp`] when
    /// the completeness relation fails.
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(d_in, d_out, kraus, TAU_CPTP)
    }

    pub fn with_tolerance(
        d_in: usize,
        d_out: usize,
        kraus: Vec<ComplexMatrix>,
        tol: f64,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidInput(
                "channel dimensions must be positive".into(),
            ));
        }
        if kraus.is_empty() {
            return Err(Error::InvalidInput("empty Kraus set".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.rows() != d_out || k.cols() != d_in) {
            return Err(Error::Shape(format!(
                "Kraus operator is {}x{}, expected {d_out}x{d_in}",
                k.rows(),
                k.cols()
            )));
        }
        let ch = Self { d_in, d_out, kraus };
        let residual = ch.cptp_residual();
        if !(residual <= tol) {
            return Err(Error::NotCptp {
                residual,
                tolerance: tol,
            });
        }
        Ok(ch)
    }

    pub(crate) fn from_parts_unchecked(
        d_in: usize,
        d_out: usize,
        kraus: Vec<ComplexMatrix>,
    ) -> Self {
        Self { d_in, d_out, kraus }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d_in: d,
            d_out: d,
            kraus: vec![ComplexMatrix::identity(d)],
        }
    }

    /// Completely depolarizing channel `rho -> Tr(rho) I / d_out`, with
    /// Kraus operators `|i><j| / sqrt(d_out)`.
    pub fn depolarizing(d_in: usize, d_out: usize) -> Self {
        let s = 1.0 / (d_out as f64).sqrt();
        let kraus = (0..d_out)
            .flat_map(|i| (0..d_in).map(move |j| (i, j)))
            .map(|(i, j)| ComplexMatrix::unit(d_out, d_in, i, j).scale_real(s))
            .collect();
        Self { d_in, d_out, kraus }
    }

    /// `rho -> U rho U^dag`.
    ///
    /// # Errors
    /// [`Error::InvalidInput`] if `u` is not unitary to within `1e-10`.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        check_unitary(u)?;
        Ok(Self {
            d_in: u.cols(),
            d_out: u.rows(),
            kraus: vec![u.clone()],
        })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn num_kraus(&self) -> usize {
        self.kraus.len()
    }

    /// `||sum_k A_k^dag A_k - I||_inf`.
    pub fn cptp_residual(&self) -> f64 {
        let mut s = ComplexMatrix::zeros(self.d_in, self.d_in);
        for a in &self.kraus {
            s += &(&a.adjoint() * a);
        }
        operator_norm(&(&s - &ComplexMatrix::identity(self.d_in)))
    }

    /// Channel `rho -> U N(rho) U^dag`.
    pub fn followed_by_unitary(&self, u: &ComplexMatrix) -> Result<Self> {
        check_unitary(u)?;
        if u.cols() != self.d_out {
            return Err(Error::Shape(format!(
                "unitary acts on {}, channel outputs {}",
                u.cols(),
                self.d_out
            )));
        }
        Ok(Self {
            d_in: self.d_in,
            d_out: u.rows(),
            kraus: self.kraus.iter().map(|a| u * a).collect(),
        })
    }

    /// `N(X)` for an arbitrary operator `X`.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.rows() != self.d_in || x.cols() != self.d_in {
            return Err(Error::Shape(format!(
                "input is {}x{}, channel expects d_in = {}",
                x.rows(),
                x.cols(),
                self.d_in
            )));
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for a in &self.kraus {
            out += &(&(a * x) * &a.adjoint());
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_operator(rho.matrix())?;
        Ok(DensityMatrix::from_matrix_unchecked(out.hermitian_part()))
    }

    /// `N(|phi><phi|)` computed as `sum_k (A_k phi)(A_k phi)^dag`.
    pub fn apply_pure(&self, phi: &PureState) -> Result<DensityMatrix> {
        if phi.dim() != self.d_in {
            return Err(Error::Shape(format!(
                "input state has dim {}, channel expects {}",
                phi.dim(),
                self.d_in
            )));
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for a in &self.kraus {
            let v = a.apply(phi.amplitudes())?;
            out += &ComplexMatrix::outer(&v, &v);
        }
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    /// `(id_anc (x) N)(|psi><psi|)` for `psi` on `d_anc * d_in`.
    pub fn apply_with_ancilla(&self, psi: &PureState, d_anc: usize) -> Result<DensityMatrix> {
        if d_anc == 0 || psi.dim() != d_anc * self.d_in {
            return Err(Error::Shape(format!(
                "joint input has dim {}, expected {d_anc} x {}",
                psi.dim(),
                self.d_in
            )));
        }
        let id = ComplexMatrix::identity(d_anc);
        let n = d_anc * self.d_out;
        let mut out = ComplexMatrix::zeros(n, n);
        for a in &self.kraus {
            let v = id.kron(a).apply(psi.amplitudes())?;
            out += &ComplexMatrix::outer(&v, &v);
        }
        Ok(DensityMatrix::from_matrix_unchecked(out))
    }

    /// Heisenberg-picture map `Y -> sum_k A_k^dag Y A_k`.
    pub fn adjoint_apply(&self, y: &ComplexMatrix) -> Result<ComplexMatrix> {
        if y.rows() != self.d_out || y.cols() != self.d_out {
            return Err(Error::Shape(format!(
                "operator is {}x{}, expected d_out = {}",
                y.rows(),
                y.cols(),
                self.d_out
            )));
        }
        let mut out = ComplexMatrix::zeros(self.d_in, self.d_in);
        for a in &self.kraus {
            out += &(&(&a.adjoint() * y) * a);
        }
        Ok(out)
    }

    /// Normalised Choi operator, ordered input (x) output.
    pub fn choi(&self) -> ChoiOperator {
        choi_matrix(self)
    }
}

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    if !u.is_square() {
        return Err(Error::InvalidInput(format!(
            "{}x{} matrix cannot be unitary",
            u.rows(),
            u.cols()
        )));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "matrix is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// `J = (1/d_in) sum_ij |i><j| (x) N(|i><j|)`: PSD, unit trace, `Tr_out J = I/d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiOperator {
    d_in: usize,
    d_out: usize,
    mat: ComplexMatrix,
}

impl ChoiOperator {
    /// # Errors
    /// [`Error::InvalidChoi`] if the matrix is not Hermitian, not PSD or its
    /// output marginal differs from `I/d_in`.
    pub fn new(mat: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        validate_choi(&mat, d_in, d_out, &Tolerances::default())?;
        Ok(Self { d_in, d_out, mat })
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }
}

fn validate_choi(mat: &ComplexMatrix, d_in: usize, d_out: usize, tol: &Tolerances) -> Result<()> {
    let n = d_in * d_out;
    if n == 0 || mat.rows() != n || mat.cols() != n {
        return Err(Error::InvalidChoi(format!(
            "{}x{} matrix for d_in = {d_in}, d_out = {d_out}",
            mat.rows(),
            mat.cols()
        )));
    }
    let defect = mat.hermiticity_defect();
    if defect > tol.herm {
        return Err(Error::InvalidChoi(format!(
            "not Hermitian (defect {defect:.3e})"
        )));
    }
    let tr = mat.trace().re;
    let min = *hermitian_eig(mat)?.values.last().unwrap();
    if min < -tol.psd * tr.abs().max(1.0) {
        return Err(Error::InvalidChoi(format!("negative eigenvalue {min:.3e}")));
    }
    let marginal = partial_trace(mat, (d_in, d_out), Subsystem::A)?;
    let dev = (&marginal - &ComplexMatrix::identity(d_in).scale_real(1.0 / d_in as f64)).max_abs();
    if dev > tol.trace {
        return Err(Error::InvalidChoi(format!(
            "input marginal deviates from I/d_in by {dev:.3e}"
        )));
    }
    Ok(())
}

/// Choi operator of `ch`, built from the vectorised Kraus operators.
pub fn choi_matrix(ch: &KrausChannel) -> ChoiOperator {
    let (d_in, d_out) = (ch.d_in, ch.d_out);
    let n = d_in * d_out;
    let mut mat = ComplexMatrix::zeros(n, n);
    for a in &ch.kraus {
        let v = vectorize(a);
        mat += &ComplexMatrix::outer(&v, &v);
    }
    ChoiOperator {
        d_in,
        d_out,
        mat: mat.scale_real(1.0 / d_in as f64),
    }
}

/// `sum_i |i> (x) A|i>`, indexed `i * d_out + o`.
fn vectorize(a: &ComplexMatrix) -> Vec<C64> {
    let (d_out, d_in) = (a.rows(), a.cols());
    (0..d_in * d_out)
        .map(|idx| a[(idx % d_out, idx / d_out)])
        .collect()
}

/// Kraus operators from the spectral decomposition of a Choi operator.
///
/// Eigenvalues below `1e-10 * Tr J` are dropped. If the truncated set misses
/// trace preservation by more than [`TAU_CPTP`], it is corrected once by
/// `A_k -> A_k S^{-1/2}` with `S = sum A_k^dag A_k`.
pub fn kraus_from_choi(choi: &ChoiOperator) -> Result<KrausChannel> {
    kraus_from_choi_matrix(&choi.mat, choi.d_in, choi.d_out)
}

/// As [`kraus_from_choi`] but validating a raw matrix first.
///
/// # Errors
/// [`Error::InvalidChoi`] if `mat` is not a valid normalised Choi operator.
pub fn kraus_from_choi_matrix(
    mat: &ComplexMatrix,
    d_in: usize,
    d_out: usize,
) -> Result<KrausChannel> {
    validate_choi(mat, d_in, d_out, &Tolerances::default())?;
    let eig = hermitian_eig(mat)?;
    let cutoff = CHOI_RANK_CUTOFF * mat.trace().re;
    let mut kraus = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam < cutoff {
            continue;
        }
        let s = C64::new((lam * d_in as f64).sqrt(), 0.0);
        kraus.push(ComplexMatrix::from_fn(d_out, d_in, |o, i| {
            eig.vectors[(i * d_out + o, k)] * s
        }));
    }
    let ch = KrausChannel::from_parts_unchecked(d_in, d_out, kraus);
    if ch.cptp_residual() <= TAU_CPTP {
        return Ok(ch);
    }
    let mut s = ComplexMatrix::zeros(d_in, d_in);
    for a in &ch.kraus {
        s += &(&a.adjoint() * a);
    }
    let fix = inv_sqrt_pd(&s)?;
    let corrected = ch.kraus.iter().map(|a| a * &fix).collect();
    KrausChannel::new(d_in, d_out, corrected)
}

/// `eta` from the Kraus Gram matrix: `eta^2 = sum_kl |Tr(A_k^dag A_l)|^2 - d_in/d_out`.
pub fn eta_kraus(ch: &KrausChannel) -> f64 {
    let mut s = 0.0;
    for a in &ch.kraus {
        for b in &ch.kraus {
            s += a.hs_inner(b).norm_sqr();
        }
    }
    (s - ch.d_in as f64 / ch.d_out as f64).max(0.0).sqrt()
}

/// `eta = d_in ||J_N - I/(d_in d_out)||_2`.
pub fn eta_choi(ch: &KrausChannel) -> f64 {
    let j = choi_matrix(ch);
    let d = (ch.d_in * ch.d_out) as f64;
    let dev = &j.mat - &ComplexMatrix::identity(ch.d_in * ch.d_out).scale_real(1.0 / d);
    ch.d_in as f64 * dev.frobenius_norm()
}

/// Distance parameter `eta` of `N` from the depolarizing channel, computed
/// both from the Kraus operators and from the Choi matrix.
///
/// # Errors
/// [`Error::Numerical`] if the two evaluations disagree by more than `1e-8`.
pub fn eta(ch: &KrausChannel) -> Result<f64> {
    let (a, b) = (eta_kraus(ch), eta_choi(ch));
    // both are square roots of the same quantity; compare the squares
    if (a * a - b * b).abs() > 1e-8 * (1.0 + a * a) {
        return Err(Error::Numerical(format!(
            "eta mismatch: Kraus {a:.12e} vs Choi {b:.12e}"
        )));
    }
    Ok(b)
}

/// `m = ||N(I) - (d_in/d_out) I||_2`.
pub fn m_norm(ch: &KrausChannel) -> f64 {
    let ni = ch
        .apply_operator(&ComplexMatrix::identity(ch.d_in))
        .expect("identity has input shape");
    let r = ch.d_in as f64 / ch.d_out as f64;
    (&ni - &ComplexMatrix::identity(ch.d_out).scale_real(r)).frobenius_norm()
}

fn require_square(ch: &KrausChannel) -> Result<usize> {
    if ch.d_in != ch.d_out {
        return Err(Error::Domain(format!(
            "needs d_in = d_out, got {} -> {}",
            ch.d_in, ch.d_out
        )));
    }
    Ok(ch.d_in)
}

/// `<Psi| (id (x) N)(Psi Psi^*) |Psi> = sum_k |Tr A_k|^2 / d^2`.
///
/// # Errors
/// [`Error::Domain`] unless `d_in = d_out`.
pub fn entanglement_fidelity(ch: &KrausChannel) -> Result<f64> {
    let d = require_square(ch)? as f64;
    Ok(ch.kraus.iter().map(|a| a.trace().norm_sqr()).sum::<f64>() / (d * d))
}

/// Haar average of `<phi|N(phi phi^*)|phi>`, equal to `(1 + d F_ent) / (1 + d)`.
pub fn average_fidelity(ch: &KrausChannel) -> Result<f64> {
    let d = require_square(ch)? as f64;
    Ok((1.0 + d * entanglement_fidelity(ch)?) / (1.0 + d))
}

/// Monte Carlo estimate of the average fidelity over Haar-random inputs.
pub fn average_fidelity_mc(ch: &KrausChannel, samples: usize, seed: u64) -> Result<McEstimate> {
    let d = require_square(ch)?;
    Ok(monte_carlo(samples, seed, |rng| {
        let phi = haar_state(d, rng);
        ch.kraus
            .iter()
            .map(|a| inner(phi.amplitudes(), &a.apply(phi.amplitudes()).expect("shape")).norm_sqr())
            .sum()
    }))
}

fn check_same_shape(a: &KrausChannel, b: &KrausChannel) -> Result<()> {
    if (a.d_in, a.d_out) != (b.d_in, b.d_out) {
        return Err(Error::Shape(format!(
            "channels {}->{} and {}->{} are not comparable",
            a.d_in, a.d_out, b.d_in, b.d_out
        )));
    }
    Ok(())
}

/// Schatten distance between Choi operators; `p` must be 1 or 2.
pub fn choi_distance(a: &KrausChannel, b: &KrausChannel, p: SchattenP) -> Result<f64> {
    check_same_shape(a, b)?;
    if p == SchattenP::Inf {
        return Err(Error::Domain(
            "Choi distance is defined for p = 1 or 2".into(),
        ));
    }
    Ok(schatten_norm(
        &(&choi_matrix(a).mat - &choi_matrix(b).mat),
        p,
    ))
}

/// Settings for the pure-input local search behind [`trace_distance_lb`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSearch {
    pub restarts: usize,
    pub max_iters: usize,
    pub min_improvement: f64,
}

impl Default for LocalSearch {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 200,
            min_improvement: 1e-10,
        }
    }
}

/// Best pure input found by the local search and its objective value.
#[derive(Debug, Clone)]
pub struct TraceDistanceWitness {
    pub value: f64,
    pub input: PureState,
}

fn output_difference(a: &KrausChannel, b: &KrausChannel, phi: &[C64]) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.d_out, a.d_out);
    for k in &a.kraus {
        let v = k.apply(phi).expect("shape");
        out += &ComplexMatrix::outer(&v, &v);
    }
    for k in &b.kraus {
        let v = k.apply(phi).expect("shape");
        out = &out - &ComplexMatrix::outer(&v, &v);
    }
    out
}

/// Value of `||(A - B)(phi phi^*)||_1` and its Hermitian gradient operator
/// `G = A^dag(S) - B^dag(S)` with `S = sign(A(phi phi^*) - B(phi phi^*))`.
fn objective_and_gradient(
    a: &KrausChannel,
    b: &KrausChannel,
    phi: &[C64],
) -> Result<(f64, ComplexMatrix)> {
    let diff = output_difference(a, b, phi);
    let eig = hermitian_eig(&diff)?;
    let value = eig.values.iter().map(|v| v.abs()).sum();
    let sign = eig.map(|v| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    });
    let g = &a.adjoint_apply(&sign)? - &b.adjoint_apply(&sign)?;
    Ok((value, g))
}

fn objective(a: &KrausChannel, b: &KrausChannel, phi: &[C64]) -> f64 {
    trace_norm(&output_difference(a, b, phi))
}

fn ascend(
    a: &KrausChannel,
    b: &KrausChannel,
    start: PureState,
    opts: &LocalSearch,
) -> Result<TraceDistanceWitness> {
    let mut phi = start.amplitudes().to_vec();
    let mut f = objective(a, b, &phi);
    let mut step = 1.0;
    for _ in 0..opts.max_iters {
        let (_, g) = objective_and_gradient(a, b, &phi)?;
        let gphi = g.apply(&phi)?;
        let along = inner(&phi, &gphi);
        let tangent: Vec<C64> = gphi.iter().zip(&phi).map(|(x, p)| x - along * p).collect();
        if vec_norm(&tangent) < 1e-14 {
            break;
        }
        let mut accepted = None;
        while step > 1e-12 {
            let cand: Vec<C64> = phi
                .iter()
                .zip(&tangent)
                .map(|(p, t)| p + t * step)
                .collect();
            let n = vec_norm(&cand);
            let cand: Vec<C64> = cand.into_iter().map(|z| z / n).collect();
            let fc = objective(a, b, &cand);
            if fc > f {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let gain = fc - f;
        phi = cand;
        f = fc;
        step = (step * 2.0).min(4.0);
        if gain < opts.min_improvement {
            break;
        }
    }
    Ok(TraceDistanceWitness {
        value: f,
        input: PureState::normalized(phi)?,
    })
}

/// Lower bound on `max_phi ||A(phi phi^*) - B(phi phi^*)||_1` from projected
/// gradient ascent over pure inputs. `seeds` are tried in addition to
/// `opts.restarts` Haar-random starting points.
pub fn trace_distance_lb(
    a: &KrausChannel,
    b: &KrausChannel,
    opts: &LocalSearch,
    seeds: &[PureState],
    rng: &mut RngStream,
) -> Result<TraceDistanceWitness> {
    check_same_shape(a, b)?;
    if let Some(s) = seeds.iter().find(|s| s.dim() != a.d_in) {
        return Err(Error::Shape(format!(
            "seed state has dim {}, expected {}",
            s.dim(),
            a.d_in
        )));
    }
    let starts = seeds
        .iter()
        .cloned()
        .chain((0..opts.restarts).map(|_| haar_state(a.d_in, rng)))
        .collect::<Vec<_>>();
    let mut best: Option<TraceDistanceWitness> = None;
    for s in starts {
        let w = ascend(a, b, s, opts)?;
        if best.as_ref().map_or(true, |bw| w.value > bw.value) {
            best = Some(w);
        }
    }
    best.ok_or_else(|| Error::InvalidInput("local search needs at least one start".into()))
}

/// Certified interval for the diamond distance (no 1/2 factor, so in `[0, 2]`).
#[derive(Debug, Clone)]
pub struct DiamondBounds {
    pub lower: f64,
    pub upper: f64,
    /// Best ancilla-free value found by [`trace_distance_lb`].
    pub trace_lower: f64,
    /// `||J_A - J_B||_1`, the value on the maximally entangled input.
    pub choi_lower: f64,
    pub witness: PureState,
}

/// `upper = min(d_in ||dJ||_1, d_in sqrt(d_out) ||dJ||_2, 2)`;
/// `lower = max(trace_distance_lb, ||dJ||_1)`.
pub fn diamond_bounds(
    a: &KrausChannel,
    b: &KrausChannel,
    opts: &LocalSearch,
    seeds: &[PureState],
    rng: &mut RngStream,
) -> Result<DiamondBounds> {
    check_same_shape(a, b)?;
    let dj = &choi_matrix(a).mat - &choi_matrix(b).mat;
    let n1 = trace_norm(&dj);
    let n2 = dj.frobenius_norm();
    let d_in = a.d_in as f64;
    let upper = (d_in * n1)
        .min(d_in * (a.d_out as f64).sqrt() * n2)
        .min(2.0);
    let w = trace_distance_lb(a, b, opts, seeds, rng)?;
    Ok(DiamondBounds {
        lower: w.value.max(n1),
        upper,
        trace_lower: w.value,
        choi_lower: n1,
        witness: w.input,
    })
}

/// JSON layout: `{"d_in", "d_out", "kraus": [[[re, im], ...], ...]}`, each
/// Kraus operator flattened row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelJson {
    pub d_in: usize,
    pub d_out: usize,
    pub kraus: Vec<Vec<[f64; 2]>>,
}

impl From<&KrausChannel> for ChannelJson {
    fn from(ch: &KrausChannel) -> Self {
        Self {
            d_in: ch.d_in,
            d_out: ch.d_out,
            kraus: ch
                .kraus
                .iter()
                .map(|a| a.as_slice().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<ChannelJson> for KrausChannel {
    type Error = Error;

    /// Re-validates trace preservation.
    fn try_from(j: ChannelJson) -> Result<Self> {
        let kraus = j
            .kraus
            .into_iter()
            .map(|flat| {
                ComplexMatrix::from_vec(
                    j.d_out,
                    j.d_in,
                    flat.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        KrausChannel::new(j.d_in, j.d_out, kraus)
    }
}
