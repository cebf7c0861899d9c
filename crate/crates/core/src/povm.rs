//! POVMs, Born-rule distributions and categorical sampling.

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, operator_norm, ComplexMatrix, DensityMatrix, PureState, C64};
use crate::random::{haar_unitary, RngStream};

/// Tolerance on `||sum_x M_x - I||_inf`.
pub const TAU_POVM: f64 = 1e-8;

/// Probabilities with absolute value below this are treated as zero.
pub const PROB_FLOOR: f64 = 1e-12;

/// Positive operator-valued measure on `C^d`.
#[derive(Debug, Clone)]
pub struct Povm {
    d: usize,
    elements: Vec<ComplexMatrix>,
    /// `(weight, v)` with `M_x = weight |v><v|` when every element is rank one.
    rank_one: Option<Vec<(f64, Vec<C64>)>>,
}

impl Povm {
    /// # Errors
    /// [`Error::InvalidInput`] if an element is not Hermitian PSD or the
    /// elements do not sum to the identity within [`TAU_POVM`].
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let d = elements
            .first()
            .map(ComplexMatrix::rows)
            .ok_or_else(|| Error::InvalidInput("empty POVM".into()))?;
        let mut sum = ComplexMatrix::zeros(d, d);
        for m in &elements {
            if m.rows() != d || m.cols() != d {
                return Err(Error::Shape(format!(
                    "POVM element is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            if !m.is_hermitian(TAU_POVM) {
                return Err(Error::InvalidInput("POVM element is not Hermitian".into()));
            }
            let min = *hermitian_eig(m)?.values.last().unwrap();
            if min < -TAU_POVM {
                return Err(Error::InvalidInput(format!(
                    "POVM element has eigenvalue {min:.3e}"
                )));
            }
            sum += m;
        }
        check_completeness(&sum)?;
        Ok(Self {
            d,
            elements,
            rank_one: None,
        })
    }

    /// POVM with elements `w_x |v_x><v_x|`.
    pub fn from_rank_one(d: usize, parts: Vec<(f64, Vec<C64>)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("empty POVM".into()));
        }
        let mut elements = Vec::with_capacity(parts.len());
        let mut sum = ComplexMatrix::zeros(d, d);
        for (w, v) in &parts {
            if v.len() != d {
                return Err(Error::Shape(format!(
                    "POVM vector has length {}, expected {d}",
                    v.len()
                )));
            }
            if *w < 0.0 {
                return Err(Error::InvalidInput(format!("negative POVM weight {w}")));
            }
            let m = ComplexMatrix::outer(v, v).scale_real(*w);
            sum += &m;
            elements.push(m);
        }
        check_completeness(&sum)?;
        Ok(Self {
            d,
            elements,
            rank_one: Some(parts),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }
}

fn check_completeness(sum: &ComplexMatrix) -> Result<()> {
    let residual = operator_norm(&(sum - &ComplexMatrix::identity(sum.rows())));
    if residual > TAU_POVM {
        return Err(Error::InvalidInput(format!(
            "POVM elements sum to I only within {residual:.3e}"
        )));
    }
    Ok(())
}

/// `{|phi><phi|, I - |phi><phi|}`.
pub fn two_outcome_projector(phi: &PureState) -> Povm {
    let d = phi.dim();
    let p = ComplexMatrix::outer(phi.amplitudes(), phi.amplitudes());
    let q = &ComplexMatrix::identity(d) - &p;
    Povm {
        d,
        elements: vec![p, q],
        rank_one: None,
    }
}

/// `M_x -> U M_x U^dag`.
///
/// # Errors
/// [`Error::InvalidInput`] unless `u` is a unitary of the POVM's dimension.
pub fn conjugated(povm: &Povm, u: &ComplexMatrix) -> Result<Povm> {
    if u.rows() != povm.d || u.cols() != povm.d {
        return Err(Error::Shape(format!(
            "unitary is {}x{}, POVM has d = {}",
            u.rows(),
            u.cols(),
            povm.d
        )));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "conjugating matrix is not unitary (defect {defect:.3e})"
        )));
    }
    let ud = u.adjoint();
    let elements = povm.elements.iter().map(|m| &(u * m) * &ud).collect();
    let rank_one = povm.rank_one.as_ref().map(|parts| {
        parts
            .iter()
            .map(|(w, v)| (*w, u.apply(v).expect("shape checked")))
            .collect()
    });
    Ok(Povm {
        d: povm.d,
        elements,
        rank_one,
    })
}

/// Columns of `l` independent Haar unitaries, each weighted `1/l`; outcome
/// `i * d + j` is column `j` of unitary `i`.
pub fn haar_columns_povm(d: usize, l: usize, rng: &mut RngStream) -> Result<Povm> {
    if d == 0 || l == 0 {
        return Err(Error::InvalidInput(format!(
            "need d, l >= 1, got d = {d}, l = {l}"
        )));
    }
    let w = 1.0 / l as f64;
    let parts = (0..l)
        .flat_map(|_| {
            let u = haar_unitary(d, rng);
            (0..d).map(move |j| (w, u.column(j))).collect::<Vec<_>>()
        })
        .collect();
    Povm::from_rank_one(d, parts)
}

/// Born distribution `p_x = Tr(rho M_x)`.
///
/// Entries within [`PROB_FLOOR`] of zero are set to zero and the vector is
/// renormalised.
///
/// # Errors
/// [`Error::Shape`] on a dimension mismatch, [`Error::Numerical`] if some
/// `p_x < -TAU_POVM`.
pub fn outcome_distribution(povm: &Povm, rho: &DensityMatrix) -> Result<Vec<f64>> {
    let m = rho.matrix();
    if m.rows() != povm.d {
        return Err(Error::Shape(format!(
            "state has dim {}, POVM has d = {}",
            m.rows(),
            povm.d
        )));
    }
    let raw: Vec<f64> = match &povm.rank_one {
        Some(parts) => parts
            .iter()
            .map(|(w, v)| w * m.quadratic_form(v).re)
            .collect(),
        None => povm
            .elements
            .iter()
            .map(|e| m.trace_product(e).re)
            .collect(),
    };
    clean_distribution(raw)
}

fn clean_distribution(mut p: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|&&x| x < -TAU_POVM || !x.is_finite()) {
        return Err(Error::Numerical(format!(
            "Born probability {bad:.3e} is negative"
        )));
    }
    for x in p.iter_mut() {
        if *x < PROB_FLOOR {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(Error::Numerical("Born distribution has zero mass".into()));
    }
    p.iter_mut().for_each(|x| *x /= s);
    Ok(p)
}

/// Inverse-CDF sampler over a finite distribution.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    /// # Errors
    /// [`Error::InvalidInput`] if an entry is below `-1e-12`, the vector is
    /// empty, or the entries do not sum to one within `1e-8`.
    pub fn new(dist: &[f64]) -> Result<Self> {
        if dist.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if let Some(bad) = dist.iter().find(|&&x| x < -PROB_FLOOR || !x.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid probability {bad}")));
        }
        let probs: Vec<f64> = dist.iter().map(|&x| x.max(0.0)).collect();
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!("probabilities sum to {s}")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|x| x / s).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // the last nonzero entry closes the CDF exactly
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            cdf[last..].iter_mut().for_each(|c| *c = 1.0);
        }
        Ok(Self { probs, cdf })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// First index with `cdf > u`, `u` uniform on `[0, 1)`.
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        self.cdf.partition_point(|&c| c <= u)
    }

    /// Outcome counts of `n` independent draws, via sequential binomials.
    pub fn counts(&self, n: u64, rng: &mut RngStream) -> Vec<u64> {
        let mut out = vec![0u64; self.probs.len()];
        let mut left = n;
        let mut mass = 1.0;
        for (i, &p) in self.probs.iter().enumerate() {
            if left == 0 {
                break;
            }
            if mass <= 0.0 || p >= mass {
                out[i] = left;
                left = 0;
                break;
            }
            let q = (p / mass).clamp(0.0, 1.0);
            let c = if q == 0.0 {
                0
            } else {
                Binomial::new(left, q).expect("q in [0, 1]").sample(rng)
            };
            out[i] = c;
            left -= c;
            mass -= p;
        }
        if left > 0 {
            let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            out[last] += left;
        }
        out
    }
}

/// `n` i.i.d. draws from `dist`.
pub fn sample_outcome(dist: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    let s = CategoricalSampler::new(dist)?;
    Ok((0..n).map(|_| s.sample(rng)).collect())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

/// `(1/2) sum_i |p_i - q_i|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `KL(p || q)` in nats; infinite when `q_i = 0 < p_i`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Ok(f64::INFINITY);
        }
        s += a * (a / b).ln();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_of_biased_coins() {
        let kl = kl_divergence(&[2.0 / 3.0, 1.0 / 3.0], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!((kl - 2f64.ln() / 3.0).abs() < 1e-15);
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0])
            .unwrap()
            .is_infinite());
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 2f64.ln());
    }

    #[test]
    fn tv_basic() {
        assert!((total_variation(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(total_variation(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn sampler_never_draws_zero_mass() {
        let mut rng = RngStream::new(0, 0);
        let s = CategoricalSampler::new(&[0.0, 0.3, 0.0, 0.7, 0.0]).unwrap();
        for _ in 0..10_000 {
            let x = s.sample(&mut rng);
            assert!(x == 1 || x == 3);
        }
        let c = s.counts(100_000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 100_000);
        assert_eq!(c[0] + c[2] + c[4], 0);
        assert!((c[3] as f64 / 1e5 - 0.7).abs() < 0.01);
    }

    #[test]
    fn sampler_rejects_bad_input() {
        assert!(CategoricalSampler::new(&[0.5, -0.1, 0.6]).is_err());
        assert!(CategoricalSampler::new(&[0.5, 0.2]).is_err());
        assert!(CategoricalSampler::new(&[]).is_err());
        assert!(CategoricalSampler::new(&[1.0 + 1e-13, -1e-13]).is_ok());
    }

    #[test]
    fn two_outcome_on_own_state_is_deterministic() {
        let mut rng = RngStream::new(1, 0);
        let phi = crate::random::haar_state(4, &mut rng);
        let p = outcome_distribution(&two_outcome_projector(&phi), &phi.projector()).unwrap();
        assert_eq!(p[1], 0.0);
        assert_eq!(p[0], 1.0);
    }

    #[test]
    fn haar_povm_is_complete_and_conjugation_commutes() {
        let mut rng = RngStream::new(2, 0);
        let m = haar_columns_povm(3, 2, &mut rng).unwrap();
        assert_eq!(m.len(), 6);
        let u = haar_unitary(3, &mut rng);
        let rho = crate::random::random_density(3, 2, &mut rng);
        let conj = conjugated(&m, &u).unwrap();
        // p_x(U rho U^dag ; U M U^dag) = p_x(rho ; M)
        let rotated = DensityMatrix::new(&(&u * rho.matrix()) * &u.adjoint()).unwrap();
        let a = outcome_distribution(&m, &rho).unwrap();
        let b = outcome_distribution(&conj, &rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let full = Povm::new(conj.elements().to_vec()).unwrap();
        let c = outcome_distribution(&full, &rotated).unwrap();
        for (x, y) in b.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugation_rejects_non_unitary() {
        let phi = PureState::basis(2, 0).unwrap();
        let m = two_outcome_projector(&phi);
        assert!(conjugated(&m, &ComplexMatrix::identity(2).scale_real(2.0)).is_err());
        assert!(conjugated(&m, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn incomplete_povm_rejected() {
        let e = vec![ComplexMatrix::from_diag(&[1.0, 0.0])];
        assert!(Povm::new(e).is_err());
    }
}
