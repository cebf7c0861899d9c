//! Permutations, unitary Weingarten calculus, and the fourth-moment analysis
//! of `Tr N(phi phi^*)^2` used to certify the depolarizing tester.
//!
//! Cycle-trace convention: for a permutation `pi` and matrices `M_1..M_n`,
//! `Tr_pi(M)` is the product over cycles `(c, pi(c), pi^2(c), ...)` of
//! `Tr(M_c M_pi(c) M_pi^2(c) ...)`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{eta, m_norm, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, inner, max_entangled, trace_norm, ComplexMatrix, C64};
use crate::random::{haar_state, haar_unitary, monte_carlo_vec};

/// Largest order the Weingarten routines accept.
pub const MAX_ORDER: usize = 4;

/// Permutation of `{0, .., n-1}` stored as its image vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// # Errors
    /// [`Error::InvalidInput`] if `images` is not a bijection of `0..n`.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::InvalidInput(format!(
                    "{images:?} is not a permutation"
                )));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    /// Builds a permutation of `n` points from 1-based cycles, e.g.
    /// `from_cycles(4, &[&[1, 3], &[2, 4]])` is `(13)(24)`.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut img: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for c in cycles {
            for (pos, &x) in c.iter().enumerate() {
                if x == 0 || x > n || used[x - 1] {
                    return Err(Error::InvalidInput(format!("bad cycle {c:?} for n = {n}")));
                }
                used[x - 1] = true;
                img[x - 1] = c[(pos + 1) % c.len()] - 1;
            }
        }
        Ok(Self(img))
    }

    /// Cyclic shift `k -> k + 1 mod n`.
    pub fn long_cycle(n: usize) -> Self {
        Self((0..n).map(|k| (k + 1) % n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `self o other`, i.e. `k -> self(other(k))`.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(
            self.len(),
            other.len(),
            "composing permutations of different sizes"
        );
        Self(other.0.iter().map(|&k| self.0[k]).collect())
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (k, &v) in self.0.iter().enumerate() {
            inv[v] = k;
        }
        Self(inv)
    }

    /// Cycles, each starting at its smallest element, ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut c = vec![start];
            seen[start] = true;
            let mut k = self.0[start];
            while k != start {
                seen[k] = true;
                c.push(k);
                k = self.0[k];
            }
            out.push(c);
        }
        out
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles().len()
    }

    /// Cycle lengths in decreasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    /// All `n!` permutations in lexicographic order of their image vectors.
    pub fn all(n: usize) -> Vec<Self> {
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Self(cur.clone())];
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..n)
                .rev()
                .find(|&j| cur[j] > cur[i - 1])
                .expect("pivot exists");
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self(cur.clone()));
        }
        out
    }
}

impl fmt::Display for Permutation {
    /// 1-based cycle notation without fixed points; `id` for the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nontrivial: Vec<_> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if nontrivial.is_empty() {
            return write!(f, "id");
        }
        let sep = if self.len() > 9 { " " } else { "" };
        for c in nontrivial {
            let parts: Vec<String> = c.iter().map(|k| (k + 1).to_string()).collect();
            write!(f, "({})", parts.join(sep))?;
        }
        Ok(())
    }
}

/// `Tr_pi(M_1, .., M_n)`.
///
/// # Errors
/// [`Error::Shape`] if the lengths differ or a cycle product is ill-formed.
pub fn tr_alpha(mats: &[ComplexMatrix], alpha: &Permutation) -> Result<C64> {
    if mats.len() != alpha.len() {
        return Err(Error::Shape(format!(
            "{} matrices for a permutation of {}",
            mats.len(),
            alpha.len()
        )));
    }
    let mut acc = C64::new(1.0, 0.0);
    for c in alpha.cycles() {
        let mut prod = mats[c[0]].clone();
        for &k in &c[1..] {
            prod = prod.matmul(&mats[k])?;
        }
        if !prod.is_square() {
            return Err(Error::Shape("cycle product is not square".into()));
        }
        acc *= prod.trace();
    }
    Ok(acc)
}

/// Weingarten function of `S_n` at dimension `d`.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    pub n: usize,
    pub d: usize,
    pub perms: Vec<Permutation>,
    /// `W[s][t] = Wg(s t^{-1})`, the inverse of `G[s][t] = d^{#cycles(s t^{-1})}`.
    pub matrix: DMatrix<f64>,
}

impl WeingartenTable {
    fn index_of(&self, p: &Permutation) -> usize {
        self.perms
            .binary_search(p)
            .expect("permutation of matching size")
    }

    /// `Wg(p)`.
    pub fn value(&self, p: &Permutation) -> f64 {
        self.matrix[(self.index_of(p), 0)]
    }

    /// `Wg` of any permutation with the given cycle type.
    pub fn by_cycle_type(&self, cycle_type: &[usize]) -> Option<f64> {
        self.perms
            .iter()
            .find(|p| p.cycle_type() == cycle_type)
            .map(|p| self.value(p))
    }

    /// `sum_p Wg(p)`.
    pub fn sum(&self) -> f64 {
        self.matrix.column(0).iter().sum()
    }
}

fn check_order(n: usize, d: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    if d < n {
        return Err(Error::Domain(format!(
            "Weingarten inversion needs d >= n, got d = {d}, n = {n}"
        )));
    }
    Ok(())
}

/// Weingarten table as the inverse of the Gram matrix of permutation operators.
///
/// # Errors
/// [`Error::UnsupportedOrder`] for `n` outside `1..=4`, [`Error::Domain`] for `d < n`.
pub fn weingarten_matrix(n: usize, d: usize) -> Result<WeingartenTable> {
    check_order(n, d)?;
    let perms = Permutation::all(n);
    let df = d as f64;
    let gram = DMatrix::from_fn(perms.len(), perms.len(), |s, t| {
        df.powi(perms[s].compose(&perms[t].inverse()).num_cycles() as i32)
    });
    let matrix = gram
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("Gram matrix singular at n = {n}, d = {d}")))?;
    Ok(WeingartenTable {
        n,
        d,
        perms,
        matrix,
    })
}

/// `E_U Tr(U B_1 U^dag A_1 U B_2 U^dag A_2 ... U B_n U^dag A_n)` in closed form:
/// `sum_{s,t} Wg(s t^{-1}) Tr_{t^{-1}}(B) Tr_{s o g}(A)` with `g(k) = k + 1 mod n`.
pub fn haar_moment(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> Result<C64> {
    let (n, d) = moment_shape(a, b)?;
    let wg = weingarten_matrix(n, d)?;
    let gamma = Permutation::long_cycle(n);
    let tr_b: Vec<C64> = wg
        .perms
        .iter()
        .map(|t| tr_alpha(b, &t.inverse()))
        .collect::<Result<_>>()?;
    let tr_a: Vec<C64> = wg
        .perms
        .iter()
        .map(|s| tr_alpha(a, &s.compose(&gamma)))
        .collect::<Result<_>>()?;
    let mut acc = C64::new(0.0, 0.0);
    for (si, ta) in tr_a.iter().enumerate() {
        for (ti, tb) in tr_b.iter().enumerate() {
            acc += ta * tb * wg.matrix[(si, ti)];
        }
    }
    Ok(acc)
}

fn moment_shape(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> Result<(usize, usize)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "need equally many A and B matrices, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = a[0].rows();
    if a.iter().chain(b).any(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::Shape("all matrices must be d x d".into()));
    }
    Ok((a.len(), d))
}

/// Closed form against Monte Carlo for one moment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentReport {
    pub closed_form: C64,
    pub monte_carlo: C64,
    /// Standard error of the complex mean, `sqrt(se_re^2 + se_im^2)`.
    pub stderr: f64,
    pub samples: usize,
}

impl MomentReport {
    /// `|closed - mc| / stderr`, with a `1e-12` floor on the denominator.
    pub fn z_score(&self) -> f64 {
        (self.closed_form - self.monte_carlo).norm() / self.stderr.max(1e-12)
    }

    pub fn within(&self, sigmas: f64) -> bool {
        (self.closed_form - self.monte_carlo).norm() <= sigmas * self.stderr + 1e-9
    }
}

/// [`haar_moment`] together with a Monte Carlo estimate over `samples` Haar unitaries.
pub fn haar_moment_report(
    a: &[ComplexMatrix],
    b: &[ComplexMatrix],
    samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    let (n, d) = moment_shape(a, b)?;
    let closed_form = haar_moment(a, b)?;
    let est = monte_carlo_vec(samples, seed, 2, |rng, out| {
        let u = haar_unitary(d, rng);
        let ud = u.adjoint();
        let mut prod = ComplexMatrix::identity(d);
        for k in 0..n {
            prod = &(&(&(&prod * &u) * &b[k]) * &ud) * &a[k];
        }
        let t = prod.trace();
        out[0] = t.re;
        out[1] = t.im;
    });
    Ok(MomentReport {
        closed_form,
        monte_carlo: C64::new(est[0].mean, est[1].mean),
        stderr: est[0].stderr.hypot(est[1].stderr),
        samples,
    })
}

/// Upper limit on the loop sizes of the `F(alpha)` evaluators.
pub const F_ALPHA_GUARD: usize = 10_000_000;

/// Gram blocks `P[a][b] = A_a^dag A_b`.
fn gram_blocks(ch: &KrausChannel) -> Vec<Vec<ComplexMatrix>> {
    let ks = ch.kraus();
    let adj: Vec<ComplexMatrix> = ks.iter().map(ComplexMatrix::adjoint).collect();
    adj.iter()
        .map(|ad| ks.iter().map(|b| ad * b).collect())
        .collect()
}

fn check_guard(ch: &KrausChannel) -> Result<usize> {
    let k = ch.num_kraus();
    let size = k.pow(4) * ch.d_in().pow(2);
    if size > F_ALPHA_GUARD {
        return Err(Error::TooLarge(format!(
            "K^4 d_in^2 = {size} exceeds {F_ALPHA_GUARD}"
        )));
    }
    Ok(k)
}

/// Factors appearing after the sums over the output basis are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    /// `A_k^dag A_l` (the second slot).
    Kl,
    /// `A_k'^dag A_l'` (the fourth slot).
    KpLp,
    /// `A_l^dag A_k`.
    Lk,
    /// `A_l'^dag A_k'`.
    LpKp,
}

/// `F(alpha)` as a product of traces of words in the four Gram blocks.
fn contraction_plan(alpha: &Permutation) -> Vec<Vec<Sym>> {
    let slot = |k: usize| if k == 1 { Sym::Kl } else { Sym::KpLp };
    let rotated = |c: &Vec<usize>, start: usize| -> Vec<usize> {
        let p = c.iter().position(|&x| x == start).expect("start in cycle");
        c[p..].iter().chain(&c[..p]).copied().collect()
    };
    let cycles = alpha.cycles();
    let mut words = Vec::new();
    let c0 = cycles
        .iter()
        .find(|c| c.contains(&0))
        .expect("0 lies on a cycle");
    if c0.contains(&2) {
        // Tr(Y_k W1 X_l) Tr(Y_k' W2 X_l') = Tr(W1 P_lk) Tr(W2 P_l'k')
        let r = rotated(c0, 0);
        let p2 = r.iter().position(|&x| x == 2).unwrap();
        let mut w1: Vec<Sym> = r[1..p2].iter().map(|&k| slot(k)).collect();
        w1.push(Sym::Lk);
        let mut w2: Vec<Sym> = r[p2 + 1..].iter().map(|&k| slot(k)).collect();
        w2.push(Sym::LpKp);
        words.push(w1);
        words.push(w2);
    } else {
        // Tr(Y_k W1 X_l' Y_k' W2 X_l) = Tr(W1 P_l'k' W2 P_lk)
        let c2 = cycles.iter().find(|c| c.contains(&2)).unwrap();
        let r0 = rotated(c0, 0);
        let r2 = rotated(c2, 2);
        let mut w: Vec<Sym> = r0[1..].iter().map(|&k| slot(k)).collect();
        w.push(Sym::LpKp);
        w.extend(r2[1..].iter().map(|&k| slot(k)));
        w.push(Sym::Lk);
        words.push(w);
    }
    for c in cycles.iter().filter(|c| !c.contains(&0) && !c.contains(&2)) {
        words.push(c.iter().map(|&k| slot(k)).collect());
    }
    words
}

/// `F(alpha) = sum_{i,j,k,l,k',l'} Tr_alpha(A_l'^dag |j><i| A_k, A_k^dag A_l,
/// A_l^dag |i><j| A_k', A_k'^dag A_l')`, with the output-basis sums contracted
/// analytically.
///
/// # Errors
/// [`Error::TooLarge`] when `K^4 d_in^2` exceeds [`F_ALPHA_GUARD`];
/// [`Error::InvalidInput`] unless `alpha` permutes four points.
pub fn f_alpha(ch: &KrausChannel, alpha: &Permutation) -> Result<C64> {
    if alpha.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "F(alpha) needs alpha in S_4, got S_{}",
            alpha.len()
        )));
    }
    let k = check_guard(ch)?;
    let p = gram_blocks(ch);
    let plan = contraction_plan(alpha);
    let d = ch.d_in();
    let mut total = C64::new(0.0, 0.0);
    for (a, b) in (0..k).flat_map(|a| (0..k).map(move |b| (a, b))) {
        for (c, e) in (0..k).flat_map(|c| (0..k).map(move |e| (c, e))) {
            let pick = |s: Sym| match s {
                Sym::Kl => &p[a][b],
                Sym::KpLp => &p[c][e],
                Sym::Lk => &p[b][a],
                Sym::LpKp => &p[e][c],
            };
            let mut term = C64::new(1.0, 0.0);
            for w in &plan {
                let t = match w.as_slice() {
                    [s] => pick(*s).trace(),
                    [s, t] => pick(*s).trace_product(pick(*t)),
                    [first, rest @ .., last] => {
                        let mut m = pick(*first).clone();
                        for s in rest {
                            m = &m * pick(*s);
                        }
                        m.trace_product(pick(*last))
                    }
                    [] => C64::new(d as f64, 0.0),
                };
                term *= t;
            }
            total += term;
        }
    }
    Ok(total)
}

/// Reference evaluation of `F(alpha)` as the literal six-fold sum.
///
/// # Errors
/// [`Error::TooLarge`] when `K^4 d_out^2` or `K^4 d_in^2` exceeds [`F_ALPHA_GUARD`].
pub fn f_alpha_direct(ch: &KrausChannel, alpha: &Permutation) -> Result<C64> {
    if alpha.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "F(alpha) needs alpha in S_4, got S_{}",
            alpha.len()
        )));
    }
    let k = check_guard(ch)?;
    let d_out = ch.d_out();
    let size = k.pow(4) * d_out * d_out;
    if size > F_ALPHA_GUARD {
        return Err(Error::TooLarge(format!(
            "K^4 d_out^2 = {size} exceeds {F_ALPHA_GUARD}"
        )));
    }
    let ks = ch.kraus();
    let p = gram_blocks(ch);
    // conj(row j of A): A^dag |j> as a vector
    let conj_row =
        |a: &ComplexMatrix, j: usize| -> Vec<C64> { a.row(j).iter().map(|z| z.conj()).collect() };
    let mut total = C64::new(0.0, 0.0);
    for kk in 0..k {
        for l in 0..k {
            for kp in 0..k {
                for lp in 0..k {
                    for i in 0..d_out {
                        for j in 0..d_out {
                            let m1 =
                                ComplexMatrix::outer(&conj_row(&ks[lp], j), &conj_row(&ks[kk], i));
                            let m3 =
                                ComplexMatrix::outer(&conj_row(&ks[l], i), &conj_row(&ks[kp], j));
                            let mats = [m1, p[kk][l].clone(), m3, p[kp][lp].clone()];
                            total += tr_alpha(&mats, alpha)?;
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// `E_phi[(Tr N(phi phi^*)^2)^2] = sum_alpha F(alpha) / (d (d+1) (d+2) (d+3))`, `d = d_in`.
pub fn second_moment_purity(ch: &KrausChannel) -> Result<f64> {
    let total: f64 = Permutation::all(4)
        .iter()
        .map(|a| f_alpha(ch, a).map(|z| z.re))
        .sum::<Result<f64>>()?;
    let d = ch.d_in() as f64;
    Ok(total / (d * (d + 1.0) * (d + 2.0) * (d + 3.0)))
}

/// `E_phi[Tr N(phi phi^*)^2] = (Tr N(I)^2 + sum_kl |Tr A_k^dag A_l|^2) / (d (d+1))`.
pub fn first_moment_purity(ch: &KrausChannel) -> f64 {
    let ni = ch
        .apply_operator(&ComplexMatrix::identity(ch.d_in()))
        .expect("shape");
    let s: f64 = ch
        .kraus()
        .iter()
        .flat_map(|a| ch.kraus().iter().map(move |b| a.hs_inner(b).norm_sqr()))
        .sum();
    let d = ch.d_in() as f64;
    (ni.hs_inner(&ni).re + s) / (d * (d + 1.0))
}

/// `E[X]` for `X = ||N(phi phi^*) - I/d_out||_2^2`, equal to `(m^2 + eta^2) / (d_in (d_in + 1))`.
pub fn expected_x(ch: &KrausChannel) -> Result<f64> {
    let (m, e) = (m_norm(ch), eta(ch)?);
    let d = ch.d_in() as f64;
    Ok((m * m + e * e) / (d * (d + 1.0)))
}

/// Closed-form value of `E[||M(phi phi^*)||_2^2]` for `M = N - D`:
/// `(||M(I)||_2^2 + d_in^2 ||J_M||_2^2) / (d_in (d_in + 1))`.
pub fn lemma1_closed_form(ch: &KrausChannel) -> f64 {
    let d_in = ch.d_in();
    let dep = KrausChannel::depolarizing(d_in, ch.d_out());
    let id = ComplexMatrix::identity(d_in);
    let mi = &ch.apply_operator(&id).expect("shape") - &dep.apply_operator(&id).expect("shape");
    let jm = ch.choi().matrix() - dep.choi().matrix();
    let d = d_in as f64;
    let fro2 = |m: &ComplexMatrix| m.hs_inner(m).re;
    (fro2(&mi) + d * d * fro2(&jm)) / (d * (d + 1.0))
}

/// `X = ||N(phi phi^*) - I/d_out||_2^2 = Tr N(phi phi^*)^2 - 1/d_out` for a Haar `phi`.
pub fn sample_x(ch: &KrausChannel, rng: &mut crate::random::RngStream) -> f64 {
    let phi = haar_state(ch.d_in(), rng);
    let out = ch.apply_pure(&phi).expect("shape");
    out.purity() - 1.0 / ch.d_out() as f64
}

/// `Var(X) / E[X]^2` from the exact second and fourth moments.
///
/// # Errors
/// [`Error::DegenerateChannel`] when `E[X] < 1e-12`.
pub fn variance_ratio_exact(ch: &KrausChannel) -> Result<f64> {
    let ex = first_moment_purity(ch) - 1.0 / ch.d_out() as f64;
    if ex < 1e-12 {
        return Err(Error::DegenerateChannel(ex));
    }
    let ey = ex + 1.0 / ch.d_out() as f64;
    let var = second_moment_purity(ch)? - ey * ey;
    Ok(var / (ex * ex))
}

/// Monte Carlo estimate of `Var(X) / E[X]^2`, stderr by the delta method.
pub fn variance_ratio_mc(ch: &KrausChannel, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let est = monte_carlo_vec(samples, seed, 4, |rng, out| {
        let x = sample_x(ch, rng);
        out[0] = x;
        out[1] = x * x;
        out[2] = x * x * x;
        out[3] = x * x * x * x;
    });
    let (m1, m2, m3, m4) = (est[0].mean, est[1].mean, est[2].mean, est[3].mean);
    if m1 < 1e-12 {
        return Err(Error::DegenerateChannel(m1));
    }
    let n = samples as f64;
    let ratio = m2 / (m1 * m1) - 1.0;
    let g1 = -2.0 * m2 / (m1 * m1 * m1);
    let g2 = 1.0 / (m1 * m1);
    let var =
        (g1 * g1 * (m2 - m1 * m1) + g2 * g2 * (m4 - m2 * m2) + 2.0 * g1 * g2 * (m3 - m1 * m2)) / n;
    Ok((ratio, var.max(0.0).sqrt()))
}

/// Outcome of checking one inequality or identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Nonnegative exactly when the check passes.
    pub margin: f64,
    pub holds: bool,
}

impl LemmaCheck {
    /// `lhs <= rhs + slack`.
    pub fn le(lemma: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs + slack - lhs;
        Self {
            lemma: lemma.into(),
            lhs,
            rhs,
            margin,
            holds: margin >= 0.0,
        }
    }

    /// `lhs >= rhs - slack`.
    pub fn ge(lemma: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = lhs + slack - rhs;
        Self {
            lemma: lemma.into(),
            lhs,
            rhs,
            margin,
            holds: margin >= 0.0,
        }
    }

    /// `|lhs - rhs| <= tol`.
    pub fn eq(lemma: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = tol - (lhs - rhs).abs();
        Self {
            lemma: lemma.into(),
            lhs,
            rhs,
            margin,
            holds: margin >= 0.0,
        }
    }
}

/// One row of the `F(alpha)` bound table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub class: usize,
    pub permutation: String,
    pub value: f64,
    pub imag: f64,
    pub bound: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Absolute slack allowed in [`verify_f_alpha_bounds`].
pub const BOUND_SLACK: f64 = 1e-8;

/// The 24 permutations of `S_4` grouped into eight bound classes, in 1-based
/// cycle notation.
pub fn bound_classes() -> Vec<(usize, Vec<Permutation>)> {
    let p = |cs: &[&[usize]]| Permutation::from_cycles(4, cs).expect("valid cycles");
    vec![
        (1, vec![p(&[&[1, 3]])]),
        (
            2,
            vec![
                p(&[]),
                p(&[&[1, 3, 2]]),
                p(&[&[1, 4, 3]]),
                p(&[&[1, 3], &[2, 4]]),
            ],
        ),
        (3, vec![p(&[&[1, 2, 3]]), p(&[&[1, 3, 4]])]),
        (4, vec![p(&[&[1, 2, 3, 4]])]),
        (5, vec![p(&[&[2, 4]]), p(&[&[1, 4, 3, 2]])]),
        (6, vec![p(&[&[1, 4, 2]]), p(&[&[2, 4, 3]])]),
        (
            7,
            vec![
                p(&[&[1, 4]]),
                p(&[&[1, 2]]),
                p(&[&[2, 3]]),
                p(&[&[3, 4]]),
                p(&[&[1, 3, 2, 4]]),
                p(&[&[1, 4, 2, 3]]),
                p(&[&[1, 2, 4, 3]]),
                p(&[&[1, 3, 4, 2]]),
            ],
        ),
        (
            8,
            vec![
                p(&[&[1, 2], &[3, 4]]),
                p(&[&[1, 4], &[2, 3]]),
                p(&[&[2, 3, 4]]),
                p(&[&[1, 2, 4]]),
            ],
        ),
    ]
}

/// Upper bound on `F(alpha)` for a class, given `d_in`, `d_out`, `m`, `eta`.
pub fn class_bound(class: usize, d_in: f64, d_out: f64, m: f64, eta: f64) -> f64 {
    let r = d_in / d_out;
    let e2 = eta * eta;
    let m2 = m * m;
    match class {
        1 => (r + e2).powi(2),
        2 | 6 => (r + e2) / d_out + e2 / d_out + 5.0 * e2 * e2,
        3 => (d_in * d_in / d_out + m2) * (r + e2),
        4 => (d_in * d_in / d_out + m2).powi(2),
        5 => r * r + 2.0 * m2 / d_out + 25.0 * e2 * e2,
        7 => r * r + r * e2 + m2 / d_out + 5.0 * m * eta.powi(3),
        8 => d_in.powi(3) / (d_out * d_out) + 2.0 * r * m2 + m2 * e2,
        _ => panic!("no bound class {class}"),
    }
}

/// Checks `Re F(alpha) <= bound + 1e-8` for all 24 permutations.
pub fn verify_f_alpha_bounds(ch: &KrausChannel) -> Result<Vec<BoundCheck>> {
    let (m, e) = (m_norm(ch), eta(ch)?);
    let (di, dout) = (ch.d_in() as f64, ch.d_out() as f64);
    let mut out = Vec::with_capacity(24);
    for (class, perms) in bound_classes() {
        let bound = class_bound(class, di, dout, m, e);
        for alpha in perms {
            let f = f_alpha(ch, &alpha)?;
            let margin = bound + BOUND_SLACK - f.re;
            out.push(BoundCheck {
                class,
                permutation: alpha.to_string(),
                value: f.re,
                imag: f.im,
                bound,
                margin,
                holds: margin >= 0.0,
            });
        }
    }
    Ok(out)
}

/// `M = sum_k A_k (x) conj(A_k)`, a `d_out^2 x d_in^2` matrix.
pub fn natural_representation(ch: &KrausChannel) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(ch.d_out().pow(2), ch.d_in().pow(2));
    for a in ch.kraus() {
        m += &a.kron(&a.conj());
    }
    m
}

/// `||M^dag M - (d_in/d_out) |Psi><Psi|||_1 <= 5 eta^2`.
pub fn verify_m_psi(ch: &KrausChannel) -> Result<LemmaCheck> {
    let m = natural_representation(ch);
    let psi = max_entangled(ch.d_in());
    let r = ch.d_in() as f64 / ch.d_out() as f64;
    let diff = &(&m.adjoint() * &m) - &ComplexMatrix::outer(&psi, &psi).scale_real(r);
    let e = eta(ch)?;
    Ok(LemmaCheck::le(
        "m_psi",
        trace_norm(&diff),
        5.0 * e * e,
        1e-8,
    ))
}

/// Spectral facts about `M^dag M`: eigenvalue sum, top eigenvalue, tail
/// mass, alignment of the top eigenvector with `Psi`, and
/// `<Psi_out| M M^dag |Psi_out> = d_in/d_out`.
pub fn verify_mm_star(ch: &KrausChannel) -> Result<Vec<LemmaCheck>> {
    let m = natural_representation(ch);
    let (di, dout) = (ch.d_in(), ch.d_out());
    let r = di as f64 / dout as f64;
    let e = eta(ch)?;
    let e2 = e * e;
    let mn = m_norm(ch);
    let eig = hermitian_eig(&(&m.adjoint() * &m))?;
    let lam1 = eig.values[0];
    let sum: f64 = eig.values.iter().sum();
    let tail: f64 = eig.values[1..].iter().sum();
    // top eigenvector chosen inside the (possibly degenerate) top eigenspace
    let psi_in = max_entangled(di);
    let top_tol = 1e-9 * lam1.abs().max(1.0);
    let overlap2: f64 = eig
        .values
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v >= lam1 - top_tol)
        .map(|(k, _)| inner(&eig.vector(k), &psi_in).norm_sqr())
        .sum();
    let psi_out = max_entangled(dout);
    let mm = &m * &m.adjoint();
    let expect = mm.quadratic_form(&psi_out).re;
    Ok(vec![
        LemmaCheck::eq("mm_star_sum", sum, r + e2, 1e-8 * (1.0 + sum.abs())),
        LemmaCheck::ge("mm_star_top", lam1, r, 1e-9),
        LemmaCheck::le("mm_star_tail", tail, e2, 1e-9),
        LemmaCheck::le(
            "mm_star_alignment",
            r * r * (1.0 - overlap2.min(1.0)),
            2.0 * mn * mn * e2 / di as f64 + 2.0 * e2 * e2,
            1e-9,
        ),
        LemmaCheck::eq("mm_star_psi", expect, r, 1e-9),
    ])
}
