use std::path::Path;

use channelcert::channel::{
    average_fidelity, average_fidelity_mc, choi_distance, diamond_bounds, entanglement_fidelity,
    eta_choi, eta_kraus, trace_distance_lb, ChannelJson, LocalSearch,
};
use channelcert::linalg::SchattenP;
use channelcert::random::{
    epsilon_far_unitary_channel, gaussian_perturbed_depolarizing, random_channel, GAUSSIAN_EPS_MAX,
};
use channelcert::weingarten::{
    expected_x, lemma1_closed_form, variance_ratio_exact, verify_f_alpha_bounds, verify_m_psi,
    verify_mm_star, weingarten_matrix, BoundCheck, LemmaCheck, F_ALPHA_GUARD,
};
use channelcert::{Error, KrausChannel, RngStream};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Variance ratio bound asserted by the sweep.
pub const VARIANCE_RATIO_MAX: f64 = 105.0;

/// Monte Carlo samples for the average-fidelity comparison.
const FIDELITY_SAMPLES: usize = 20_000;

/// Epsilon of the unitary-mixture family included in the sweep.
const UNITARY_FAMILY_EPS: f64 = 0.5;

/// One JSON line of the report.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportLine {
    Lemma {
        source: String,
        d_in: usize,
        d_out: usize,
        #[serde(flatten)]
        check: LemmaCheck,
    },
    Bound {
        source: String,
        d_in: usize,
        d_out: usize,
        #[serde(flatten)]
        check: BoundCheck,
    },
    /// A channel file that failed validation.
    Cptp {
        source: String,
        holds: bool,
        residual: Option<f64>,
        message: String,
    },
    /// A check not run, with the reason.
    Skipped {
        source: String,
        lemma: String,
        reason: String,
    },
}

impl ReportLine {
    pub fn holds(&self) -> bool {
        match self {
            ReportLine::Lemma { check, .. } => check.holds,
            ReportLine::Bound { check, .. } => check.holds,
            ReportLine::Cptp { holds, .. } => *holds,
            ReportLine::Skipped { .. } => true,
        }
    }
}

fn lemma(source: &str, ch_dims: (usize, usize), check: LemmaCheck) -> ReportLine {
    ReportLine::Lemma {
        source: source.to_string(),
        d_in: ch_dims.0,
        d_out: ch_dims.1,
        check,
    }
}

/// Weingarten anchors for `d` in 3..=8 and the sum identity for orders 1..=4.
pub fn weingarten_checks() -> Result<Vec<ReportLine>, Error> {
    let mut out = Vec::new();
    let rel = |name: &str, got: f64, want: f64, tol: f64| {
        LemmaCheck::eq(name, got, want, tol * want.abs())
    };
    for d in 3..=8usize {
        let df = d as f64;
        let w2 = weingarten_matrix(2, d)?;
        let w3 = weingarten_matrix(3, d)?;
        let q3 = df * (df * df - 1.0) * (df * df - 4.0);
        let cases = [
            (
                "wg_1",
                weingarten_matrix(1, d)?.by_cycle_type(&[1]),
                1.0 / df,
            ),
            ("wg_11", w2.by_cycle_type(&[1, 1]), 1.0 / (df * df - 1.0)),
            (
                "wg_2",
                w2.by_cycle_type(&[2]),
                -1.0 / (df * (df * df - 1.0)),
            ),
            ("wg_111", w3.by_cycle_type(&[1, 1, 1]), (df * df - 2.0) / q3),
            (
                "wg_21",
                w3.by_cycle_type(&[2, 1]),
                -1.0 / ((df * df - 1.0) * (df * df - 4.0)),
            ),
            ("wg_3", w3.by_cycle_type(&[3]), 2.0 / q3),
        ];
        for (name, got, want) in cases {
            out.push(lemma(
                "weingarten",
                (d, d),
                rel(name, got.unwrap_or(f64::NAN), want, 1e-12),
            ));
        }
    }
    for n in 1..=4usize {
        for d in n.max(2)..=8usize {
            let want = 1.0 / (0..n).map(|k| (d + k) as f64).product::<f64>();
            out.push(lemma(
                "weingarten",
                (d, d),
                rel(
                    &format!("wg_sum_{n}"),
                    weingarten_matrix(n, d)?.sum(),
                    want,
                    1e-10,
                ),
            ));
        }
    }
    Ok(out)
}

/// All per-channel checks. `rng` drives the local searches and `mc_seed`
/// the Monte Carlo estimate.
pub fn channel_checks(
    source: &str,
    ch: &KrausChannel,
    rng: &mut RngStream,
    mc_seed: u64,
) -> Result<Vec<ReportLine>, Error> {
    let dims = (ch.d_in(), ch.d_out());
    let (d_in, d_out) = dims;
    let mut out = Vec::new();
    let dep = KrausChannel::depolarizing(d_in, d_out);

    let (ek, ec) = (eta_kraus(ch), eta_choi(ch));
    out.push(lemma(
        source,
        dims,
        LemmaCheck::eq("eta_identity", ek * ek, ec * ec, 1e-8 * (1.0 + ec * ec)),
    ));

    let ex = expected_x(ch)?;
    out.push(lemma(
        source,
        dims,
        LemmaCheck::eq("lemma1", lemma1_closed_form(ch), ex, 1e-10 * (1.0 + ex)),
    ));

    // diamond distance from depolarizing against the Choi 1- and 2-norms
    let b = diamond_bounds(ch, &dep, &LocalSearch::default(), &[], rng)?;
    let j2 = choi_distance(ch, &dep, SchattenP::Two)?;
    out.push(lemma(
        source,
        dims,
        LemmaCheck::le("choi_norm_order", j2, b.choi_lower, 1e-12),
    ));
    let scale2 = d_in as f64 * (d_out as f64).sqrt();
    out.push(lemma(
        source,
        dims,
        LemmaCheck::ge("diamond_two_choi", scale2 * j2, b.lower, 1e-9),
    ));
    out.push(lemma(
        source,
        dims,
        LemmaCheck::ge(
            "diamond_one_choi",
            d_in as f64 * b.choi_lower,
            b.lower,
            1e-9,
        ),
    ));
    out.push(lemma(
        source,
        dims,
        LemmaCheck::le("diamond_interval", b.lower, b.upper, 1e-9),
    ));

    if d_in == d_out {
        let d = d_in as f64;
        let exact = average_fidelity(ch)?;
        let mc = average_fidelity_mc(ch, FIDELITY_SAMPLES, mc_seed)?;
        out.push(lemma(
            source,
            dims,
            LemmaCheck::le(
                "fid_ent_avg",
                (mc.mean - exact).abs(),
                4.0 * mc.stderr,
                1e-12,
            ),
        ));
        let id = KrausChannel::identity(d_in);
        let lb = trace_distance_lb(ch, &id, &LocalSearch::default(), &[], rng)?.value;
        let fe = entanglement_fidelity(ch)?;
        out.push(lemma(
            source,
            dims,
            LemmaCheck::le("fid_diamond", fe, 1.0 - lb * lb / (4.0 * d), 1e-9),
        ));
    }

    out.push(lemma(source, dims, verify_m_psi(ch)?));
    out.extend(
        verify_mm_star(ch)?
            .into_iter()
            .map(|c| lemma(source, dims, c)),
    );

    let k = ch.num_kraus();
    if k.pow(4) * d_in * d_in > F_ALPHA_GUARD {
        out.push(ReportLine::Skipped {
            source: source.to_string(),
            lemma: "f_alpha_bounds".into(),
            reason: format!(
                "K^4 d_in^2 = {} exceeds {F_ALPHA_GUARD}",
                k.pow(4) * d_in * d_in
            ),
        });
        return Ok(out);
    }
    out.extend(
        verify_f_alpha_bounds(ch)?
            .into_iter()
            .map(|check| ReportLine::Bound {
                source: source.to_string(),
                d_in,
                d_out,
                check,
            }),
    );
    match variance_ratio_exact(ch) {
        Ok(r) => out.push(lemma(
            source,
            dims,
            LemmaCheck::le("variance_ratio", r, VARIANCE_RATIO_MAX, 0.0),
        )),
        Err(Error::DegenerateChannel(e)) => out.push(ReportLine::Skipped {
            source: source.to_string(),
            lemma: "variance_ratio".into(),
            reason: format!("E[X] = {e:.3e}"),
        }),
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Loads a channel file; validation failures become a failed `cptp` line.
pub fn load_channel(path: &Path) -> Result<Result<KrausChannel, ReportLine>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let json: ChannelJson = serde_json::from_str(&text)?;
    let source = path.display().to_string();
    Ok(KrausChannel::try_from(json).map_err(|e| {
        let residual = match &e {
            Error::NotCptp { residual, .. } => Some(*residual),
            _ => None,
        };
        ReportLine::Cptp {
            source,
            holds: false,
            residual,
            message: e.to_string(),
        }
    }))
}

/// Full sweep: Weingarten anchors, then for each configured shape `trials`
/// random channels plus the adversarial families, then channel files.
pub fn verify_lemmas(config: &ExperimentConfig) -> Result<Vec<ReportLine>, CliError> {
    config.validate_common()?;
    let seed = config.resolved_seed()?;
    let mut out = weingarten_checks()?;
    for (si, &(d_in, d_out)) in config.dims.iter().enumerate() {
        for t in 0..config.trials {
            let mut rng = RngStream::new(seed, (si * config.trials + t) as u64);
            let rank = 1 + t % (d_in * d_out);
            let ch = random_channel(d_in, d_out, rank.max(d_in.div_ceil(d_out)), &mut rng)?;
            let mc_seed = seed.wrapping_add(rng.stream_id());
            out.extend(channel_checks(
                &format!("random/{d_in}x{d_out}/{t}"),
                &ch,
                &mut rng,
                mc_seed,
            )?);
        }
        let mut rng = RngStream::with_lane(seed, si as u64, 1);
        if d_in == d_out && d_in >= 2 {
            let adv = epsilon_far_unitary_channel(d_in, UNITARY_FAMILY_EPS, &mut rng)?;
            out.extend(channel_checks(
                &format!("unitary_mixture/{d_in}x{d_out}"),
                &adv.channel,
                &mut rng,
                seed,
            )?);
        }
        if d_out >= 2 {
            let adv =
                gaussian_perturbed_depolarizing(d_in, d_out, GAUSSIAN_EPS_MAX, &mut rng, 1000)?;
            let source = format!("gaussian_depolarizing/{d_in}x{d_out}");
            out.extend(channel_checks(&source, &adv.channel, &mut rng, seed)?);
        }
    }
    for (fi, path) in config.channel_files.iter().enumerate() {
        match load_channel(path)? {
            Ok(ch) => {
                let mut rng = RngStream::with_lane(seed, fi as u64, 2);
                out.extend(channel_checks(
                    &path.display().to_string(),
                    &ch,
                    &mut rng,
                    seed,
                )?);
            }
            Err(line) => out.push(line),
        }
    }
    Ok(out)
}
