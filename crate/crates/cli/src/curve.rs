use std::io::Write;

use channelcert::certify::Decision;

use crate::config::{ExperimentConfig, GroundTruth, Mode};
use crate::experiment::{expected_uses, fmt_float, run, RunOptions};
use crate::CliError;

/// One point of a sample-complexity curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub d_in: usize,
    pub d_out: usize,
    pub epsilon: f64,
    pub uses: u64,
    /// `uses` divided by the dimension and epsilon scaling of the mode:
    /// `(d + 1) / eps^2` for unitary, `d_in^2 d_out^1.5 / eps^2` for depolarizing.
    pub normalized_uses: f64,
    pub trials: usize,
    pub detection_rate: f64,
}

pub fn scaling(mode: Mode, d_in: usize, d_out: usize, eps: f64) -> f64 {
    match mode {
        Mode::Unitary => (d_in as f64 + 1.0) / (eps * eps),
        Mode::Depolarizing => (d_in * d_in) as f64 * (d_out as f64).powf(1.5) / (eps * eps),
    }
}

/// Exact use counts and measured detection rates on far instances, one
/// point per (shape, epsilon).
pub fn complexity_curve(
    config: &ExperimentConfig,
    mode: Mode,
) -> Result<Vec<CurvePoint>, CliError> {
    if config.dims.len() < 2 {
        return Err(CliError::Config {
            field: "dims".into(),
            msg: "a curve needs at least two shapes".into(),
        });
    }
    let far = ExperimentConfig {
        ground_truths: vec![GroundTruth::Far],
        ..config.clone()
    };
    let records = run(&far, mode, RunOptions::default())?;
    let mut out = Vec::new();
    for &(d_in, d_out) in &config.dims {
        for &eps in &config.epsilons {
            let rows: Vec<_> = records
                .iter()
                .filter(|r| r.d_in == d_in && r.d_out == d_out && r.epsilon == eps)
                .collect();
            let detected = rows
                .iter()
                .filter(|r| r.verdict == Decision::Alternative)
                .count();
            let uses = expected_uses(config, mode, d_in, d_out, eps)?;
            out.push(CurvePoint {
                d_in,
                d_out,
                epsilon: eps,
                uses,
                normalized_uses: uses as f64 / scaling(mode, d_in, d_out, eps),
                trials: rows.len(),
                detection_rate: detected as f64 / rows.len() as f64,
            });
        }
    }
    Ok(out)
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], w: W) -> Result<(), CliError> {
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    csv.write_record([
        "d_in",
        "d_out",
        "epsilon",
        "uses",
        "normalized_uses",
        "trials",
        "detection_rate",
    ])?;
    for p in points {
        csv.write_record([
            p.d_in.to_string(),
            p.d_out.to_string(),
            fmt_float(p.epsilon),
            p.uses.to_string(),
            fmt_float(p.normalized_uses),
            p.trials.to_string(),
            fmt_float(p.detection_rate),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
