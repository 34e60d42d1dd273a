//! The five pipelines. Each returns the process exit code on success.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use semigap_core::constants::{
    bound_thm_grand, bounds_for_exponent, c_recursion, dominance_table, CRecord, MAX_DEPTH,
};
use semigap_core::format::sig17;
use semigap_core::semigroup::{decay_curve, late_time_rate, quantity_curve};
use semigap_core::verify::check_envelope;
use semigap_core::{
    decompose, poincare_constant, run_suite, DecayBound, GeneratorRep, Quantity,
    SpectralDecomposition,
};

use crate::config::{RunConfig, SweepAxis};
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_PASS};
use crate::output::{sorted_json, write_atomic};

struct Backend {
    generator: GeneratorRep,
    spectral: SpectralDecomposition,
    c_p: f64,
}

fn load(cfg: &RunConfig, base: &Path) -> Result<Backend, CliError> {
    let generator = cfg.backend.build(base)?;
    let spectral = decompose(&generator)?;
    let c_p = poincare_constant(&spectral)?;
    Ok(Backend {
        generator,
        spectral,
        c_p,
    })
}

fn slack(cfg: &RunConfig, g: &GeneratorRep) -> f64 {
    cfg.suite().slack_for(g)
}

/// `rates.csv` and the line `gap=<λ_1> C_P=<1/λ_1>`.
pub fn gap(cfg: &RunConfig, base: &Path) -> Result<u8, CliError> {
    let b = load(cfg, base)?;
    write_atomic(&cfg.out, "rates.csv", &b.spectral.rates_csv())?;
    println!(
        "gap={} C_P={}",
        sig17(b.spectral.spectral_gap()),
        sig17(b.c_p)
    );
    Ok(EXIT_PASS)
}

/// Exponent of the deepest recursion level needed for the largest `p`.
fn recursion_depth(ps: &[f64]) -> u32 {
    let top = ps.iter().fold(2.0f64, |m, p| m.max(*p));
    (top.log2().ceil() as u32).clamp(1, MAX_DEPTH)
}

#[derive(Serialize)]
struct RecursionDocument {
    #[serde(rename = "C_P")]
    c_p: f64,
    records: Vec<CRecord>,
}

/// `bounds.json`, `dominance.json` and `c_recursion.json`.
pub fn bounds(cfg: &RunConfig, base: &Path) -> Result<u8, CliError> {
    let b = load(cfg, base)?;
    let mut all: Vec<DecayBound> = Vec::new();
    for &p in &cfg.p {
        all.extend(bounds_for_exponent(p, b.c_p)?);
    }
    all.extend(cfg.custom_bounds.iter().copied());
    let dominance = dominance_table(&all);
    let table = c_recursion(b.c_p, recursion_depth(&cfg.p))?;
    write_atomic(&cfg.out, "bounds.json", &sorted_json(&all)?)?;
    write_atomic(&cfg.out, "dominance.json", &sorted_json(&dominance)?)?;
    let doc = RecursionDocument {
        c_p: b.c_p,
        records: table.records(),
    };
    write_atomic(&cfg.out, "c_recursion.json", &sorted_json(&doc)?)?;
    for bound in &all {
        println!(
            "p={} lambda={} K={} source={}",
            sig17(bound.p),
            sig17(bound.lambda),
            sig17(bound.k),
            bound.source.as_str()
        );
    }
    Ok(EXIT_PASS)
}

/// `curves.csv`: `N_p` for every configured `p`, `Var` and `log N_2` along
/// the flow of every family member.
pub fn evolve(cfg: &RunConfig, base: &Path) -> Result<u8, CliError> {
    let b = load(cfg, base)?;
    let times = cfg.times.grid(b.spectral.spectral_gap())?;
    let members = cfg.family().generate(&b.spectral)?;
    let mut out = String::from("t,value,quantity,p,f_id\n");
    for m in &members {
        for &p in &cfg.p {
            decay_curve(&b.spectral, &m.f, p, &times, &m.id)?.append_csv_rows(&mut out);
        }
        for q in [Quantity::Variance, Quantity::LogNorm2] {
            quantity_curve(&b.spectral, &m.f, q, 2.0, &times, &m.id)?.append_csv_rows(&mut out);
        }
    }
    write_atomic(&cfg.out, "curves.csv", &out)?;
    println!("members={} times={}", members.len(), times.len());
    Ok(EXIT_PASS)
}

/// `report.json` and `report.csv`; exit 1 if any check failed.
pub fn verify(cfg: &RunConfig, base: &Path) -> Result<u8, CliError> {
    let b = load(cfg, base)?;
    let report = run_suite(
        &b.generator,
        &b.spectral,
        cfg.backend.descriptor(),
        &cfg.suite(),
    )?
    .with_timestamp(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    write_atomic(&cfg.out, "report.json", &report.to_json())?;
    write_atomic(&cfg.out, "report.csv", &report.to_csv())?;
    let failed: Vec<_> = report.failures().collect();
    for c in &failed {
        eprintln!(
            "FAILED {} worst_ratio={} witness={}",
            c.name,
            sig17(c.worst_ratio),
            c.witness
        );
    }
    let inapplicable = report
        .checks
        .iter()
        .filter(|c| c.status == semigap_core::CheckStatus::Inapplicable)
        .count();
    println!(
        "checks={} passed={} failed={} inapplicable={}",
        report.checks.len(),
        report.checks.len() - failed.len() - inapplicable,
        failed.len(),
        inapplicable
    );
    Ok(if failed.is_empty() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub p: f64,
    /// Smallest late-time decay rate of `N_p` over the family.
    pub lambda_observed: f64,
    pub lambda_bound: f64,
    pub k_bound: f64,
    /// Worst envelope ratio of the bound over the family.
    pub worst_ratio: f64,
    pub c_p: f64,
    pub passed: bool,
}

fn sweep_point(cfg: &RunConfig, b: &Backend, axis: f64, p: f64) -> Result<SweepRow, CliError> {
    let times = cfg.times.grid(b.spectral.spectral_gap())?;
    let members = cfg.family().generate(&b.spectral)?;
    let bound = bound_thm_grand(p, b.c_p)?;
    let env = check_envelope(
        &b.spectral,
        &bound,
        &members,
        &times,
        slack(cfg, &b.generator),
    )?;
    let t_b = *times.last().expect("time grid is non-empty");
    let t_a = times
        .iter()
        .copied()
        .find(|t| *t >= 0.5 * t_b && *t < t_b)
        .unwrap_or(0.0);
    let mut observed = f64::INFINITY;
    for m in &members {
        if let Some(r) = late_time_rate(&b.spectral, &m.f, p, t_a, t_b)? {
            observed = observed.min(r);
        }
    }
    Ok(SweepRow {
        axis,
        p,
        lambda_observed: if observed.is_finite() {
            observed
        } else {
            f64::NAN
        },
        lambda_bound: bound.lambda,
        k_bound: bound.k,
        worst_ratio: env.worst_ratio,
        c_p: b.c_p,
        passed: env.acceptable(),
    })
}

pub fn sweep_rows(cfg: &RunConfig, base: &Path) -> Result<Vec<SweepRow>, CliError> {
    let values = &cfg.sweep.values;
    if values.is_empty() {
        return Err(CliError::Usage("sweep axis is empty".into()));
    }
    let mut rows = Vec::new();
    match cfg.sweep.axis {
        SweepAxis::N => {
            for &v in values {
                if !(v >= 3.0 && v.fract() == 0.0) {
                    return Err(CliError::Usage(format!(
                        "grid sizes must be integers >= 3, got {v}"
                    )));
                }
            }
            for &v in values {
                let mut point = cfg.clone();
                point.backend = cfg.backend.with_n(v as usize)?;
                let b = load(&point, base)?;
                for &p in &cfg.p {
                    rows.push(sweep_point(&point, &b, v, p)?);
                }
            }
        }
        SweepAxis::P => {
            if let Some(v) = values.iter().find(|v| !(**v > 1.0 && v.is_finite())) {
                return Err(CliError::Usage(format!("every p must be > 1, got {v}")));
            }
            let b = load(cfg, base)?;
            for &p in values {
                rows.push(sweep_point(cfg, &b, p, p)?);
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,p,lambda_observed,lambda_bound,K_bound,worst_ratio,C_P\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sig17(r.axis),
            sig17(r.p),
            sig17(r.lambda_observed),
            sig17(r.lambda_bound),
            sig17(r.k_bound),
            sig17(r.worst_ratio),
            sig17(r.c_p)
        );
    }
    out
}

/// `sweep.csv`; exit 1 if any envelope failed.
pub fn sweep(cfg: &RunConfig, base: &Path) -> Result<u8, CliError> {
    let rows = sweep_rows(cfg, base)?;
    write_atomic(&cfg.out, "sweep.csv", &sweep_csv(&rows))?;
    println!("rows={}", rows.len());
    Ok(if rows.iter().all(|r| r.passed) {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_covers_largest_exponent() {
        assert_eq!(recursion_depth(&[2.0, 3.0]), 2);
        assert_eq!(recursion_depth(&[16.0]), 4);
        assert_eq!(recursion_depth(&[1.5]), 1);
        assert_eq!(recursion_depth(&[17.0]), 5);
    }
}
