//! The subcommands. Each returns its text outputs; `run` decides where they
//! go.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};

use treedim_core::estimators::{level_measure_with_sizes, EntropyEstimate, MIN_COVERAGE};
use treedim_core::format::{round_sig, sig};
use treedim_core::growth::{
    grow_continuous, grow_discrete, grow_recursive_construction, subtree_sizes, Stop,
};
use treedim_core::leafwalk::{local_dimension_estimate, theta_chain_samples, LeafSampler};
use treedim_core::malthus::{entropy_closed_form, MalthusReport, DEFAULT_TOL};
use treedim_core::oracle::{
    compare_shapes, enumerate_discrete_distribution, grow_uniform_impostor, MAX_VERTICES,
};
use treedim_core::stats::MeanSe;
use treedim_core::{Error, SeedSpec, TimeKind, TreeRealization, WeightFunction};

use crate::args::{
    Common, EntropyArgs, Format, Generator, GrowArgs, LeafwalkArgs, OracleArgs, SolveArgs,
};
use crate::error::{missing, CliError, EXIT_CHECK_FAILED, EXIT_OK};

/// Header of the `entropy` table.
pub const ENTROPY_HEADER: &str = "replica,n,H_n,h_hat,coverage,flag";
/// Header of the `leafwalk` table.
pub const LEAFWALK_HEADER: &str = "replica,path,neg_log_delta_over_n,local_dim";
/// `flag` value of an entropy row left out of the aggregate.
pub const LOW_COVERAGE: &str = "low_coverage";
/// `flag` value of an entropy row whose level was never reached.
pub const EMPTY_LEVEL: &str = "empty_level";

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub main: String,
    pub summary: Option<String>,
    pub exit: u8,
}

impl Output {
    fn main(main: String) -> Self {
        Self {
            main,
            summary: None,
            exit: EXIT_OK,
        }
    }
}

/// JSON number with 12 significant digits; non-finite values become null.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

/// CSV cell with 12 significant digits; non-finite values are left empty.
fn cell(x: f64) -> String {
    if x.is_finite() {
        sig(x)
    } else {
        String::new()
    }
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    text
}

fn weights(common: &Common) -> Result<WeightFunction, CliError> {
    let w = match (common.k, &common.w) {
        (Some(k), Some(w)) => WeightFunction::with_k(k, w.clone())?,
        (None, Some(w)) => WeightFunction::new(w.clone())?,
        (Some(k), None) => WeightFunction::with_k(k, vec![1.0; k])?,
        (None, None) => WeightFunction::new(vec![1.0, 1.0])?,
    };
    Ok(w)
}

fn contraction(common: &Common) -> f64 {
    common.a.unwrap_or((-1f64).exp())
}

fn tolerance(common: &Common) -> f64 {
    common.tol.unwrap_or(DEFAULT_TOL)
}

fn seed(common: &Common) -> Result<u64, CliError> {
    common.seed.ok_or_else(|| missing("seed"))
}

fn replicas(common: &Common) -> Result<usize, CliError> {
    match common.replicas.unwrap_or(1) {
        0 => Err(CliError::Usage("--replicas must be at least 1".into())),
        r => Ok(r),
    }
}

fn positive(value: Option<usize>, flag: &str, default: Option<usize>) -> Result<usize, CliError> {
    match value.or(default) {
        None => Err(missing(flag)),
        Some(0) => Err(CliError::Usage(format!("--{flag} must be at least 1"))),
        Some(v) => Ok(v),
    }
}

fn format_or(common: &Common, default: Format) -> Format {
    common.format.unwrap_or(default)
}

pub fn solve(args: &SolveArgs) -> Result<Output, CliError> {
    let c = &args.common;
    let w = weights(c)?;
    let report = MalthusReport::compute(&w, contraction(c), tolerance(c))?;
    let main = match format_or(c, Format::Json) {
        Format::Json => pretty(&json!({
            "lambda_star": num(report.lambda_star),
            "h": num(report.h),
            "dimension": num(report.dimension),
            "a": num(report.a),
            "residual": num(report.rho_at_root),
            "iterations": report.iterations,
        })),
        Format::Csv => format!(
            "lambda_star,h,dimension,a,residual,iterations\n{},{},{},{},{},{}\n",
            sig(report.lambda_star),
            sig(report.h),
            sig(report.dimension),
            sig(report.a),
            sig(report.rho_at_root),
            report.iterations
        ),
    };
    Ok(Output::main(main))
}

fn tree_summary(tree: &TreeRealization, generator: &str) -> Value {
    json!({
        "generator": generator,
        "size": tree.len(),
        "clock": num(tree.clock()),
        "total_weight": num(tree.total_weight()),
        "max_depth": tree.max_depth(),
        "saturated": tree.is_saturated(),
    })
}

pub fn grow(args: &GrowArgs) -> Result<Output, CliError> {
    let c = &args.common;
    let w = weights(c)?;
    let stream = SeedSpec::new(seed(c)?, 0);
    if c.replicas.is_some_and(|r| r != 1) {
        return Err(CliError::Usage(
            "grow produces a single tree; drop --replicas".into(),
        ));
    }
    if args.discrete && args.recursive {
        return Err(CliError::Usage(
            "--discrete and --recursive are exclusive".into(),
        ));
    }
    let (tree, generator) = match (args.n, args.t) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("give either --n or --t, not both".into()))
        }
        (None, None) => return Err(CliError::Usage("give a stopping rule: --n or --t".into())),
        (Some(n), None) if args.discrete => (grow_discrete(&w, n, stream)?, "discrete"),
        (Some(_), None) if args.recursive => {
            return Err(CliError::Usage(
                "--recursive stops at a time: use --t".into(),
            ))
        }
        (Some(n), None) => (grow_continuous(&w, Stop::Size(n), stream)?, "continuous"),
        (None, Some(_)) if args.discrete => {
            return Err(CliError::Usage(
                "--discrete stops at a size: use --n".into(),
            ))
        }
        (None, Some(t)) if args.recursive => {
            (grow_recursive_construction(&w, t, stream)?, "recursive")
        }
        (None, Some(t)) => (grow_continuous(&w, Stop::Time(t), stream)?, "continuous"),
    };
    let summary = tree_summary(&tree, generator);
    match format_or(c, Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            tree.write_csv(&mut buf).expect("writing to memory");
            Ok(Output {
                main: String::from_utf8(buf).expect("CSV is ASCII"),
                summary: Some(pretty(&summary)),
                exit: EXIT_OK,
            })
        }
        Format::Json => {
            let vertices: Vec<Value> = (0..tree.len())
                .map(|v| {
                    json!({
                        "id": v,
                        "parent_id": tree.parent(v),
                        "child_index": tree.child_index(v),
                        "birth_time": num(tree.birth_time(v)),
                        "degree": tree.degree(v),
                    })
                })
                .collect();
            Ok(Output::main(pretty(
                &json!({ "summary": summary, "vertices": vertices }),
            )))
        }
    }
}

struct EntropyRow {
    replica: usize,
    level: usize,
    estimate: Option<EntropyEstimate>,
    flag: &'static str,
}

pub fn entropy(args: &EntropyArgs) -> Result<Output, CliError> {
    let c = &args.common;
    let w = weights(c)?;
    let levels = args.levels.clone().unwrap_or_else(|| vec![10]);
    if levels.is_empty() {
        return Err(CliError::Usage("--levels needs at least one level".into()));
    }
    if levels.contains(&0) {
        return Err(CliError::Usage(
            "level 0 has no per-level entropy rate (H_n / n is undefined); use levels >= 1".into(),
        ));
    }
    let replicas = replicas(c)?;
    let (size, base) = if args.selftest_uniform {
        (0, c.seed.unwrap_or(0))
    } else {
        (positive(args.size, "size", None)?, seed(c)?)
    };
    let deepest = *levels.iter().max().expect("levels is non-empty");
    let selftest = args.selftest_uniform;

    let per_replica: Vec<Vec<EntropyRow>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let tree = if selftest {
                TreeRealization::complete(w.clone(), deepest)
            } else {
                grow_continuous(&w, Stop::Size(size), SeedSpec::new(base, r as u64))?
            };
            let sizes = subtree_sizes(&tree);
            levels
                .iter()
                .map(|&n| match level_measure_with_sizes(&tree, &sizes, n) {
                    Ok(m) => {
                        let e = EntropyEstimate::from_measure(&m)?;
                        let flag = if selftest || e.is_covered() {
                            ""
                        } else {
                            LOW_COVERAGE
                        };
                        Ok(EntropyRow {
                            replica: r,
                            level: n,
                            estimate: Some(e),
                            flag,
                        })
                    }
                    Err(Error::EmptyLevel(_)) => Ok(EntropyRow {
                        replica: r,
                        level: n,
                        estimate: None,
                        flag: EMPTY_LEVEL,
                    }),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>, Error>>()
        })
        .collect::<Result<_, Error>>()?;
    let rows: Vec<EntropyRow> = per_replica.into_iter().flatten().collect();

    let (reference_label, reference) = if selftest {
        ("uniform", (w.max_children() as f64).ln())
    } else {
        ("closed_form", entropy_closed_form(&w)?)
    };
    let aggregates: Vec<(usize, MeanSe, MeanSe, MeanSe)> = levels
        .iter()
        .map(|&n| {
            let used: Vec<&EntropyEstimate> = rows
                .iter()
                .filter(|row| row.level == n && row.flag.is_empty())
                .filter_map(|row| row.estimate.as_ref())
                .collect();
            let pick = |f: fn(&EntropyEstimate) -> f64| {
                MeanSe::from_slice(&used.iter().map(|e| f(e)).collect::<Vec<_>>())
            };
            (
                n,
                pick(|e| e.entropy),
                pick(|e| e.h_hat),
                pick(|e| e.coverage),
            )
        })
        .collect();

    let main = match format_or(c, Format::Csv) {
        Format::Csv => {
            let mut out = String::new();
            writeln!(out, "{ENTROPY_HEADER}").unwrap();
            for row in &rows {
                match &row.estimate {
                    Some(e) => writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        row.replica,
                        row.level,
                        sig(e.entropy),
                        sig(e.h_hat),
                        sig(e.coverage),
                        row.flag
                    ),
                    None => writeln!(out, "{},{},,,0,{}", row.replica, row.level, row.flag),
                }
                .unwrap();
            }
            for (n, entropy, h_hat, coverage) in &aggregates {
                writeln!(
                    out,
                    "mean,{n},{},{},{},",
                    cell(entropy.mean),
                    cell(h_hat.mean),
                    cell(coverage.mean)
                )
                .unwrap();
                writeln!(
                    out,
                    "se,{n},{},{},{},",
                    cell(entropy.se),
                    cell(h_hat.se),
                    cell(coverage.se)
                )
                .unwrap();
                writeln!(
                    out,
                    "{reference_label},{n},{},{},,",
                    sig(*n as f64 * reference),
                    sig(reference)
                )
                .unwrap();
            }
            out
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let e = row.estimate.as_ref();
                    json!({
                        "replica": row.replica,
                        "n": row.level,
                        "H_n": e.map(|e| num(e.entropy)),
                        "h_hat": e.map(|e| num(e.h_hat)),
                        "coverage": num(e.map_or(0.0, |e| e.coverage)),
                        "flag": if row.flag.is_empty() { Value::Null } else { json!(row.flag) },
                    })
                })
                .collect();
            let aggregate: Vec<Value> = aggregates
                .iter()
                .map(|(n, entropy, h_hat, coverage)| {
                    json!({
                        "n": n,
                        "count": h_hat.count,
                        "H_n_mean": num(entropy.mean),
                        "h_hat_mean": num(h_hat.mean),
                        "h_hat_se": num(h_hat.se),
                        "coverage_mean": num(coverage.mean),
                        reference_label: num(reference),
                    })
                })
                .collect();
            pretty(&json!({ "rows": rows, "aggregate": aggregate }))
        }
    };
    Ok(Output::main(main))
}

struct WalkResult {
    neg_log: Vec<f64>,
    local_dim: Vec<f64>,
    /// `theta[k][path]`; empty for trees without birth times.
    theta: Vec<Vec<f64>>,
    dead_ends: usize,
}

/// Mean over every value of every replica. With several replicas the
/// standard error is that of the replica means, since values drawn on the
/// same tree are dependent.
fn grand_mean<'a>(per_replica: impl Iterator<Item = &'a [f64]> + Clone) -> MeanSe {
    let pooled: Vec<f64> = per_replica.clone().flatten().copied().collect();
    let pooled = MeanSe::from_slice(&pooled);
    let means: Vec<f64> = per_replica.map(|xs| MeanSe::from_slice(xs).mean).collect();
    if means.len() > 1 {
        MeanSe {
            se: MeanSe::from_slice(&means).se,
            ..pooled
        }
    } else {
        pooled
    }
}

pub fn leafwalk(args: &LeafwalkArgs) -> Result<Output, CliError> {
    let c = &args.common;
    let w = weights(c)?;
    let a = contraction(c);
    let level = positive(args.level, "level", Some(10))?;
    let paths = positive(args.paths, "paths", Some(1000))?;
    let replicas = replicas(c)?;
    let selftest = args.selftest_chain;
    let (size, base) = if selftest {
        (0, c.seed.unwrap_or(0))
    } else {
        (positive(args.size, "size", None)?, seed(c)?)
    };
    let report = MalthusReport::compute(&w, a, tolerance(c))?;
    let lambda = report.lambda_star;

    let results: Vec<WalkResult> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<WalkResult, CliError> {
            let stream = SeedSpec::new(base, r as u64);
            let tree = if selftest {
                TreeRealization::chain(w.clone(), level)
            } else {
                grow_continuous(&w, Stop::Size(size), stream)?
            };
            let sampler = LeafSampler::new(&tree);
            let mut rng = stream.derive(1).rng();
            let continuous = tree.time_kind() == TimeKind::Continuous;
            let mut out = WalkResult {
                neg_log: Vec::with_capacity(paths),
                local_dim: Vec::with_capacity(paths),
                theta: if continuous {
                    vec![Vec::with_capacity(paths); level + 1]
                } else {
                    Vec::new()
                },
                dead_ends: 0,
            };
            let allowed = (paths as f64 * (1.0 - MIN_COVERAGE)).ceil() as usize;
            let (walks, dead_ends) = sampler
                .sample_reaching(level, paths, allowed, &mut rng)
                .map_err(|e| match e {
                    Error::InsufficientGrowth { .. } => CliError::InsufficientGrowth(e),
                    e => e.into(),
                })?;
            out.dead_ends = dead_ends;
            for path in &walks {
                out.neg_log.push(path.neg_log_weight_per_level());
                out.local_dim
                    .push(local_dimension_estimate(&tree, path, a)?);
                if continuous {
                    for (k, x) in theta_chain_samples(&tree, lambda, path)?
                        .into_iter()
                        .enumerate()
                    {
                        out.theta[k].push(x);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;

    let ergodic = grand_mean(results.iter().map(|r| r.neg_log.as_slice()));
    let local = grand_mean(results.iter().map(|r| r.local_dim.as_slice()));
    let theta: Vec<Value> = (0..results.first().map_or(0, |r| r.theta.len()))
        .map(|k| {
            let m = grand_mean(results.iter().map(|r| r.theta[k].as_slice()));
            json!({ "k": k, "mean": num(m.mean), "se": num(m.se) })
        })
        .collect();
    let summary = json!({
        "level": level,
        "a": num(a),
        "size": if selftest { Value::Null } else { json!(size) },
        "replicas": replicas,
        "paths": paths,
        "dead_ends": results.iter().map(|r| r.dead_ends).sum::<usize>(),
        "ergodic": { "mean": num(ergodic.mean), "se": num(ergodic.se), "count": ergodic.count },
        "local_dimension": { "mean": num(local.mean), "se": num(local.se), "count": local.count },
        "closed_form": { "h": num(report.h), "dimension": num(report.dimension) },
        "theta_chain": theta,
    });

    match format_or(c, Format::Csv) {
        Format::Csv => {
            let mut out = String::new();
            writeln!(out, "{LEAFWALK_HEADER}").unwrap();
            for (r, result) in results.iter().enumerate() {
                for (p, (x, d)) in result.neg_log.iter().zip(&result.local_dim).enumerate() {
                    writeln!(out, "{r},{p},{},{}", sig(*x), sig(*d)).unwrap();
                }
            }
            Ok(Output {
                main: out,
                summary: Some(pretty(&summary)),
                exit: EXIT_OK,
            })
        }
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .enumerate()
                .flat_map(|(r, result)| {
                    result
                        .neg_log
                        .iter()
                        .zip(&result.local_dim)
                        .enumerate()
                        .map(move |(p, (x, d))| {
                            json!({ "replica": r, "path": p, "neg_log_delta_over_n": num(*x), "local_dim": num(*d) })
                        })
                })
                .collect();
            Ok(Output::main(pretty(
                &json!({ "summary": summary, "rows": rows }),
            )))
        }
    }
}

pub fn oracle_check(args: &OracleArgs) -> Result<Output, CliError> {
    let c = &args.common;
    let w = weights(c)?;
    let n = positive(args.n, "n", Some(5))?;
    if n > MAX_VERTICES {
        return Err(CliError::Usage(format!(
            "exact enumeration is limited to {MAX_VERTICES} vertices (got --n {n})"
        )));
    }
    let samples = positive(args.samples, "samples", Some(100_000))?;
    let threshold = args.threshold.unwrap_or(1e-3);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage("--threshold must lie in [0, 1]".into()));
    }
    let base = seed(c)?;
    let generator = if args.negative_control {
        None
    } else {
        Some(args.generator.unwrap_or(Generator::Discrete))
    };
    let generator_name = match generator {
        None => "uniform_impostor",
        Some(Generator::Discrete) => "discrete",
        Some(Generator::Continuous) => "continuous",
    };

    let dist = enumerate_discrete_distribution(&w, n)?;
    let shapes: Vec<Vec<u32>> = (0..samples)
        .into_par_iter()
        .map(|r| {
            let stream = SeedSpec::new(base, r as u64);
            let tree = match generator {
                None => grow_uniform_impostor(&w, n, stream)?,
                Some(Generator::Continuous) => grow_continuous(&w, Stop::Size(n), stream)?,
                Some(Generator::Discrete) => grow_discrete(&w, n, stream)?,
            };
            Ok(tree.shape_encoding())
        })
        .collect::<Result<_, Error>>()?;
    let test = compare_shapes(&dist, shapes.iter().map(Vec::as_slice))?;
    let pass = test.p_value >= threshold;
    let main = match format_or(c, Format::Json) {
        Format::Json => pretty(&json!({
            "chi2": num(test.statistic),
            "p_value": num(test.p_value),
            "cells": test.cells,
            "dof": test.dof,
            "shapes": dist.len(),
            "n": n,
            "samples": samples,
            "generator": generator_name,
            "threshold": num(threshold),
            "pass": pass,
        })),
        Format::Csv => format!(
            "chi2,p_value,cells,dof,shapes,n,samples,generator,threshold,pass\n{},{},{},{},{},{n},{samples},{generator_name},{},{pass}\n",
            cell(test.statistic),
            sig(test.p_value),
            test.cells,
            test.dof,
            dist.len(),
            sig(threshold)
        ),
    };
    Ok(Output {
        main,
        summary: None,
        exit: if pass { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}
