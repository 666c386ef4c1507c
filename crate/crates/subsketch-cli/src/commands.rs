//! Command implementations. Each returns the process exit code: 0 ok,
//! 2 input error, 3 numeric failure, 4 unsupported combination.

use crate::cli::{
    BuildArgs, BuildMode, ExperimentArgs, ExperimentKind, QueryArgs, StreamAlgo, StreamArgs,
    SvmBuildArgs, SvmQueryArgs,
};
use crate::formats::{self, LoadedSketch, SketchHeader};
use std::fs;
use std::time::Instant;
use subsketch::coreset::{build_additive_with, build_multiplicative_with, CoresetParams};
use subsketch::model::normalize_weights;
use subsketch::scalar::norm2;
use subsketch::stream::region::RegionSketchConfig;
use subsketch::stream::{FourierSketch, MergeReduce, RegionEnsemble, SensitivityStream};
use subsketch::svm::{lift_affine, SvmBuilder};
use subsketch::{experiments, Real, Result, SketchError, WeightedPointSet};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_UNSUPPORTED: i32 = 4;

pub fn exit_code_for(err: &SketchError) -> i32 {
    match err {
        SketchError::Numeric(_) => EXIT_NUMERIC,
        SketchError::Unsupported(_) => EXIT_UNSUPPORTED,
        _ => EXIT_INPUT,
    }
}

/// Parse "3" or "3/2" into a (numerator, denominator) pair.
pub fn parse_p(text: &str) -> Result<(u32, u32)> {
    let parse_u32 = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|_| SketchError::invalid(format!("bad exponent component '{t}'")))
    };
    let (num, den) = match text.split_once('/') {
        Some((a, b)) => (parse_u32(a)?, parse_u32(b)?),
        None => (parse_u32(text)?, 1),
    };
    if den == 0 || num == 0 {
        return Err(SketchError::invalid("exponent must be positive"));
    }
    if (num as Real) / (den as Real) < 1.0 {
        return Err(SketchError::invalid("exponent must be at least 1"));
    }
    Ok((num, den))
}

fn parse_vector(text: &str) -> Result<Vec<Real>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<Real>()
                .map_err(|_| SketchError::invalid(format!("bad coordinate '{t}'")))
        })
        .collect()
}

fn integer_p(p: (u32, u32)) -> Option<u32> {
    if p.1 == 1 {
        Some(p.0)
    } else {
        None
    }
}

pub fn cmd_build(args: &BuildArgs) -> Result<i32> {
    let p = parse_p(&args.p)?;
    let pint = integer_p(p)
        .ok_or_else(|| SketchError::unsupported("coreset build requires integer p"))?;
    let data = formats::read_stream(&args.input, args.weighted, false)?;
    let mut set = data.to_point_set(pint as Real)?;
    if args.affine {
        set = lift_affine(&set);
    }
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let params = CoresetParams::default();
    let sketch = match args.mode {
        BuildMode::Additive => {
            let (normalized, total) = normalize_weights(&set)?;
            println!("weight_total={total}");
            build_additive_with(&normalized, args.eps, &params, &mut rng)?
        }
        BuildMode::Multiplicative => build_multiplicative_with(&set, args.eps, &params, &mut rng)?,
    };
    let elapsed = t0.elapsed().as_secs_f64();
    let header = SketchHeader { dim: set.dim(), p, eps: args.eps, seed: args.seed };
    formats::save_coreset(&args.out, &header, &sketch, args.affine)?;
    println!("rows_in={}", set.len());
    println!("size={}", sketch.len());
    println!("rounds={}", sketch.rounds);
    println!("mode={}", match args.mode {
        BuildMode::Additive => "additive",
        BuildMode::Multiplicative => "multiplicative",
    });
    if let Some(t) = &sketch.transform {
        println!("distortion={:.6}", t.distortion);
    }
    println!("build_seconds={elapsed:.3}");
    for f in &sketch.flags {
        eprintln!("warning: {f}");
    }
    let numeric_failure = sketch
        .transform
        .as_ref()
        .map(|t| t.rank_deficient || !t.certified)
        .unwrap_or(false);
    if numeric_failure {
        eprintln!("numeric failure: rounding did not certify on this input");
        return Ok(EXIT_NUMERIC);
    }
    Ok(EXIT_OK)
}

pub fn cmd_query(args: &QueryArgs) -> Result<i32> {
    let x = parse_vector(&args.x)?;
    let (header, loaded) = formats::load_sketch(&args.sketch)?;
    match loaded {
        LoadedSketch::Coreset { sketch, affine } => {
            let query = if affine {
                let mut y = x.clone();
                y.push(args.b.unwrap_or(0.0));
                y
            } else {
                if args.b.is_some() {
                    return Err(SketchError::unsupported(
                        "--b applies to affine or svm sketches only",
                    ));
                }
                x
            };
            let report = sketch.query(&query)?;
            println!("estimate={}", report.estimate);
            println!("mode={}", if report.multiplicative { "multiplicative" } else { "additive" });
            println!("additive_bound={}", report.additive_bound);
        }
        LoadedSketch::Region { ensemble } => {
            if args.b.is_some() {
                return Err(SketchError::unsupported("--b applies to affine or svm sketches only"));
            }
            let n = norm2(&x);
            if n == 0.0 {
                return Err(SketchError::invalid("zero query direction"));
            }
            let unit: Vec<Real> = x.iter().map(|v| v / n).collect();
            let p = header.p.0 as Real / header.p.1 as Real;
            let v = ensemble.query(&unit)? * n.powf(p);
            println!("estimate={v}");
            println!("mode=additive-mean");
        }
        LoadedSketch::Fourier { sketch } => {
            if x.len() != 2 {
                return Err(SketchError::DimensionMismatch { expected: 2, got: x.len() });
            }
            if args.b.is_some() {
                return Err(SketchError::unsupported("--b applies to affine or svm sketches only"));
            }
            let n = norm2(&x);
            if n == 0.0 {
                return Err(SketchError::invalid("zero query direction"));
            }
            let v = sketch.query_angle(x[1].atan2(x[0])) * n.powf(sketch.p);
            println!("estimate={v}");
            println!("mode=additive");
        }
        LoadedSketch::Svm { .. } => {
            return Err(SketchError::unsupported("use `svm query` for svm sketches"));
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_stream(args: &StreamArgs) -> Result<i32> {
    let p = parse_p(&args.p)?;
    let data = formats::read_stream(&args.input, args.weighted, false)?;
    let p_real = p.0 as Real / p.1 as Real;
    let n_hint = if data.declared_count > 0 { data.declared_count } else { data.len() as u64 };
    let header = SketchHeader { dim: data.dim, p, eps: args.eps, seed: args.seed };
    let t0 = Instant::now();
    match args.algo {
        StreamAlgo::Mr => {
            let pint = integer_p(p)
                .ok_or_else(|| SketchError::invalid("merge-reduce requires integer p"))?;
            let mut mr = MergeReduce::new(data.dim, pint as Real, args.eps, n_hint, args.seed)?;
            for i in 0..data.len() {
                mr.ingest(data.row(i), data.weight(i))?;
            }
            let sketch = mr.finalize()?;
            formats::save_coreset(&args.out, &header, &sketch, false)?;
            println!("rows_seen={}", mr.n_seen());
            println!("size={}", sketch.len());
            println!("block_capacity={}", mr.block_capacity);
            println!("reduce_count={}", mr.reduce_count());
            println!("peak_rows={}", mr.peak_rows());
            println!("transient_peak_rows={}", mr.transient_peak_rows());
        }
        StreamAlgo::Sens => {
            let pint = integer_p(p)
                .ok_or_else(|| SketchError::invalid("sensitivity sampling requires integer p"))?;
            let mut st =
                SensitivityStream::new(data.dim, pint as Real, args.eps, n_hint, args.seed)?;
            for i in 0..data.len() {
                let w = data.weight(i);
                if w == 1.0 {
                    st.ingest(data.row(i))?;
                } else {
                    // fold weights into the row scale
                    let f = w.powf(1.0 / p_real);
                    let row: Vec<Real> = data.row(i).iter().map(|v| f * v).collect();
                    st.ingest(&row)?;
                }
            }
            let sketch = st.finalize()?;
            formats::save_coreset(&args.out, &header, &sketch, false)?;
            println!("rows_seen={}", st.n_seen());
            println!("sampled_rows={}", st.sampled_rows());
            println!("tau_sum={:.4}", st.tau_sum());
            println!("size={}", sketch.len());
            println!("peak_rows={}", st.peak_rows());
        }
        StreamAlgo::Region | StreamAlgo::RegionTight => {
            let pint = integer_p(p)
                .ok_or_else(|| SketchError::invalid("region sketch requires integer p"))?;
            if data.weights.is_some() {
                return Err(SketchError::invalid("region sketch takes unweighted rows"));
            }
            let mut cfg = RegionSketchConfig::new(data.dim, pint, args.eps, args.seed)
                .with_n_hint(data.declared_count);
            if matches!(args.algo, StreamAlgo::RegionTight) {
                cfg = cfg.tight();
            }
            let mut ens = RegionEnsemble::new(cfg, args.replicas)?;
            for i in 0..data.len() {
                ens.ingest(data.row(i))?;
            }
            formats::save_region(&args.out, &header, &ens)?;
            let records: usize = ens.replicas.iter().map(|r| r.records().len()).sum();
            let slots: usize =
                records * ens.replicas[0].update_slot_ops() + 2 * records * data.dim;
            println!("rows_seen={}", ens.replicas[0].n_seen());
            println!("replicas={}", ens.replicas.len());
            println!("regions={records}");
            println!("tensor_slots={slots}");
            println!("update_slot_ops={}", ens.replicas[0].update_slot_ops());
        }
        StreamAlgo::Fourier => {
            if data.dim != 2 {
                return Err(SketchError::invalid("harmonic sketch requires d = 2"));
            }
            let mut sk = FourierSketch::new(p_real, args.eps)?;
            for i in 0..data.len() {
                sk.ingest_point(data.row(i), data.weight(i))?;
            }
            formats::save_fourier(&args.out, &header, &sk)?;
            println!("rows_seen={}", data.len());
            println!("k_max={}", sk.k_max);
            println!("moments={}", sk.moment_count());
        }
    }
    println!("stream_seconds={:.3}", t0.elapsed().as_secs_f64());
    Ok(EXIT_OK)
}

pub fn cmd_svm_build(args: &SvmBuildArgs) -> Result<i32> {
    let data = formats::read_stream(&args.input, args.weighted, true)?;
    let labels = data
        .labels
        .clone()
        .ok_or_else(|| SketchError::invalid("svm build needs labeled input"))?;
    let mut b = SvmBuilder::new(data.dim, args.lambda, args.eps, args.seed)?;
    for i in 0..data.len() {
        b.ingest(data.row(i), labels[i])?;
    }
    let sketch = b.finalize()?;
    let header =
        SketchHeader { dim: data.dim, p: (1, 1), eps: args.eps, seed: args.seed };
    formats::save_svm(&args.out, &header, &sketch)?;
    println!("rows_seen={}", data.len());
    println!("size={}", sketch.len());
    println!("presample={}", sketch.presample_size);
    Ok(EXIT_OK)
}

pub fn cmd_svm_query(args: &SvmQueryArgs) -> Result<i32> {
    let theta = parse_vector(&args.theta)?;
    let (_, loaded) = formats::load_sketch(&args.sketch)?;
    match loaded {
        LoadedSketch::Svm { sketch } => {
            let v = sketch.query(&theta, args.b)?;
            println!("estimate={v}");
            Ok(EXIT_OK)
        }
        _ => Err(SketchError::unsupported("not an svm sketch")),
    }
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let mut csv = String::new();
    match args.kind {
        ExperimentKind::CoresetScaling => {
            let d = args.d.unwrap_or(2);
            let p = args.p.unwrap_or(1);
            let eps_grid = [0.2, 0.1, 0.05, 0.025];
            let seeds: Vec<u64> = (0..args.repeats).map(|i| args.seed + i as u64).collect();
            let rep = experiments::coreset_size_scaling(d, p, &eps_grid, args.n.unwrap_or(20_000), &seeds)?;
            csv.push_str("eps,inv_eps,size,fitted_exponent,expected_exponent\n");
            for (row, &eps) in rep.rows.iter().zip(&eps_grid) {
                csv.push_str(&format!(
                    "{eps},{},{},{:.4},{:.4}\n",
                    row.param, row.value, rep.fitted_slope, rep.expected_slope
                ));
            }
            println!("fitted_exponent={:.4}", rep.fitted_slope);
            println!("expected_exponent={:.4}", rep.expected_slope);
        }
        ExperimentKind::DeltaScaling => {
            let p = args.p.unwrap_or(1);
            let n_grid = [100, 316, 1000, 3162, 10_000];
            let rep = experiments::delta_scaling(p, &n_grid)?;
            csv.push_str("n,delta,fitted_exponent,expected_exponent\n");
            for row in &rep.rows {
                csv.push_str(&format!(
                    "{},{:e},{:.4},{:.4}\n",
                    row.param, row.value, rep.fitted_slope, rep.expected_slope
                ));
            }
            println!("fitted_exponent={:.4}", rep.fitted_slope);
            println!("expected_exponent={:.4}", rep.expected_slope);
        }
        ExperimentKind::Lambda => {
            let d = args.d.unwrap_or(2);
            let p = args.p.unwrap_or(1) as Real;
            let rep = experiments::lambda_report(d, p, 80)?;
            csv.push_str("k,lambda,fitted_decay,expected_decay\n");
            let fitted = rep
                .fitted_slope
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "nan".into());
            for row in &rep.rows {
                csv.push_str(&format!(
                    "{},{:e},{},{:.4}\n",
                    row.k, row.value, fitted, rep.expected_slope
                ));
            }
            if let Some(s) = rep.fitted_slope {
                println!("fitted_decay={s:.4}");
            }
            println!("expected_decay={:.4}", rep.expected_slope);
        }
        ExperimentKind::SvmScaling => {
            let d = args.d.unwrap_or(2);
            let eps_grid = [0.2, 0.1, 0.05, 0.025];
            let seeds: Vec<u64> = (0..args.repeats).map(|i| args.seed + i as u64).collect();
            let rep =
                experiments::svm_size_scaling(d, &eps_grid, args.n.unwrap_or(30_000), &seeds)?;
            csv.push_str("eps,inv_eps,size,fitted_exponent,expected_exponent\n");
            for (row, &eps) in rep.rows.iter().zip(&eps_grid) {
                csv.push_str(&format!(
                    "{eps},{},{},{:.4},{:.4}\n",
                    row.param, row.value, rep.fitted_slope, rep.expected_slope
                ));
            }
            println!("fitted_exponent={:.4}", rep.fitted_slope);
            println!("expected_exponent={:.4}", rep.expected_slope);
        }
    }
    fs::write(&args.out, csv)
        .map_err(|e| SketchError::invalid(format!("cannot write {}: {e}", args.out.display())))?;
    println!("report={}", args.out.display());
    Ok(EXIT_OK)
}

/// One exact-oracle evaluation shared by tooling (kept here so the CLI has a
/// self-contained check path).
pub fn exact_from_stream(data: &formats::StreamData, p: Real, x: &[Real]) -> Result<Real> {
    let set: WeightedPointSet = data.to_point_set(p)?;
    Ok(subsketch::model::exact_lp_power_slice(&set, x))
}
