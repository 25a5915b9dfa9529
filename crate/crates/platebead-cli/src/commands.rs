//! Implementations of the five subcommands.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use platebead_core::constraints::{compliance, ConstraintParams};
use platebead_core::grid::Grid;
use platebead_core::io::{read_bpat, read_pgm, write_bpat, write_frf_csv, write_pgm};
use platebead_core::level::level_from_field;
use platebead_core::pattern::PatternSpace;
use platebead_core::types::{BeadingPattern, FrequencyResponse, PlateConfig};
use platebead_fem::{build_system, frequency_grid, solve_frf};
use platebead_opt::baselines::{
    best_so_far_csv, genetic_search, random_search, rotation_criterion_design, run_comparison,
    surrogate_objective, Candidate, MethodPool,
};
use platebead_opt::dataset::{generate, Dataset, DatasetFlavor, GenOptions};
use platebead_opt::flow::{dump_trace, guided_sample, train_flow, FlowModel, FlowTrainConfig, GuidanceConfig};
use platebead_opt::surrogate::{train_surrogate, SurrogateModel, TrainConfig};
use platebead_opt::{NfeCounter, ObjectiveSpec};

use crate::manifest::Outcome;
use crate::{
    ConfigArg, FlavorArg, GenDatasetArgs, MethodArg, ModelArg, ObjectiveArg, OptimizeArgs,
    ReportArgs, TrainArgs, ValidateArgs,
};

fn plate_for(config: ConfigArg) -> PlateConfig {
    match config {
        ConfigArg::Free => PlateConfig::free_rotation(),
        ConfigArg::Clamped => PlateConfig::clamped(),
    }
}

/// `n` equidistant frequencies spanning [f1, f2] inclusive.
fn band_frequencies(f1: f64, f2: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && f2 > f1);
    (0..n).map(|i| f1 + i as f64 * (f2 - f1) / (n - 1) as f64).collect()
}

pub fn gen_dataset(args: &GenDatasetArgs, out: &mut Outcome) -> anyhow::Result<()> {
    let flavor = match args.flavor {
        FlavorArg::Surrogate => DatasetFlavor::Surrogate,
        FlavorArg::Flow => DatasetFlavor::Flow,
    };
    let count = args.count.unwrap_or(match flavor {
        DatasetFlavor::Surrogate => 512,
        DatasetFlavor::Flow => 4096,
    });
    let base = if args.test_scale {
        GenOptions::test_scale(flavor, count, args.seed)
    } else {
        GenOptions::desk(flavor, count, args.seed)
    };
    let opts = GenOptions { n_freqs: args.freqs, fmin: args.fmin, fmax: args.fmax, ..base };
    let plate = PlateConfig::free_rotation();

    let start = Instant::now();
    let (ds, report) = generate(&plate, &opts)?;
    out.timing("generate", start.elapsed().as_secs_f64());
    for (id, why) in &report.skipped {
        eprintln!("sample {id} skipped: {why}");
    }
    ds.save(&args.out)?;
    for entry in std::fs::read_dir(&args.out)? {
        out.artifact(&entry?.path());
    }
    println!(
        "wrote {} samples ({} skipped) to {}",
        ds.samples.len(),
        report.skipped.len(),
        args.out.display()
    );
    Ok(())
}

fn write_loss_csv(path: &Path, curve: &[f64]) -> anyhow::Result<()> {
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        csv.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, csv)?;
    Ok(())
}

pub fn train(args: &TrainArgs, out: &mut Outcome) -> anyhow::Result<()> {
    let ds = Dataset::load(&args.data).context("loading dataset")?;
    std::fs::create_dir_all(&args.out)?;
    let start = Instant::now();
    let (ckpt_path, curve) = match args.model {
        ModelArg::Surrogate => {
            let cfg = TrainConfig {
                epochs: args.epochs.unwrap_or(40),
                lr: args.lr,
                batch: args.batch.unwrap_or(4),
                base: args.base,
                seed: args.seed,
            };
            let (model, curve) = train_surrogate(&ds, &cfg)?;
            let path = args.out.join("surrogate.nnck");
            model.save(&path)?;
            (path, curve)
        }
        ModelArg::Flow => {
            if ds.flavor != DatasetFlavor::Flow {
                bail!("flow training needs a flow-flavor dataset");
            }
            let patterns: Vec<Grid> = ds.samples.iter().map(|s| s.pattern.clone()).collect();
            let cfg = FlowTrainConfig {
                epochs: args.epochs.unwrap_or(60),
                lr: args.lr,
                batch: args.batch.unwrap_or(8),
                base: args.base,
                seed: args.seed,
            };
            let (model, curve) = train_flow(&patterns, &cfg)?;
            let path = args.out.join("flow.nnck");
            model.save(&path)?;
            (path, curve)
        }
    };
    out.timing("train", start.elapsed().as_secs_f64());
    let loss_path = args.out.join("loss.csv");
    write_loss_csv(&loss_path, &curve)?;
    out.artifact(&ckpt_path);
    out.artifact(&loss_path);
    println!(
        "trained {} epochs, final loss {:.6e}, checkpoint {}",
        curve.len(),
        curve.last().copied().unwrap_or(f64::NAN),
        ckpt_path.display()
    );
    Ok(())
}

pub fn optimize(args: &OptimizeArgs, out: &mut Outcome) -> anyhow::Result<()> {
    let plate = plate_for(args.config);
    let space = PatternSpace::new(plate.clone(), args.pattern_h, args.pattern_w);
    let objective = match args.objective {
        ObjectiveArg::MeanLevel => ObjectiveSpec::mean_level(args.f1, args.f2),
        ObjectiveArg::FirstEig => ObjectiveSpec::first_eig(),
    };
    let freqs = band_frequencies(args.f1, args.f2, args.val_freqs);
    let surrogate = args
        .surrogate
        .as_ref()
        .map(|p| SurrogateModel::load(p).context("loading surrogate checkpoint"))
        .transpose()?;
    std::fs::create_dir_all(&args.out)?;

    let mut nfe = NfeCounter::new();
    let start = Instant::now();
    let mut best_trace = None;
    let method_name = match args.method {
        MethodArg::Flow => "flow",
        MethodArg::Random => "random",
        MethodArg::Genetic => "genetic",
        MethodArg::Rotation => "rotation",
    };
    let candidates: Vec<Candidate> = match args.method {
        MethodArg::Random => {
            let model = surrogate.as_ref().context("--method random needs --surrogate")?;
            random_search(model, &plate, &space, &objective, &freqs, args.nfe, args.seed, &mut nfe)?
        }
        MethodArg::Genetic => {
            let model = surrogate.as_ref().context("--method genetic needs --surrogate")?;
            genetic_search(
                model, &plate, &space, &objective, &freqs, args.nfe, 16, args.seed, &mut nfe,
            )?
        }
        MethodArg::Rotation => {
            let pattern = rotation_criterion_design(
                &plate, &space, args.f1, args.f2, args.mesh_nx, args.mesh_ny,
            )?;
            // informational prediction only; the heuristic itself consumes no
            // surrogate evaluations
            let predicted = match &surrogate {
                Some(model) => {
                    let mut side = NfeCounter::new();
                    surrogate_objective(model, &pattern, &plate, &objective, &freqs, &mut side)?
                }
                None => f64::NAN,
            };
            vec![Candidate { pattern, predicted, method: method_name.into(), iteration: 0 }]
        }
        MethodArg::Flow => {
            let model = surrogate.as_ref().context("--method flow needs --surrogate")?;
            let flow_path = args.flow_model.as_ref().context("--method flow needs --flow-model")?;
            let flow = FlowModel::load(flow_path).context("loading flow checkpoint")?;
            let gcfg = GuidanceConfig {
                alpha: args.alpha,
                step: args.step,
                ..GuidanceConfig::new(objective.clone(), freqs.clone())
            };
            gcfg.validate()?;
            // midpoint evaluation times; guided ones cost one surrogate call
            // per frequency, plus one scoring pass per finished sample
            let n_steps = (1.0 / gcfg.step).round() as usize;
            let guided_per = (0..n_steps)
                .flat_map(|i| {
                    let t0 = i as f64 * gcfg.step;
                    [t0, t0 + 0.5 * gcfg.step]
                })
                .filter(|&t| t < gcfg.t_cutoff)
                .count() as u64;
            let per_sample = (guided_per + 1) * freqs.len() as u64;
            let mut cands = Vec::new();
            let mut best = f64::INFINITY;
            for i in 0..args.pool {
                if nfe.remaining(args.nfe) < per_sample {
                    break;
                }
                let (pattern, trace) = guided_sample(
                    &flow,
                    Some(model),
                    &gcfg,
                    &plate,
                    &space,
                    args.seed.wrapping_add(i as u64),
                    &mut nfe,
                    Some(2),
                )?;
                let predicted =
                    surrogate_objective(model, &pattern, &plate, &objective, &freqs, &mut nfe)?;
                if predicted < best {
                    best = predicted;
                    best_trace = Some(trace);
                }
                cands.push(Candidate {
                    pattern,
                    predicted,
                    method: method_name.into(),
                    iteration: i,
                });
            }
            cands
        }
    };
    let wall = start.elapsed().as_secs_f64();
    out.timing("search", wall);
    out.nfe_total = nfe.total();

    let pool = MethodPool {
        method: method_name.into(),
        candidates,
        nfe_used: nfe.total(),
        wall_seconds: wall,
    };
    let fem_start = Instant::now();
    let report = run_comparison(
        &[pool.clone()],
        &plate,
        &objective,
        &freqs,
        args.mesh_nx,
        args.mesh_ny,
        args.k,
    )?;
    out.timing("fem_validation", fem_start.elapsed().as_secs_f64());

    let cmp_path = args.out.join("comparison.csv");
    std::fs::write(&cmp_path, report.to_csv())?;
    out.artifact(&cmp_path);
    let traj_path = args.out.join("best_so_far.csv");
    std::fs::write(&traj_path, best_so_far_csv(&pool.candidates))?;
    out.artifact(&traj_path);

    // top-k patterns by predicted objective, plus an FEM sweep of the best
    let mut sorted: Vec<&Candidate> = pool.candidates.iter().collect();
    sorted.sort_by(|a, b| a.predicted.total_cmp(&b.predicted));
    for (rank, c) in sorted.iter().take(args.k).enumerate() {
        let pgm = args.out.join(format!("pattern_{rank}.pgm"));
        let bpat = args.out.join(format!("pattern_{rank}.bpat"));
        write_pgm(&pgm, &c.pattern)?;
        write_bpat(&bpat, &c.pattern)?;
        out.artifact(&pgm);
        out.artifact(&bpat);
    }
    if let Some(best) = sorted.first() {
        let frf = fem_sweep(&best.pattern, &plate, &freqs, args.mesh_nx, args.mesh_ny)?;
        let frf_path = args.out.join("best_frf.csv");
        write_frf_csv(&frf_path, &frf)?;
        out.artifact(&frf_path);
    }
    if let Some(trace) = &best_trace {
        let trace_dir = args.out.join("trace");
        dump_trace(&trace_dir, trace, &plate)?;
        for entry in std::fs::read_dir(&trace_dir)? {
            out.artifact(&entry?.path());
        }
    }

    for row in &report.rows {
        println!(
            "{}: validated min {:.3} dB (predicted best {:.3}, gap {:.3}), {} plates, {} NFE, {:.1}s",
            row.method,
            row.validated_min,
            row.predicted_best,
            row.gap_of_min,
            row.pool_size,
            row.nfe_used,
            row.wall_seconds
        );
    }
    Ok(())
}

fn fem_sweep(
    pattern: &BeadingPattern,
    plate: &PlateConfig,
    frequencies: &[f64],
    mesh_nx: usize,
    mesh_ny: usize,
) -> anyhow::Result<FrequencyResponse> {
    let sys = build_system(plate, pattern, mesh_nx, mesh_ny)?;
    let sweep = solve_frf(&sys, frequencies)?;
    if !sweep.errors.is_empty() {
        let (f, why) = &sweep.errors[0];
        bail!("FEM sweep failed at {f} Hz: {why}");
    }
    let levels: Vec<f64> =
        sweep.fields.iter().map(level_from_field).collect::<Result<_, _>>()?;
    Ok(FrequencyResponse::new(frequencies.to_vec(), levels)?)
}

pub fn validate(args: &ValidateArgs, out: &mut Outcome) -> anyhow::Result<()> {
    let grid = match args.pattern.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(&args.pattern)?,
        _ => read_bpat(&args.pattern)?,
    };
    let plate = plate_for(args.config);
    let pattern = BeadingPattern::new(grid, &plate);
    let freqs = frequency_grid(args.fmin, args.fmax, args.df);
    std::fs::create_dir_all(&args.out)?;

    let start = Instant::now();
    let frf = fem_sweep(&pattern, &plate, &freqs, args.mesh_nx, args.mesh_ny)?;
    out.timing("fem_sweep", start.elapsed().as_secs_f64());
    let frf_path = args.out.join("frf.csv");
    write_frf_csv(&frf_path, &frf)?;
    out.artifact(&frf_path);

    let report = compliance(&pattern, &ConstraintParams::from_plate(&plate));
    println!(
        "compliance {:.4} (violations: C1 {}, C2 {}, C3 {}, C4 {})",
        report.ratio,
        report.c1.count(),
        report.c2.count(),
        report.c3.count(),
        report.c4.count()
    );
    println!("wrote {} rows to {}", frf.frequencies.len(), frf_path.display());
    Ok(())
}

struct RunRow {
    method: String,
    validated_min: f64,
    plates: f64,
    nfe: f64,
    wall: f64,
}

fn parse_comparison_csv(path: &Path) -> anyhow::Result<Vec<RunRow>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            bail!("{}: malformed row {line:?}", path.display());
        }
        rows.push(RunRow {
            method: f[0].to_string(),
            validated_min: f[2].parse()?,
            plates: f[4].parse()?,
            nfe: f[5].parse()?,
            wall: f[6].parse()?,
        });
    }
    Ok(rows)
}

pub fn report(args: &ReportArgs, out: &mut Outcome) -> anyhow::Result<()> {
    let mut by_method: Vec<(String, Vec<RunRow>)> = Vec::new();
    for run in &args.runs {
        for row in parse_comparison_csv(&run.join("comparison.csv"))? {
            match by_method.iter_mut().find(|(m, _)| *m == row.method) {
                Some((_, v)) => v.push(row),
                None => by_method.push((row.method.clone(), vec![row])),
            }
        }
    }
    if by_method.is_empty() {
        bail!("no comparison rows found");
    }

    let mut csv = String::from("method,objective_mean,objective_std,nfe,plates,wall_seconds\n");
    for (method, rows) in &by_method {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.validated_min).sum::<f64>() / n;
        let std = if rows.len() > 1 {
            (rows.iter().map(|r| (r.validated_min - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let nfe = rows.iter().map(|r| r.nfe).sum::<f64>() / n;
        let plates = rows.iter().map(|r| r.plates).sum::<f64>() / n;
        let wall = rows.iter().map(|r| r.wall).sum::<f64>() / n;
        csv.push_str(&format!("{method},{mean},{std},{nfe},{plates},{wall}\n"));
        println!("{method}: {mean:.3} ({std:.3}) dB over {} runs", rows.len());
    }
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("report.csv");
    std::fs::write(&path, &csv)?;
    out.artifact(&path);
    Ok(())
}
