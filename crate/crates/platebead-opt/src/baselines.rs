//! Comparison optimizers sharing the surrogate NFE budget: random search,
//! differential evolution over the parametric pattern encoding, and the
//! rotation-criterion heuristic, plus the top-k FEM validation protocol.

use std::time::Instant;

use platebead_core::constraints::{binarize, postprocess};
use platebead_core::grid::Grid;
use platebead_core::level::level_from_field;
use platebead_core::pattern::{decode_params, sample_pattern, GenConfig, PatternSpace, PARAM_COUNT};
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_fem::{build_system, frequency_grid, rotation_field, solve_frf};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::OptError;
use crate::nfe::NfeCounter;
use crate::objective::ObjectiveSpec;
use crate::surrogate::{predict_frf, SurrogateModel};

#[derive(Debug, Clone)]
pub struct Candidate {
    pub pattern: BeadingPattern,
    pub predicted: f64,
    pub method: String,
    pub iteration: usize,
}

/// Surrogate objective of one pattern; consumes `frequencies.len()` NFE.
pub fn surrogate_objective(
    model: &SurrogateModel,
    pattern: &BeadingPattern,
    plate: &PlateConfig,
    objective: &ObjectiveSpec,
    frequencies: &[f64],
    nfe: &mut NfeCounter,
) -> Result<f64, OptError> {
    let (frf, _) = predict_frf(model, pattern, plate, frequencies, nfe)?;
    objective.eval(&frf.levels, &frf.frequencies)
}

/// Draw and evaluate random patterns until the NFE budget is exhausted;
/// candidates come back sorted ascending by predicted objective.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    model: &SurrogateModel,
    plate: &PlateConfig,
    space: &PatternSpace,
    objective: &ObjectiveSpec,
    frequencies: &[f64],
    budget_nfe: u64,
    seed: u64,
    nfe: &mut NfeCounter,
) -> Result<Vec<Candidate>, OptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen_cfg = GenConfig::default();
    let per = frequencies.len() as u64;
    let mut out = Vec::new();
    let mut it = 0usize;
    while nfe.remaining(budget_nfe) >= per {
        let pattern = sample_pattern(&mut rng, space, &gen_cfg);
        let predicted =
            surrogate_objective(model, &pattern, plate, objective, frequencies, nfe)?;
        out.push(Candidate { pattern, predicted, method: "random".into(), iteration: it });
        it += 1;
    }
    out.sort_by(|a, b| a.predicted.total_cmp(&b.predicted));
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// best-ever value after each generation (non-increasing)
    pub history: Vec<f64>,
}

/// DE/rand/1/bin on the unit box with per-generation dithered mutation factor
/// in [0.5, 1], crossover rate 0.7 and bound handling by clipping.
pub fn differential_evolution(
    mut eval: impl FnMut(&[f64]) -> Result<f64, OptError>,
    dim: usize,
    pop_size: usize,
    iters: usize,
    rng: &mut impl Rng,
) -> Result<DeResult, OptError> {
    assert!(pop_size >= 4, "DE/rand/1 needs at least 4 members");
    let mut pop: Vec<Vec<f64>> =
        (0..pop_size).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut fit = Vec::with_capacity(pop_size);
    for x in &pop {
        fit.push(eval(x)?);
    }
    let mut best_i = (0..pop_size).min_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
    let mut best = pop[best_i].clone();
    let mut best_value = fit[best_i];
    let mut history = vec![best_value];
    const CR: f64 = 0.7;

    for _gen in 0..iters {
        let f: f64 = rng.gen_range(0.5..1.0);
        for i in 0..pop_size {
            let pick = |rng: &mut dyn rand::RngCore, exclude: &[usize]| loop {
                let j = (rng.next_u64() % pop_size as u64) as usize;
                if !exclude.contains(&j) {
                    return j;
                }
            };
            let a = pick(rng, &[i]);
            let b = pick(rng, &[i, a]);
            let c = pick(rng, &[i, a, b]);
            let forced = rng.gen_range(0..dim);
            let mut trial = pop[i].clone();
            for d in 0..dim {
                if d == forced || rng.gen::<f64>() < CR {
                    trial[d] = (pop[a][d] + f * (pop[b][d] - pop[c][d])).clamp(0.0, 1.0);
                }
            }
            let tv = eval(&trial)?;
            if tv <= fit[i] {
                pop[i] = trial;
                fit[i] = tv;
                if tv < best_value {
                    best_value = tv;
                    best = pop[i].clone();
                    best_i = i;
                }
            }
        }
        let _ = best_i;
        history.push(best_value);
    }
    Ok(DeResult { best, best_value, history })
}

/// Genetic baseline over the 43-parameter pattern encoding, stopping when
/// the NFE budget cannot afford another full generation.
#[allow(clippy::too_many_arguments)]
pub fn genetic_search(
    model: &SurrogateModel,
    plate: &PlateConfig,
    space: &PatternSpace,
    objective: &ObjectiveSpec,
    frequencies: &[f64],
    budget_nfe: u64,
    pop_size: usize,
    seed: u64,
    nfe: &mut NfeCounter,
) -> Result<Vec<Candidate>, OptError> {
    let per = frequencies.len() as u64;
    let evals_total = budget_nfe / per;
    let iters = (evals_total.saturating_sub(pop_size as u64) / pop_size as u64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<Candidate> = Vec::new();
    let mut it = 0usize;
    let result = differential_evolution(
        |x| {
            let pattern = decode_params(x, space)?;
            let v = surrogate_objective(model, &pattern, plate, objective, frequencies, nfe)?;
            pool.push(Candidate {
                pattern,
                predicted: v,
                method: "genetic".into(),
                iteration: it,
            });
            it += 1;
            Ok(v)
        },
        PARAM_COUNT,
        pop_size,
        iters,
        &mut rng,
    )?;
    let _ = result;
    pool.sort_by(|a, b| a.predicted.total_cmp(&b.predicted));
    Ok(pool)
}

/// Rotation-criterion heuristic: bead the pixels where the flat plate's
/// band-integrated squared rotational velocity is largest, up to 50 % of the
/// plate area, then postprocess. Uses one FEM sweep and zero surrogate NFE.
pub fn rotation_criterion_design(
    plate: &PlateConfig,
    space: &PatternSpace,
    f1: f64,
    f2: f64,
    mesh_nx: usize,
    mesh_ny: usize,
) -> Result<BeadingPattern, OptError> {
    let flat = BeadingPattern::flat(plate, 8, 8);
    let sys = build_system(plate, &flat, mesh_nx, mesh_ny)?;
    let df = (f2 - f1) / 14.0;
    let freqs = frequency_grid(f1, f2, df);
    let field = rotation_field(&sys, &freqs)?;
    // node grid -> pattern resolution
    let node_grid = Grid::from_fn(mesh_ny, mesh_nx, |r, c| field[c * mesh_ny + r]);
    let crit = node_grid.resample(space.h, space.w);

    let params = space.constraint_params();
    let template = BeadingPattern::flat(&space.plate, space.h, space.w);
    // C1 margin plus half a flank width: pixels closer to the edge would be
    // cleared by the postprocess again
    let profile = params.flank_profile();
    let clear = params.edge_margin + profile.half_width();
    let plate_x = template.pixel_pitch_x * space.w as f64;
    let plate_y = template.pixel_pitch_y * space.h as f64;
    let mut order: Vec<usize> = (0..space.h * space.w)
        .filter(|&i| {
            let (r, c) = (i / space.w, i % space.w);
            let x = template.pixel_x(c);
            let y = template.pixel_y(r);
            x.min(plate_x - x).min(y).min(plate_y - y) >= clear
        })
        .collect();
    order.sort_by(|&a, &b| crit.data[b].total_cmp(&crit.data[a]));

    let target = space.h * space.w / 2;
    let mut grid = Grid::zeros(space.h, space.w);
    for &i in order.iter().take(target) {
        grid.data[i] = 1.0;
    }
    let raw = BeadingPattern::new(grid, &space.plate);
    Ok(postprocess(&raw, &params))
}

/// Beaded-area fraction of a pattern (pixels above the binarization
/// threshold over all pixels).
pub fn beaded_fraction(pattern: &BeadingPattern, space: &PatternSpace) -> f64 {
    let mask = binarize(&pattern.grid, space.constraint_params().binarize_threshold);
    mask.count() as f64 / (pattern.h() * pattern.w()) as f64
}

// ---- comparison protocol ---------------------------------------------------

#[derive(Debug, Clone)]
pub struct MethodPool {
    pub method: String,
    pub candidates: Vec<Candidate>,
    pub nfe_used: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: String,
    pub predicted_best: f64,
    /// (predicted, FEM-validated) for each of the top-k candidates
    pub validated: Vec<(f64, f64)>,
    pub validated_min: f64,
    /// |predicted - validated| of the candidate achieving the minimum
    pub gap_of_min: f64,
    /// number of patterns the method generated
    pub pool_size: usize,
    pub nfe_used: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<MethodReport>,
    pub fem_validations_per_method: usize,
}

/// FEM objective of a pattern: full sweep on the validation grid, then the
/// same objective functional as the surrogate side.
pub fn fem_objective(
    pattern: &BeadingPattern,
    plate: &PlateConfig,
    objective: &ObjectiveSpec,
    frequencies: &[f64],
    mesh_nx: usize,
    mesh_ny: usize,
) -> Result<f64, OptError> {
    let sys = build_system(plate, pattern, mesh_nx, mesh_ny)?;
    let sweep = solve_frf(&sys, frequencies)?;
    if !sweep.errors.is_empty() {
        let (f, why) = &sweep.errors[0];
        return Err(OptError::NonFinite(format!("FEM sweep failed at {f} Hz: {why}")));
    }
    let levels: Vec<f64> = sweep
        .fields
        .iter()
        .map(|fld| level_from_field(fld))
        .collect::<Result<_, _>>()
        .map_err(OptError::Core)?;
    objective.eval(&levels, &sweep.frf.frequencies)
}

/// Validate the top-k candidates of every pool with FEM and report per-method
/// minima plus the surrogate-vs-FEM gap.
#[allow(clippy::too_many_arguments)]
pub fn run_comparison(
    pools: &[MethodPool],
    plate: &PlateConfig,
    objective: &ObjectiveSpec,
    frequencies: &[f64],
    mesh_nx: usize,
    mesh_ny: usize,
    k: usize,
) -> Result<ComparisonReport, OptError> {
    let mut rows = Vec::new();
    for pool in pools {
        let start = Instant::now();
        let mut sorted: Vec<&Candidate> = pool.candidates.iter().collect();
        sorted.sort_by(|a, b| a.predicted.total_cmp(&b.predicted));
        let top: Vec<&Candidate> = sorted.into_iter().take(k).collect();
        if top.is_empty() {
            return Err(OptError::Config(format!("method {} produced no candidates", pool.method)));
        }
        let mut validated = Vec::with_capacity(top.len());
        for c in &top {
            let fem =
                fem_objective(&c.pattern, plate, objective, frequencies, mesh_nx, mesh_ny)?;
            validated.push((c.predicted, fem));
        }
        let (pred_min, fem_min) = validated
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        rows.push(MethodReport {
            method: pool.method.clone(),
            predicted_best: top[0].predicted,
            validated_min: fem_min,
            gap_of_min: (pred_min - fem_min).abs(),
            validated,
            pool_size: pool.candidates.len(),
            nfe_used: pool.nfe_used,
            wall_seconds: pool.wall_seconds + start.elapsed().as_secs_f64(),
        });
    }
    Ok(ComparisonReport { rows, fem_validations_per_method: k })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("method,predicted_best,validated_min,gap_of_min,plates,nfe,wall_seconds\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.method,
                r.predicted_best,
                r.validated_min,
                r.gap_of_min,
                r.pool_size,
                r.nfe_used,
                r.wall_seconds
            ));
        }
        s
    }
}

/// Best-so-far trajectory of a candidate pool in generation order.
pub fn best_so_far_csv(candidates: &[Candidate]) -> String {
    let mut by_iter: Vec<&Candidate> = candidates.iter().collect();
    by_iter.sort_by_key(|c| c.iteration);
    let mut best = f64::INFINITY;
    let mut s = String::from("iteration,predicted,best_so_far\n");
    for c in by_iter {
        best = best.min(c.predicted);
        s.push_str(&format!("{},{},{}\n", c.iteration, c.predicted, best));
    }
    s
}
