//! Training-set generation and the on-disk dataset container: a JSON manifest
//! plus per-sample raw float32 blocks for patterns and velocity fields.

use std::fs;
use std::path::Path;

use platebead_core::grid::Grid;
use platebead_core::level::level_from_field;
use platebead_core::pattern::{sample_pattern_raw, GenConfig, PatternSpace};
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_core::constraints::postprocess_opts;
use platebead_fem::{build_system, solve_frf};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::OptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFlavor {
    /// Surrogate training set: C4 smoothing deliberately not applied, FEM
    /// fields and FRFs included.
    Surrogate,
    /// Flow training set: fully constraint-compliant patterns, no FEM data.
    Flow,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: usize,
    /// normalized height map [0,1] at pattern resolution
    pub pattern: Grid,
    pub load_x: f64,
    pub load_y: f64,
    pub rot_stiffness: f64,
    pub frequencies: Vec<f64>,
    /// per-frequency velocity magnitude resampled to pattern resolution
    pub fields: Vec<Grid>,
    /// per-frequency level computed on the FEM node set
    pub frf: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub flavor: DatasetFlavor,
    pub plate: PlateConfig,
    pub pattern_h: usize,
    pub pattern_w: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn pattern_of(&self, s: &Sample) -> BeadingPattern {
        BeadingPattern::new(s.pattern.clone(), &self.plate)
    }

    pub fn plate_for(&self, s: &Sample) -> PlateConfig {
        PlateConfig {
            load_x: s.load_x,
            load_y: s.load_y,
            rot_stiffness: s.rot_stiffness,
            ..self.plate.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub count: usize,
    pub flavor: DatasetFlavor,
    pub n_freqs: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub pattern_h: usize,
    pub pattern_w: usize,
    pub seed: u64,
}

impl GenOptions {
    pub fn desk(flavor: DatasetFlavor, count: usize, seed: u64) -> Self {
        GenOptions {
            count,
            flavor,
            n_freqs: 15,
            fmin: 1.0,
            fmax: 300.0,
            mesh_nx: 46,
            mesh_ny: 31,
            pattern_h: 48,
            pattern_w: 72,
            seed,
        }
    }

    /// Reduced profile for fast end-to-end runs.
    pub fn test_scale(flavor: DatasetFlavor, count: usize, seed: u64) -> Self {
        GenOptions {
            mesh_nx: 24,
            mesh_ny: 16,
            pattern_h: 24,
            pattern_w: 36,
            ..Self::desk(flavor, count, seed)
        }
    }
}

#[derive(Debug, Default)]
pub struct GenReport {
    /// (sample id, reason) for samples dropped due to FEM failures
    pub skipped: Vec<(usize, String)>,
}

/// Equidistant frequencies with one shared random offset:
/// f_i = fmin + (i + u) * (fmax - fmin) / n with u ~ U[0,1).
fn shifted_frequencies(rng: &mut impl Rng, n: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let d = (fmax - fmin) / n as f64;
    let u: f64 = rng.gen();
    (0..n).map(|i| fmin + (i as f64 + u) * d).collect()
}

pub fn generate(plate: &PlateConfig, opts: &GenOptions) -> Result<(Dataset, GenReport), OptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let space = PatternSpace::new(plate.clone(), opts.pattern_h, opts.pattern_w);
    let gen_cfg = GenConfig::default();
    let params = space.constraint_params();
    let margin = 0.05;

    // draw every random quantity sequentially so the dataset is a pure
    // function of the seed, then solve in parallel
    struct Spec {
        id: usize,
        pattern: BeadingPattern,
        cfg: PlateConfig,
        frequencies: Vec<f64>,
    }
    let specs: Vec<Spec> = (0..opts.count)
        .map(|id| {
            let raw = sample_pattern_raw(&mut rng, &space, &gen_cfg);
            let enforce_c4 = opts.flavor == DatasetFlavor::Flow;
            let pattern = postprocess_opts(&raw, &params, enforce_c4);
            let cfg = PlateConfig {
                load_x: rng.gen_range(margin..plate.length - margin),
                load_y: rng.gen_range(margin..plate.width - margin),
                rot_stiffness: rng.gen_range(0.0..=100.0),
                ..plate.clone()
            };
            let frequencies = shifted_frequencies(&mut rng, opts.n_freqs, opts.fmin, opts.fmax);
            Spec { id, pattern, cfg, frequencies }
        })
        .collect();

    let mut report = GenReport::default();
    let samples: Vec<Result<Sample, (usize, String)>> = specs
        .par_iter()
        .map(|spec| {
            let mut sample = Sample {
                id: spec.id,
                pattern: spec.pattern.grid.clone(),
                load_x: spec.cfg.load_x,
                load_y: spec.cfg.load_y,
                rot_stiffness: spec.cfg.rot_stiffness,
                frequencies: Vec::new(),
                fields: Vec::new(),
                frf: Vec::new(),
            };
            if opts.flavor == DatasetFlavor::Flow {
                return Ok(sample);
            }
            let sys = build_system(&spec.cfg, &spec.pattern, opts.mesh_nx, opts.mesh_ny)
                .map_err(|e| (spec.id, e.to_string()))?;
            let sweep =
                solve_frf(&sys, &spec.frequencies).map_err(|e| (spec.id, e.to_string()))?;
            if !sweep.errors.is_empty() {
                let (f, why) = &sweep.errors[0];
                return Err((spec.id, format!("solve failed at {f} Hz: {why}")));
            }
            for field in &sweep.fields {
                // node (ix, iy) -> grid row iy (y), column ix (x)
                let g = Grid::from_fn(opts.mesh_ny, opts.mesh_nx, |r, c| {
                    field.magnitudes[c * opts.mesh_ny + r]
                });
                sample.fields.push(g.resample(opts.pattern_h, opts.pattern_w));
                sample.frf.push(level_from_field(field).map_err(|e| (spec.id, e.to_string()))?);
            }
            sample.frequencies = spec.frequencies.clone();
            Ok(sample)
        })
        .collect();

    let mut kept = Vec::new();
    for s in samples {
        match s {
            Ok(s) => kept.push(s),
            Err(skip) => report.skipped.push(skip),
        }
    }
    let ds = Dataset {
        flavor: opts.flavor,
        plate: plate.clone(),
        pattern_h: opts.pattern_h,
        pattern_w: opts.pattern_w,
        samples: kept,
    };
    Ok((ds, report))
}

// ---- on-disk container ----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PlateSnapshot {
    length: f64,
    width: f64,
    thickness: f64,
    density: f64,
    youngs_modulus: f64,
    poisson_ratio: f64,
    loss_factor: f64,
    rot_stiffness: f64,
    load_x: f64,
    load_y: f64,
    bead_height: f64,
    flank_angle_deg: f64,
    foot_radius: f64,
    head_radius: f64,
}

impl From<&PlateConfig> for PlateSnapshot {
    fn from(c: &PlateConfig) -> Self {
        PlateSnapshot {
            length: c.length,
            width: c.width,
            thickness: c.thickness,
            density: c.density,
            youngs_modulus: c.youngs_modulus,
            poisson_ratio: c.poisson_ratio,
            loss_factor: c.loss_factor,
            rot_stiffness: c.rot_stiffness,
            load_x: c.load_x,
            load_y: c.load_y,
            bead_height: c.bead_height,
            flank_angle_deg: c.flank_angle_deg,
            foot_radius: c.foot_radius,
            head_radius: c.head_radius,
        }
    }
}

impl From<&PlateSnapshot> for PlateConfig {
    fn from(s: &PlateSnapshot) -> Self {
        PlateConfig {
            length: s.length,
            width: s.width,
            thickness: s.thickness,
            density: s.density,
            youngs_modulus: s.youngs_modulus,
            poisson_ratio: s.poisson_ratio,
            loss_factor: s.loss_factor,
            rot_stiffness: s.rot_stiffness,
            load_x: s.load_x,
            load_y: s.load_y,
            bead_height: s.bead_height,
            flank_angle_deg: s.flank_angle_deg,
            foot_radius: s.foot_radius,
            head_radius: s.head_radius,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SampleMeta {
    id: usize,
    load_x: f64,
    load_y: f64,
    rot_stiffness: f64,
    frequencies: Vec<f64>,
    frf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    flavor: DatasetFlavor,
    plate: PlateSnapshot,
    pattern_h: usize,
    pattern_w: usize,
    samples: Vec<SampleMeta>,
}

fn write_f32_block(path: &Path, values: impl Iterator<Item = f64>) -> std::io::Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes)
}

fn read_f32_block(path: &Path, expect: usize) -> Result<Vec<f64>, OptError> {
    let bytes = fs::read(path)?;
    if bytes.len() != 4 * expect {
        return Err(OptError::Dataset(format!(
            "{}: expected {} floats, found {} bytes",
            path.display(),
            expect,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

impl Dataset {
    pub fn save(&self, dir: &Path) -> Result<(), OptError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            flavor: self.flavor,
            plate: (&self.plate).into(),
            pattern_h: self.pattern_h,
            pattern_w: self.pattern_w,
            samples: self
                .samples
                .iter()
                .map(|s| SampleMeta {
                    id: s.id,
                    load_x: s.load_x,
                    load_y: s.load_y,
                    rot_stiffness: s.rot_stiffness,
                    frequencies: s.frequencies.clone(),
                    frf: s.frf.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| OptError::Dataset(e.to_string()))?;
        fs::write(dir.join("manifest.json"), json)?;
        for s in &self.samples {
            write_f32_block(
                &dir.join(format!("pattern_{:05}.bin", s.id)),
                (0..s.pattern.h * s.pattern.w).map(|i| s.pattern.data[i]),
            )?;
            if !s.fields.is_empty() {
                write_f32_block(
                    &dir.join(format!("fields_{:05}.bin", s.id)),
                    s.fields.iter().flat_map(|g| g.data.iter().copied()),
                )?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset, OptError> {
        let json = fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest =
            serde_json::from_str(&json).map_err(|e| OptError::Dataset(e.to_string()))?;
        let (h, w) = (manifest.pattern_h, manifest.pattern_w);
        let mut samples = Vec::with_capacity(manifest.samples.len());
        for m in &manifest.samples {
            let pdata = read_f32_block(&dir.join(format!("pattern_{:05}.bin", m.id)), h * w)?;
            let pattern = Grid::from_vec(h, w, pdata).map_err(OptError::Core)?;
            let nf = m.frequencies.len();
            let fields = if nf > 0 {
                let fdata =
                    read_f32_block(&dir.join(format!("fields_{:05}.bin", m.id)), nf * h * w)?;
                (0..nf)
                    .map(|k| {
                        Grid::from_vec(h, w, fdata[k * h * w..(k + 1) * h * w].to_vec())
                            .map_err(OptError::Core)
                    })
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                Vec::new()
            };
            samples.push(Sample {
                id: m.id,
                pattern,
                load_x: m.load_x,
                load_y: m.load_y,
                rot_stiffness: m.rot_stiffness,
                frequencies: m.frequencies.clone(),
                fields,
                frf: m.frf.clone(),
            });
        }
        Ok(Dataset {
            flavor: manifest.flavor,
            plate: (&manifest.plate).into(),
            pattern_h: h,
            pattern_w: w,
            samples,
        })
    }
}
