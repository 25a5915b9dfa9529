//! Flow-matching generative model over beading patterns and the guided ODE
//! sampler: straight-line (optimal-transport) interpolant training, cosine
//! guidance schedule, gradient rescaling and midpoint integration.

use ndarray::{ArrayD, Axis, IxDyn};
use platebead_core::constraints::postprocess;
use platebead_core::grid::Grid;
use platebead_core::pattern::PatternSpace;
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_nn::embed::embed_batch;
use platebead_nn::params::bind_frozen;
use platebead_nn::{bind, Adam, BoundParams, ParamStore, Tape, UNet, UNetConfig, Var};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::OptError;
use crate::nfe::NfeCounter;
use crate::objective::ObjectiveSpec;
use crate::surrogate::{draw_noise, levels_on_tape, load_blob, SurrogateModel, EMB_DIM};

pub struct FlowModel {
    pub net: UNet,
    pub params: ParamStore,
}

impl FlowModel {
    pub fn save(&self, path: &std::path::Path) -> Result<(), OptError> {
        platebead_nn::checkpoint::save(path, &self.net.descriptor(), &self.params)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, OptError> {
        let (desc, params) = platebead_nn::checkpoint::load(path)?;
        let net = UNet::from_descriptor(&desc)?;
        Ok(FlowModel { net, params })
    }
}

/// Guidance schedule: a decreasing cosine ramp from 1 to 0.1 that switches
/// off entirely at the cutoff.
pub fn beta_schedule(t: f64) -> f64 {
    assert!((0.0..=1.0).contains(&t), "schedule time {t} outside [0,1]");
    if t < 0.75 {
        0.5 * (1.0 + (std::f64::consts::PI * t).cos()) * 0.9 + 0.1
    } else {
        0.0
    }
}

fn l2(a: &ArrayD<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Rescale the objective gradient to the norm of the flow velocity. A zero
/// gradient yields zero guidance (flagged in the second return).
pub fn rescale_grad(grad: &ArrayD<f64>, v_flow: &ArrayD<f64>) -> (ArrayD<f64>, bool) {
    assert_eq!(grad.shape(), v_flow.shape(), "rescale_grad: shape mismatch");
    let gn = l2(grad);
    if gn == 0.0 {
        return (ArrayD::zeros(grad.raw_dim()), true);
    }
    let vn = l2(v_flow);
    (grad.mapv(|g| g * (vn / gn)), false)
}

/// Straight-line interpolant x_t = t*x1 + (1-t)*x0, per batch row.
pub fn ot_interpolant(x1: &ArrayD<f64>, x0: &ArrayD<f64>, ts: &[f64]) -> ArrayD<f64> {
    assert_eq!(x1.shape(), x0.shape());
    assert_eq!(x1.shape()[0], ts.len());
    let mut xt = x0.clone();
    for (bi, &t) in ts.iter().enumerate() {
        let mut row = xt.index_axis_mut(Axis(0), bi);
        row.zip_mut_with(&x1.index_axis(Axis(0), bi), |x0v, &x1v| {
            *x0v = t * x1v + (1.0 - t) * *x0v;
        });
    }
    xt
}

/// Conditional flow-matching loss with an arbitrary velocity evaluator
/// (production passes the UNet; tests can rig the velocity).
pub fn cfm_loss_core(
    tape: &mut Tape,
    x1: &ArrayD<f64>,
    x0: &ArrayD<f64>,
    ts: &[f64],
    velocity: impl FnOnce(&mut Tape, Var, &[f64]) -> Var,
) -> Var {
    let xt = tape.constant(ot_interpolant(x1, x0, ts));
    let v = velocity(tape, xt, ts);
    let target = tape.constant(x1 - x0);
    tape.mse(v, target)
}

/// Standard loss: draw x0 ~ N(0,1) and t ~ U[0,1) per batch row.
pub fn cfm_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    net: &UNet,
    x1: &ArrayD<f64>,
    rng: &mut impl Rng,
) -> Var {
    let shape = x1.shape();
    let (b, h, w) = (shape[0], shape[2], shape[3]);
    let mut x0 = ArrayD::zeros(x1.raw_dim());
    for bi in 0..b {
        let g = draw_noise(rng, h, w);
        for r in 0..h {
            for c in 0..w {
                x0[[bi, 0, r, c]] = g.get(r, c);
            }
        }
    }
    let ts: Vec<f64> = (0..b).map(|_| rng.gen::<f64>()).collect();
    cfm_loss_core(tape, x1, &x0, &ts, |tape, xt, ts| {
        let scalars: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t]).collect();
        let ev = tape.constant(embed_batch(&scalars, EMB_DIM));
        net.forward(tape, bound, xt, ev)
    })
}

#[derive(Debug, Clone)]
pub struct FlowTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub base: usize,
    pub seed: u64,
}

impl Default for FlowTrainConfig {
    fn default() -> Self {
        FlowTrainConfig { epochs: 60, lr: 3e-3, batch: 8, base: 16, seed: 0 }
    }
}

/// Train the flow model on normalized [0,1] pattern grids (rescaled to
/// [-1,1] internally). Returns the model and the per-epoch curve of the
/// frozen-draw evaluation loss (see [`flow_eval_loss`]).
pub fn train_flow(
    patterns: &[Grid],
    cfg: &FlowTrainConfig,
) -> Result<(FlowModel, Vec<f64>), OptError> {
    if patterns.is_empty() {
        return Err(OptError::Dataset("empty flow training set".into()));
    }
    let (h, w) = (patterns[0].h, patterns[0].w);
    let net = UNet::new(UNetConfig { emb_dim: EMB_DIM, ..UNetConfig::new(1, 1, cfg.base) });
    let mut params = net.init_params(cfg.seed);
    let mut opt = Adam::new(cfg.lr, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xf10e);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // cosine decay of the learning rate to 2 % of the initial value
        let frac = epoch as f64 / cfg.epochs.max(1) as f64;
        opt.lr = cfg.lr * (0.51 + 0.49 * (std::f64::consts::PI * frac).cos());
        let mut order: Vec<usize> = (0..patterns.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(cfg.batch) {
            let b = chunk.len();
            let mut x1 = ArrayD::zeros(IxDyn(&[b, 1, h, w]));
            for (bi, &pi) in chunk.iter().enumerate() {
                let p = &patterns[pi];
                for r in 0..h {
                    for c in 0..w {
                        x1[[bi, 0, r, c]] = 2.0 * p.get(r, c) - 1.0;
                    }
                }
            }
            let mut tape = Tape::new();
            let bound = bind(&mut tape, &params);
            let loss = cfm_loss(&mut tape, &bound, &net, &x1, &mut rng);
            let lval = tape.scalar_value(loss);
            if !lval.is_finite() {
                return Err(OptError::NonFinite(format!("flow loss at epoch {epoch}")));
            }
            let grads = tape.backward(loss)?;
            opt.step(&mut params, &bound.collect_grads(&grads));
        }
        curve.push(flow_eval_loss(&net, &params, patterns, cfg.batch, cfg.seed)?);
    }
    Ok((FlowModel { net, params }, curve))
}

/// Deterministic CFM loss under frozen draws: pattern i is paired with a
/// fixed noise grid and the midpoint of its time stratum over [0, 1), keyed
/// only by the seed. The reported training curve uses this, which makes
/// epochs directly comparable and lets a reloaded checkpoint reproduce the
/// final curve value exactly.
pub fn flow_eval_loss(
    net: &UNet,
    params: &ParamStore,
    patterns: &[Grid],
    batch: usize,
    seed: u64,
) -> Result<f64, OptError> {
    let (h, w) = (patterns[0].h, patterns[0].w);
    let n = patterns.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1e7);
    let noises: Vec<Grid> = (0..n).map(|_| draw_noise(&mut rng, h, w)).collect();
    let idx: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in idx.chunks(batch) {
        let b = chunk.len();
        let mut x1 = ArrayD::zeros(IxDyn(&[b, 1, h, w]));
        let mut x0 = ArrayD::zeros(IxDyn(&[b, 1, h, w]));
        let mut ts = Vec::with_capacity(b);
        for (bi, &pi) in chunk.iter().enumerate() {
            for r in 0..h {
                for c in 0..w {
                    x1[[bi, 0, r, c]] = 2.0 * patterns[pi].get(r, c) - 1.0;
                    x0[[bi, 0, r, c]] = noises[pi].get(r, c);
                }
            }
            ts.push((pi as f64 + 0.5) / n as f64);
        }
        let mut tape = Tape::new();
        let bound = bind_frozen(&mut tape, params);
        let loss = cfm_loss_core(&mut tape, &x1, &x0, &ts, |tape, xt, ts| {
            let scalars: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t]).collect();
            let ev = tape.constant(embed_batch(&scalars, EMB_DIM));
            net.forward(tape, &bound, xt, ev)
        });
        let lval = tape.scalar_value(loss);
        if !lval.is_finite() {
            return Err(OptError::NonFinite("flow evaluation loss".into()));
        }
        total += lval;
        batches += 1;
    }
    Ok(total / batches as f64)
}

// ---- guided sampling -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Euler,
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct GuidanceConfig {
    pub alpha: f64,
    pub t_cutoff: f64,
    pub step: f64,
    pub solver: Solver,
    pub objective: ObjectiveSpec,
    /// surrogate evaluation frequencies during guidance
    pub frequencies: Vec<f64>,
}

impl GuidanceConfig {
    pub fn new(objective: ObjectiveSpec, frequencies: Vec<f64>) -> Self {
        GuidanceConfig {
            alpha: 1.0,
            t_cutoff: 0.75,
            step: 0.05,
            solver: Solver::Midpoint,
            objective,
            frequencies,
        }
    }

    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.step > 0.0 && self.step <= 0.25) {
            return Err(OptError::Config(format!("step size {} outside (0, 0.25]", self.step)));
        }
        if !(self.t_cutoff > 0.0 && self.t_cutoff <= 1.0) {
            return Err(OptError::Config(format!("cutoff {} outside (0, 1]", self.t_cutoff)));
        }
        if self.alpha < 0.0 {
            return Err(OptError::Config("alpha must be >= 0".into()));
        }
        let n = 1.0 / self.step;
        if (n - n.round()).abs() > 1e-9 {
            return Err(OptError::Config(format!("step {} does not divide [0,1]", self.step)));
        }
        Ok(())
    }
}

/// One velocity evaluation of the guided ODE.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub guided: bool,
    pub v_flow_norm: f64,
    pub guidance_norm: f64,
    pub grad_zeroed: bool,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ODETrace {
    pub records: Vec<StepRecord>,
    pub velocity_evals: usize,
    pub guided_evals: usize,
    /// final state mapped to [0,1] before constraint postprocessing
    pub pre_postprocess: Option<Grid>,
    /// optional x_t snapshots (time, [0,1]-mapped grid)
    pub snapshots: Vec<(f64, Grid)>,
}

struct GuidedIntegrator<'a> {
    flow: &'a FlowModel,
    surrogate: Option<&'a SurrogateModel>,
    gcfg: &'a GuidanceConfig,
    blob: Grid,
    rot_stiffness: f64,
    trace: ODETrace,
}

impl GuidedIntegrator<'_> {
    fn velocity(&mut self, x: &ArrayD<f64>, t: f64, nfe: &mut NfeCounter) -> Result<ArrayD<f64>, OptError> {
        self.trace.velocity_evals += 1;
        // unguided flow velocity, parameters frozen
        let v_flow = {
            let mut tape = Tape::new();
            let bound = bind_frozen(&mut tape, &self.flow.params);
            let xv = tape.constant(x.clone());
            let ev = tape.constant(embed_batch(&[vec![t]], EMB_DIM));
            let v = self.flow.net.forward(&mut tape, &bound, xv, ev);
            tape.value(v).clone()
        };
        let mut rec = StepRecord {
            t,
            guided: false,
            v_flow_norm: l2(&v_flow),
            guidance_norm: 0.0,
            grad_zeroed: false,
            objective: None,
        };
        let guided = t < self.gcfg.t_cutoff && self.gcfg.alpha > 0.0 && self.surrogate.is_some();
        if !guided {
            self.trace.records.push(rec);
            return Ok(v_flow);
        }
        let surrogate = self.surrogate.unwrap();
        let mut tape = Tape::new();
        let bound = bind_frozen(&mut tape, &surrogate.params);
        let xv = tape.leaf(x.clone());
        let levels = levels_on_tape(
            &mut tape,
            &bound,
            &surrogate.net,
            xv,
            &self.blob,
            self.rot_stiffness,
            &self.gcfg.frequencies,
            t,
        );
        nfe.add(self.gcfg.frequencies.len() as u64);
        self.trace.guided_evals += 1;
        rec.guided = true;
        let v = match self.gcfg.objective.eval_on_tape(&mut tape, levels, &self.gcfg.frequencies) {
            Ok(j) => {
                rec.objective = Some(tape.scalar_value(j));
                let grads = tape.backward(j)?;
                let gx = grads
                    .get(xv)
                    .ok_or_else(|| OptError::NonFinite("missing guidance gradient".into()))?;
                if gx.iter().any(|g| !g.is_finite()) {
                    return Err(OptError::NonFinite(format!("guidance gradient at t={t}")));
                }
                let (ghat, zeroed) = rescale_grad(gx, &v_flow);
                rec.grad_zeroed = zeroed;
                let scale = self.gcfg.alpha * beta_schedule(t);
                let guidance = ghat.mapv(|g| scale * g);
                rec.guidance_norm = l2(&guidance);
                // descend the objective: subtract the rescaled gradient
                &v_flow - &guidance
            }
            // undefined objective (e.g. no peaks yet): fall back to the pure
            // flow velocity for this evaluation
            Err(OptError::ObjectiveUndefined(_)) => {
                rec.grad_zeroed = true;
                v_flow.clone()
            }
            Err(e) => return Err(e),
        };
        self.trace.records.push(rec);
        Ok(v)
    }
}

/// Integrate the guided ODE from noise to a pattern. `surrogate = None` or
/// `alpha = 0` gives unguided sampling; both follow the identical code path
/// and arithmetic for the flow term.
pub fn guided_sample(
    flow: &FlowModel,
    surrogate: Option<&SurrogateModel>,
    gcfg: &GuidanceConfig,
    plate: &PlateConfig,
    space: &PatternSpace,
    seed: u64,
    nfe: &mut NfeCounter,
    snapshot_every: Option<usize>,
) -> Result<(BeadingPattern, ODETrace), OptError> {
    gcfg.validate()?;
    let (h, w) = (space.h, space.w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = draw_noise(&mut rng, h, w);
    let mut x = ArrayD::zeros(IxDyn(&[1, 1, h, w]));
    for r in 0..h {
        for c in 0..w {
            x[[0, 0, r, c]] = noise.get(r, c);
        }
    }
    let template = BeadingPattern::flat(&space.plate, h, w);
    let mut integ = GuidedIntegrator {
        flow,
        surrogate,
        gcfg,
        blob: load_blob(&template, plate.load_x, plate.load_y),
        rot_stiffness: plate.rot_stiffness,
        trace: ODETrace::default(),
    };

    let n_steps = (1.0 / gcfg.step).round() as usize;
    let hstep = gcfg.step;
    for i in 0..n_steps {
        let t0 = i as f64 * hstep;
        if let Some(every) = snapshot_every {
            if i % every == 0 {
                integ.trace.snapshots.push((t0, to_unit_grid(&x)));
            }
        }
        let v1 = integ.velocity(&x, t0, nfe)?;
        match gcfg.solver {
            Solver::Euler => {
                x.zip_mut_with(&v1, |xv, &v| *xv += hstep * v);
            }
            Solver::Midpoint => {
                let mut xm = x.clone();
                xm.zip_mut_with(&v1, |xv, &v| *xv += 0.5 * hstep * v);
                let v2 = integ.velocity(&xm, t0 + 0.5 * hstep, nfe)?;
                x.zip_mut_with(&v2, |xv, &v| *xv += hstep * v);
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OptError::NonFinite(format!("ODE state after step {i}")));
        }
    }

    let unit = to_unit_grid(&x);
    let mut trace = integ.trace;
    trace.pre_postprocess = Some(unit.clone());
    let raw = BeadingPattern::new(unit, &space.plate);
    let pattern = postprocess(&raw, &space.constraint_params());
    Ok((pattern, trace))
}

/// Map a [1,1,H,W] flow state from [-1,1] to a clamped [0,1] grid.
fn to_unit_grid(x: &ArrayD<f64>) -> Grid {
    let (h, w) = (x.shape()[2], x.shape()[3]);
    Grid::from_fn(h, w, |r, c| (0.5 * (x[[0, 0, r, c]] + 1.0)).clamp(0.0, 1.0))
}

/// Dump a trace as PGM frames plus a CSV of per-evaluation norms.
pub fn dump_trace(dir: &std::path::Path, trace: &ODETrace, plate: &PlateConfig) -> Result<(), OptError> {
    std::fs::create_dir_all(dir)?;
    for (i, (t, g)) in trace.snapshots.iter().enumerate() {
        let p = BeadingPattern::new(g.clone(), plate);
        platebead_core::io::write_pgm(&dir.join(format!("frame_{i:03}_t{t:.2}.pgm")), &p)?;
    }
    let mut csv = String::from("t,guided,v_flow_norm,guidance_norm,objective\n");
    for r in &trace.records {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            r.guided as u8,
            r.v_flow_norm,
            r.guidance_norm,
            r.objective.map_or(String::new(), |j| j.to_string())
        ));
    }
    std::fs::write(dir.join("trace.csv"), csv)?;
    Ok(())
}
