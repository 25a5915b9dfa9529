//! Flow-matching training on toy datasets and the guided ODE sampler:
//! closed-form velocity checks, sampling quality, evaluation accounting,
//! guidance norms and determinism.

use std::sync::OnceLock;

use ndarray::{ArrayD, IxDyn};
use platebead_core::grid::Grid;
use platebead_core::pattern::PatternSpace;
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_nn::embed::embed_batch;
use platebead_nn::params::bind_frozen;
use platebead_nn::{Tape, UNet, UNetConfig};
use platebead_opt::baselines::surrogate_objective;
use platebead_opt::flow::{
    beta_schedule, guided_sample, train_flow, FlowModel, FlowTrainConfig, GuidanceConfig,
};
use platebead_opt::surrogate::{draw_noise, SurrogateModel, EMB_DIM};
use platebead_opt::{NfeCounter, ObjectiveSpec, OptError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: usize = 8;
const W: usize = 12;

fn space() -> PatternSpace {
    PatternSpace::new(PlateConfig::free_rotation(), H, W)
}

/// Unguided velocity of a flow model at (x, t).
fn flow_velocity(model: &FlowModel, x: &ArrayD<f64>, t: f64) -> ArrayD<f64> {
    let mut tape = Tape::new();
    let bound = bind_frozen(&mut tape, &model.params);
    let xv = tape.constant(x.clone());
    let ev = tape.constant(embed_batch(&[vec![t]], EMB_DIM));
    let v = model.net.forward(&mut tape, &bound, xv, ev);
    tape.value(v).clone()
}

fn l2(a: &ArrayD<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Untrained flow / surrogate pair (fixed random init) for sampler plumbing
/// tests that do not depend on generation quality.
fn untrained() -> &'static (FlowModel, SurrogateModel) {
    static M: OnceLock<(FlowModel, SurrogateModel)> = OnceLock::new();
    M.get_or_init(|| {
        let fnet = UNet::new(UNetConfig { emb_dim: EMB_DIM, ..UNetConfig::new(1, 1, 8) });
        let fparams = fnet.init_params(3);
        let snet = UNet::new(UNetConfig { emb_dim: EMB_DIM, ..UNetConfig::new(3, 1, 8) });
        let sparams = snet.init_params(4);
        (FlowModel { net: fnet, params: fparams }, SurrogateModel { net: snet, params: sparams })
    })
}

fn gcfg() -> GuidanceConfig {
    GuidanceConfig::new(ObjectiveSpec::mean_level(30.0, 130.0), vec![40.0, 80.0, 120.0])
}

fn half_plate(left: bool) -> Grid {
    Grid::from_fn(H, W, |_, c| {
        let beaded = if left { c < W / 2 } else { c >= W / 2 };
        if beaded {
            1.0
        } else {
            0.0
        }
    })
}

#[test]
fn one_point_flow_learns_the_closed_form_velocity() {
    // with a single training pattern the optimal velocity field is
    // v(x_t, t) = (x1 - x_t) / (1 - t), independent of the draw of x0
    let (h, w) = (4, 8);
    let p = Grid::from_fn(h, w, |r, c| {
        let dr = r as f64 - 1.5;
        let dc = c as f64 - 3.5;
        if dr * dr + dc * dc < 3.0 {
            1.0
        } else {
            0.0
        }
    });
    let cfg = FlowTrainConfig { epochs: 3000, batch: 16, base: 16, seed: 0, ..Default::default() };
    let (model, curve) = train_flow(&vec![p.clone(); 16], &cfg).unwrap();
    assert!(curve.last().unwrap() < &(0.1 * curve.first().unwrap()), "loss barely moved: {curve:?}");

    let x1 = ArrayD::from_shape_fn(IxDyn(&[1, 1, h, w]), |d| 2.0 * p.get(d[2], d[3]) - 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for &t in &[0.0, 0.3, 0.5, 0.7, 0.9] {
        for _ in 0..4 {
            let noise = draw_noise(&mut rng, h, w);
            let x0 = ArrayD::from_shape_fn(IxDyn(&[1, 1, h, w]), |d| noise.get(d[2], d[3]));
            let xt = &x1 * t + &x0 * (1.0 - t);
            let want = (&x1 - &xt).mapv(|v| v / (1.0 - t));
            let got = flow_velocity(&model, &xt, t);
            let rel = l2(&(&got - &want)) / l2(&want);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 0.1, "worst relative velocity error {worst}");
}

#[test]
fn two_point_flow_samples_near_the_training_patterns() {
    let a = half_plate(true);
    let b = half_plate(false);
    let mut patterns = Vec::new();
    for _ in 0..4 {
        patterns.push(a.clone());
        patterns.push(b.clone());
    }
    let cfg = FlowTrainConfig { epochs: 800, batch: 8, base: 8, seed: 1, ..Default::default() };
    let (model, _) = train_flow(&patterns, &cfg).unwrap();

    let dist = |g: &Grid, p: &Grid| -> f64 {
        g.data.iter().zip(&p.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let d_ab = dist(&a, &b);
    let space = space();
    let plate = space.plate.clone();
    let cfg_unguided = gcfg();
    let mut close = 0;
    let draws = 40;
    for seed in 0..draws {
        let mut nfe = NfeCounter::new();
        let (_, trace) =
            guided_sample(&model, None, &cfg_unguided, &plate, &space, 1000 + seed, &mut nfe, None)
                .unwrap();
        let g = trace.pre_postprocess.unwrap();
        let nearest = dist(&g, &a).min(dist(&g, &b));
        if nearest < 0.1 * d_ab {
            close += 1;
        }
    }
    assert!(close * 100 >= draws * 95, "only {close}/{draws} draws near a training pattern");
}

#[test]
fn midpoint_evaluation_accounting() {
    let (flow, surrogate) = untrained();
    let space = space();
    let plate = space.plate.clone();
    let cfg = gcfg();
    let mut nfe = NfeCounter::new();
    let (_, trace) =
        guided_sample(flow, Some(surrogate), &cfg, &plate, &space, 7, &mut nfe, None).unwrap();
    // 20 midpoint steps at h = 0.05 -> 40 velocity evaluations, the 30 with
    // t < 0.75 guided; each guided evaluation costs one surrogate call per
    // guidance frequency
    assert_eq!(trace.velocity_evals, 40);
    assert_eq!(trace.guided_evals, 30);
    assert_eq!(nfe.total(), 30 * cfg.frequencies.len() as u64);
    for r in &trace.records {
        assert_eq!(r.guided, r.t < cfg.t_cutoff, "record at t = {}", r.t);
    }
}

#[test]
fn alpha_zero_matches_unguided_bitwise() {
    let (flow, surrogate) = untrained();
    let space = space();
    let plate = space.plate.clone();
    let mut off = gcfg();
    off.alpha = 0.0;
    let mut nfe_a = NfeCounter::new();
    let (pa, ta) =
        guided_sample(flow, Some(surrogate), &off, &plate, &space, 21, &mut nfe_a, None).unwrap();
    let mut nfe_b = NfeCounter::new();
    let (pb, tb) = guided_sample(flow, None, &gcfg(), &plate, &space, 21, &mut nfe_b, None).unwrap();
    assert_eq!(pa.grid.data, pb.grid.data);
    assert_eq!(
        ta.pre_postprocess.unwrap().data,
        tb.pre_postprocess.unwrap().data,
        "alpha = 0 must follow the identical arithmetic as unguided sampling"
    );
    assert_eq!(nfe_a.total(), 0);
    assert_eq!(nfe_b.total(), 0);
    assert_eq!(ta.guided_evals, 0);
}

#[test]
fn guidance_norm_follows_the_schedule() {
    let (flow, surrogate) = untrained();
    let space = space();
    let plate = space.plate.clone();
    let cfg = gcfg();
    let mut nfe = NfeCounter::new();
    let (_, trace) =
        guided_sample(flow, Some(surrogate), &cfg, &plate, &space, 13, &mut nfe, None).unwrap();
    let mut checked = 0;
    for r in &trace.records {
        if r.guided && !r.grad_zeroed {
            // the rescaled gradient has exactly the flow-velocity norm, so
            // ||guidance|| = alpha * beta(t) * ||v_flow||
            let want = cfg.alpha * beta_schedule(r.t) * r.v_flow_norm;
            assert!(
                (r.guidance_norm - want).abs() <= 1e-10 * want.max(1.0),
                "t = {}: |guidance| = {}, want {}",
                r.t,
                r.guidance_norm,
                want
            );
            checked += 1;
        }
    }
    assert!(checked >= 25, "only {checked} guided records with a usable gradient");
}

#[test]
fn sampling_is_seed_deterministic() {
    let (flow, surrogate) = untrained();
    let space = space();
    let plate = space.plate.clone();
    let cfg = gcfg();
    let mut n1 = NfeCounter::new();
    let (p1, t1) =
        guided_sample(flow, Some(surrogate), &cfg, &plate, &space, 99, &mut n1, Some(5)).unwrap();
    let mut n2 = NfeCounter::new();
    let (p2, t2) =
        guided_sample(flow, Some(surrogate), &cfg, &plate, &space, 99, &mut n2, Some(5)).unwrap();
    assert_eq!(p1.grid.data, p2.grid.data);
    assert_eq!(n1.total(), n2.total());
    assert_eq!(t1.records.len(), t2.records.len());
    for (a, b) in t1.records.iter().zip(&t2.records) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.v_flow_norm, b.v_flow_norm);
        assert_eq!(a.guidance_norm, b.guidance_norm);
    }
    assert_eq!(t1.snapshots.len(), 4);
}

#[test]
fn non_finite_parameters_are_reported() {
    let fnet = UNet::new(UNetConfig { emb_dim: EMB_DIM, ..UNetConfig::new(1, 1, 8) });
    let mut fparams = fnet.init_params(3);
    let (_, first) = fparams.at_mut(0);
    first.iter_mut().for_each(|v| *v = f64::NAN);
    let broken = FlowModel { net: fnet, params: fparams };
    let space = space();
    let plate = space.plate.clone();
    let mut nfe = NfeCounter::new();
    let err = guided_sample(&broken, None, &gcfg(), &plate, &space, 1, &mut nfe, None).unwrap_err();
    assert!(matches!(err, OptError::NonFinite(_)), "got {err:?}");
}

#[test]
fn guided_pool_lowers_the_surrogate_objective() {
    let (flow, surrogate) = untrained();
    let space = space();
    let plate = space.plate.clone();
    let cfg = gcfg();
    let pool = 160;
    let mut mean_guided = 0.0;
    let mut mean_unguided = 0.0;
    for seed in 0..pool {
        for (guided, acc) in
            [(true, &mut mean_guided), (false, &mut mean_unguided)]
        {
            let mut nfe = NfeCounter::new();
            let sur = if guided { Some(surrogate) } else { None };
            let (_, trace) =
                guided_sample(flow, sur, &cfg, &plate, &space, 5000 + seed, &mut nfe, None).unwrap();
            // score the raw ODE endpoint so the comparison is not washed out
            // by constraint postprocessing
            let raw = BeadingPattern::new(trace.pre_postprocess.unwrap(), &space.plate);
            let mut eval_nfe = NfeCounter::new();
            let j = surrogate_objective(
                surrogate,
                &raw,
                &plate,
                &cfg.objective,
                &cfg.frequencies,
                &mut eval_nfe,
            )
            .unwrap();
            *acc += j / pool as f64;
        }
    }
    assert!(
        mean_guided < mean_unguided,
        "guided pool mean {mean_guided} not below unguided {mean_unguided}"
    );
}
