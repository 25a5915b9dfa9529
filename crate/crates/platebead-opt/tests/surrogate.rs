//! Surrogate training and prediction properties on a small FEM-generated
//! dataset (reduced mesh and pattern resolution to keep runtimes short).

use std::sync::OnceLock;

use platebead_core::grid::Grid;
use platebead_core::pattern::{sample_pattern, GenConfig, PatternSpace};
use platebead_core::types::{BeadingPattern, PlateConfig};
use platebead_opt::dataset::{generate, Dataset, DatasetFlavor, GenOptions};
use platebead_opt::surrogate::{
    draw_noise, flip_arrays, load_blob, make_training_input, predict_frf, train_surrogate,
    SurrogateModel, TrainConfig,
};
use platebead_opt::NfeCounter;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts(count: usize, seed: u64) -> GenOptions {
    GenOptions {
        count,
        flavor: DatasetFlavor::Surrogate,
        n_freqs: 15,
        fmin: 1.0,
        fmax: 300.0,
        mesh_nx: 16,
        mesh_ny: 12,
        pattern_h: 24,
        pattern_w: 36,
        seed,
    }
}

fn dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| {
        let (ds, report) = generate(&PlateConfig::free_rotation(), &opts(64, 11)).unwrap();
        assert!(report.skipped.is_empty(), "FEM failures: {:?}", report.skipped);
        ds
    })
}

fn model() -> &'static (SurrogateModel, Vec<f64>) {
    static M: OnceLock<(SurrogateModel, Vec<f64>)> = OnceLock::new();
    M.get_or_init(|| {
        let cfg = TrainConfig { epochs: 10, base: 8, seed: 1, ..TrainConfig::default() };
        train_surrogate(dataset(), &cfg).unwrap()
    })
}

#[test]
fn training_loss_trends_down_over_ten_epochs() {
    let (_, curve) = model();
    assert_eq!(curve.len(), 10);
    let rises = curve.windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(rises <= 2, "{rises} non-monotone epochs in {curve:?}");
    assert!(
        curve.last().unwrap() < curve.first().unwrap(),
        "no overall improvement: {curve:?}"
    );
}

#[test]
fn training_is_seed_reproducible() {
    let mut small = dataset().clone();
    small.samples.truncate(8);
    let cfg = TrainConfig { epochs: 2, base: 8, seed: 7, ..TrainConfig::default() };
    let (a, ca) = train_surrogate(&small, &cfg).unwrap();
    let (b, cb) = train_surrogate(&small, &cfg).unwrap();
    assert_eq!(ca, cb);
    for ((na, va), (nb, vb)) in a.params.iter().zip(b.params.iter()) {
        assert_eq!(na, nb);
        assert_eq!(va, vb, "parameter {na} differs between identical runs");
    }
}

#[test]
fn training_input_examples() {
    let plate = PlateConfig::free_rotation();
    let grid = Grid::from_fn(8, 12, |r, c| ((r + c) % 3) as f64 / 2.0);
    let pattern = BeadingPattern::new(grid, &plate);
    let zero = Grid::zeros(8, 12);

    // t = 1: channel equals the clean rescaled pattern
    let x = make_training_input(&pattern, 0.3, 0.2, 50.0, 1.0, &zero);
    for r in 0..8 {
        for c in 0..12 {
            let want = 2.0 * pattern.grid.get(r, c) - 1.0;
            assert!((x[[0, r, c]] - want).abs() < 1e-12);
        }
    }
    // t = 0.25 with a forced zero noise draw: channel = 0.25 * g
    let x = make_training_input(&pattern, 0.3, 0.2, 50.0, 0.25, &zero);
    for r in 0..8 {
        for c in 0..12 {
            let want = 0.25 * (2.0 * pattern.grid.get(r, c) - 1.0);
            assert!((x[[0, r, c]] - want).abs() < 1e-12);
        }
    }
    // load blob integrates to one
    let blob = load_blob(&pattern, 0.3, 0.2);
    let sum: f64 = blob.data.iter().sum();
    assert!((sum - 1.0).abs() < 1e-6);
    // stiffness channel is constant and normalized
    assert!((x[[2, 3, 5]] - 0.5).abs() < 1e-12);
}

#[test]
#[should_panic(expected = "outside [0.25, 1]")]
fn training_input_rejects_small_t() {
    let plate = PlateConfig::free_rotation();
    let pattern = BeadingPattern::flat(&plate, 8, 12);
    let zero = Grid::zeros(8, 12);
    let _ = make_training_input(&pattern, 0.3, 0.2, 0.0, 0.2, &zero);
}

#[test]
fn flip_augmentation_keeps_channels_aligned() {
    let plate = PlateConfig::free_rotation();
    let pattern = BeadingPattern::flat(&plate, 8, 12);
    // flipping the blob grid equals the blob of the mirrored load position
    let blob = load_blob(&pattern, 0.3, 0.2);
    let mirrored = load_blob(&pattern, plate.length - 0.3, 0.2);
    let flipped = blob.flip_cols();
    for i in 0..blob.data.len() {
        assert!((flipped.data[i] - mirrored.data[i]).abs() < 1e-12);
    }
    // flip_arrays is an involution and flips input and target jointly
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = draw_noise(&mut rng, 8, 12);
    let mut x = make_training_input(&pattern, 0.3, 0.2, 10.0, 0.8, &noise);
    let mut y = ndarray::ArrayD::from_shape_fn(ndarray::IxDyn(&[1, 8, 12]), |d| {
        (d[1] * 12 + d[2]) as f64
    });
    let (x0, y0) = (x.clone(), y.clone());
    flip_arrays(&mut x, &mut y, true, true);
    assert_eq!(x[[0, 0, 0]], x0[[0, 7, 11]]);
    assert_eq!(y[[0, 0, 0]], y0[[0, 7, 11]]);
    flip_arrays(&mut x, &mut y, true, true);
    assert_eq!(x, x0);
    assert_eq!(y, y0);
}

#[test]
fn prediction_is_pure_and_counts_one_nfe_per_frequency() {
    let (model, _) = model();
    let ds = dataset();
    let s = &ds.samples[0];
    let pattern = ds.pattern_of(s);
    let plate = ds.plate_for(s);
    let freqs: Vec<f64> = (1..=9).map(|i| 30.0 * i as f64).collect();
    let mut nfe = NfeCounter::new();
    let (frf_a, _) = predict_frf(model, &pattern, &plate, &freqs, &mut nfe).unwrap();
    assert_eq!(nfe.total(), 9);
    let (frf_b, _) = predict_frf(model, &pattern, &plate, &freqs, &mut nfe).unwrap();
    assert_eq!(nfe.total(), 18);
    assert_eq!(frf_a.levels, frf_b.levels, "surrogate evaluation is not pure");
    assert!(frf_a.levels.iter().all(|l| l.is_finite()));
}

#[test]
fn prediction_reacts_to_the_load_position() {
    let (model, _) = model();
    let ds = dataset();
    let space = PatternSpace::new(ds.plate.clone(), ds.pattern_h, ds.pattern_w);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let freqs = [40.0, 90.0, 150.0, 210.0];
    let mut moved = 0;
    let total = 20;
    for _ in 0..total {
        let pattern = sample_pattern(&mut rng, &space, &GenConfig::default());
        let mut a = ds.plate.clone();
        a.load_x = 0.25;
        a.load_y = 0.30;
        let mut b = a.clone();
        b.load_x = 0.55; // 30 cm away
        let mut nfe = NfeCounter::new();
        let (fa, _) = predict_frf(model, &pattern, &a, &freqs, &mut nfe).unwrap();
        let (fb, _) = predict_frf(model, &pattern, &b, &freqs, &mut nfe).unwrap();
        let la: f64 = fa.levels.iter().sum::<f64>() / freqs.len() as f64;
        let lb: f64 = fb.levels.iter().sum::<f64>() / freqs.len() as f64;
        if (la - lb).abs() > 1e-9 {
            moved += 1;
        }
    }
    assert!(moved * 10 >= total * 9, "only {moved}/{total} patterns reacted to the load move");
}
