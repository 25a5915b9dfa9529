//! Definition-level oracles for the morphology and postprocessing pipeline.

use platebead_core::constraints::{
    self, binarize, check_c1_c3, check_c4, compliance, open_close, StructuringElement,
};
use platebead_core::grid::{Grid, Mask};
use platebead_core::pattern::{sample_pattern, GenConfig, PatternSpace};
use platebead_core::types::{BeadingPattern, PlateConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force erosion straight from the definition.
fn erode_oracle(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    Mask::from_fn(mask.h, mask.w, |r, c| {
        se.offsets
            .iter()
            .all(|&(dr, dc)| mask.get_padded(r as isize + dr, c as isize + dc, pad))
    })
}

fn dilate_oracle(mask: &Mask, se: &StructuringElement, pad: bool) -> Mask {
    Mask::from_fn(mask.h, mask.w, |r, c| {
        se.offsets
            .iter()
            .any(|&(dr, dc)| mask.get_padded(r as isize + dr, c as isize + dc, pad))
    })
}

fn open_close_oracle(mask: &Mask, se: &StructuringElement) -> Mask {
    let opened = dilate_oracle(&erode_oracle(mask, se, false), se, false);
    erode_oracle(&dilate_oracle(&opened, se, false), se, false)
}

/// C4 oracle: exhaustively try every disc placement for every pixel.
/// Out-of-grid area counts as background.
fn check_c4_oracle(mask: &Mask, se: &StructuringElement) -> Mask {
    let valid_at = |r: usize, c: usize| -> bool {
        let phase = mask.get(r, c);
        // disc centered anywhere such that (r,c) is inside it
        let centers: Vec<_> =
            se.offsets.iter().map(|&(dr, dc)| (r as isize - dr, c as isize - dc)).collect();
        centers.into_iter().any(|(cr, cc)| {
            se.offsets
                .iter()
                .all(|&(dr, dc)| mask.get_padded(cr + dr, cc + dc, false) == phase)
        })
    };
    Mask::from_fn(mask.h, mask.w, |r, c| !valid_at(r, c))
}

fn desk_space() -> PatternSpace {
    PatternSpace::desk(PlateConfig::free_rotation())
}

#[test]
fn binarize_trivials() {
    let all_high = Grid::from_fn(4, 5, |_, _| 0.9);
    assert!(binarize(&all_high, 0.5).data.iter().all(|&b| b));
    let all_low = Grid::from_fn(4, 5, |_, _| 0.1);
    assert!(binarize(&all_low, 0.5).data.iter().all(|&b| !b));
    let checker = Grid::from_fn(4, 4, |r, c| if (r + c) % 2 == 0 { 0.4 } else { 0.6 });
    let m = binarize(&checker, 0.5);
    for r in 0..4 {
        for c in 0..4 {
            assert_eq!(m.get(r, c), (r + c) % 2 == 1);
        }
    }
}

#[test]
fn open_close_matches_oracle_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let mask = Mask::from_fn(32, 32, |_, _| rng.gen_bool(0.5));
        let d = [1.0, 2.0, 3.0, 5.0][trial % 4];
        let se = StructuringElement::disc_diameter_px(d);
        assert_eq!(open_close(&mask, &se), open_close_oracle(&mask, &se), "trial {trial}");
    }
}

#[test]
fn check_c4_matches_oracle_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..50 {
        let mask = Mask::from_fn(32, 32, |_, _| rng.gen_bool(0.5));
        let d = [2.0, 3.0, 4.0, 5.0][trial % 4];
        let se = StructuringElement::disc_diameter_px(d);
        assert_eq!(check_c4(&mask, &se), check_c4_oracle(&mask, &se), "trial {trial}");
    }
}

#[test]
fn opening_keeps_wide_blocks_and_removes_narrow_ones() {
    // synthetic fine grid: pitch 1 mm, l_min 10 mm -> disc diameter 10 px
    let se = StructuringElement::disc_diameter_px(10.0);
    // 15 x 30 px block (1.5 l_min thick), away from the border
    let wide = Mask::from_fn(40, 40, |r, c| (12..27).contains(&r) && (5..35).contains(&c));
    let kept = open_close(&wide, &se);
    for i in 0..kept.data.len() {
        assert!(!kept.data[i] || wide.data[i], "open_close is anti-extensive here");
    }
    // edge midpoints survive; only the four corners get rounded
    assert!(kept.get(12, 20) && kept.get(26, 20) && kept.get(19, 5) && kept.get(19, 34));
    assert!(kept.count() >= wide.count() - 4 * 15, "only corner rounding allowed");
    assert!(!kept.get(12, 5), "square corner cannot host the disc");
    // 5 px stripe (0.5 l_min): fully removed
    let narrow = Mask::from_fn(40, 40, |r, c| (18..23).contains(&r) && (5..35).contains(&c));
    assert_eq!(open_close(&narrow, &se).count(), 0);
}

#[test]
fn open_close_empty_is_empty() {
    let se = StructuringElement::disc_diameter_px(4.0);
    let empty = Mask::filled(16, 16, false);
    assert_eq!(open_close(&empty, &se), empty);
}

#[test]
fn c1_flat_and_edge_cases() {
    let sp = desk_space();
    let params = sp.constraint_params();
    let flat = BeadingPattern::flat(&sp.plate, sp.h, sp.w);
    let (c1, c2, c3) = check_c1_c3(&flat, &params);
    assert_eq!(c1.count() + c2.count() + c3.count(), 0);

    // full-height pixel on the boundary row is a C1 violation
    let mut edge = flat.clone();
    edge.grid.set(0, 10, 1.0);
    let (c1, _, _) = check_c1_c3(&edge, &params);
    assert!(c1.get(0, 10));

    // nonzero pixel 5 mm from the edge: use a fine grid where a pixel center
    // lands at exactly 5 mm (pitch 10 mm -> first row center at 5 mm)
    let fine = PatternSpace::new(sp.plate.clone(), 60, 90);
    let mut p = BeadingPattern::flat(&fine.plate, fine.h, fine.w);
    assert!((p.pixel_y(0) - 0.005).abs() < 1e-12);
    p.grid.set(0, 45, 0.7);
    let (c1, _, _) = check_c1_c3(&p, &fine.constraint_params());
    assert!(c1.get(0, 45));
}

#[test]
fn c3_flags_steep_steps() {
    // pitch 5 mm, bead height 20 mm: a unit step has slope 4 > tan(70 deg) = 2.747
    let plate = PlateConfig::free_rotation();
    let sp = PatternSpace::new(plate, 120, 180);
    let params = sp.constraint_params();
    let mut p = BeadingPattern::flat(&sp.plate, sp.h, sp.w);
    assert!((p.pixel_pitch_x - 0.005).abs() < 1e-12);
    for r in 40..80 {
        for c in 60..120 {
            p.grid.set(r, c, 1.0);
        }
    }
    let (_, _, c3) = check_c1_c3(&p, &params);
    assert!(c3.get(40, 90) && c3.get(39, 90), "both sides of the step flagged");
    assert!(!c3.get(60, 90), "interior of the plateau not flagged");
}

#[test]
fn c4_examples() {
    let se = StructuringElement::disc_diameter_px(6.0);
    let none = Mask::filled(20, 20, false);
    assert_eq!(check_c4(&none, &se).count(), 0, "uniform background has no C4 violations");

    // solid foreground: out-of-grid counts as background, so the corners are
    // flagged (no in-phase disc reaches them) but edge midpoints are fine
    let all = Mask::filled(20, 20, true);
    let report = check_c4(&all, &se);
    assert!(report.get(0, 0) && report.get(19, 19));
    assert!(!report.get(0, 10));
    for r in 3..17 {
        for c in 3..17 {
            assert!(!report.get(r, c), "interior pixel ({r},{c}) flagged");
        }
    }

    let mut single = Mask::filled(20, 20, false);
    single.set(10, 10, true);
    assert!(check_c4(&single, &se).get(10, 10), "isolated pixel flagged");

    // two solid half-planes separated by a 0.6*l_min gap: gap pixels flagged
    let gap = Mask::from_fn(30, 30, |r, _| r < 12 || r >= 16);
    let report = check_c4(&gap, &se);
    assert!(report.get(13, 15) && report.get(14, 15));
    assert!(!report.get(5, 15));
}

#[test]
fn compliance_trivials() {
    let sp = desk_space();
    let params = sp.constraint_params();
    let flat = BeadingPattern::flat(&sp.plate, sp.h, sp.w);
    assert_eq!(compliance(&flat, &params).ratio, 1.0);

    // adding a violating pixel can only lower the ratio
    let mut bad = flat.clone();
    bad.grid.set(0, 0, 1.0);
    assert!(compliance(&bad, &params).ratio < 1.0);
}

#[test]
fn postprocess_flat_is_fixed_point() {
    let sp = desk_space();
    let params = sp.constraint_params();
    let flat = BeadingPattern::flat(&sp.plate, sp.h, sp.w);
    let post = constraints::postprocess(&flat, &params);
    assert_eq!(post.grid, flat.grid);
}

#[test]
fn postprocess_is_near_idempotent() {
    let sp = desk_space();
    let params = sp.constraint_params();
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let p = sample_pattern(&mut rng, &sp, &cfg);
        let pp = constraints::postprocess(&p, &params);
        let max_diff = p
            .grid
            .data
            .iter()
            .zip(&pp.grid.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        // one 8-bit quantization step of slack
        assert!(max_diff <= 1.0 / 255.0 + 1e-9, "max diff {max_diff}");
    }
}

#[test]
fn postprocess_enforces_c1_c2_c3() {
    let sp = desk_space();
    let params = sp.constraint_params();
    let cfg = GenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let p = sample_pattern(&mut rng, &sp, &cfg);
        let (c1, c2, c3) = check_c1_c3(&p, &params);
        assert_eq!(c1.count(), 0, "C1 must vanish after postprocess");
        assert_eq!(c2.count(), 0, "C2 must vanish after postprocess");
        let c3_frac = c3.count() as f64 / (sp.h * sp.w) as f64;
        assert!(c3_frac <= 0.005, "C3 fraction {c3_frac}");
    }
}

#[test]
fn postprocess_raises_compliance_of_a_sub_lmin_gap() {
    // fine grid (pitch 5 mm) with two bars separated by a 5 mm gap (< l_min)
    let plate = PlateConfig::free_rotation();
    let sp = PatternSpace::new(plate, 120, 180);
    let params = sp.constraint_params();
    let mut p = BeadingPattern::flat(&sp.plate, sp.h, sp.w);
    for r in 40..55 {
        for c in 40..140 {
            p.grid.set(r, c, 1.0);
        }
    }
    for r in 56..71 {
        for c in 40..140 {
            p.grid.set(r, c, 1.0);
        }
    }
    let before = compliance(&p, &params).ratio;
    let post = constraints::postprocess(&p, &params);
    let after = compliance(&post, &params).ratio;
    assert!(after > before, "compliance {before} -> {after} must increase");
    assert!(after >= 0.998);
}

#[test]
fn structuring_element_is_quarter_turn_symmetric() {
    for d in [1.0, 2.0, 3.5, 7.0, 10.0] {
        let se = StructuringElement::disc_diameter_px(d);
        for &(dr, dc) in &se.offsets {
            assert!(se.offsets.contains(&(-dc, dr)), "rotating ({dr},{dc}) leaves the SE");
        }
        assert!(se.offsets.contains(&(0, 0)));
    }
}
