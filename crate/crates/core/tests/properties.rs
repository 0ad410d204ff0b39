mod common;

use common::*;
use patchfill::grouping::{build_groups, GroupingConfig};
use patchfill::pgm::{decode_pgm, encode_pgm};
use patchfill::solver::svt;
use patchfill::theory_lab::{phase_transition, PhaseConfig, SyntheticSpec};
use patchfill::*;
use proptest::prelude::*;
use rand::Rng;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Valid), Just(Boundary::Periodic), Just(Boundary::Symmetric)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svt_is_nonexpansive(seed in any::<u64>(), rows in 1usize..12, cols in 1usize..12, tau in 0.0f64..3.0) {
        let mut rng = RngSeed(seed).rng();
        let a = random_matrix(&mut rng, rows, cols);
        let b = random_matrix(&mut rng, rows, cols);
        let d = (svt(&a, tau).unwrap() - svt(&b, tau).unwrap()).norm();
        prop_assert!(d <= (a - b).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn svt_beats_random_perturbations(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, tau in 0.0f64..2.0) {
        let mut rng = RngSeed(seed).rng();
        let m = random_matrix(&mut rng, rows, cols);
        let x = svt(&m, tau).unwrap();
        let objective = |x: &nalgebra::DMatrix<f64>| tau * nuclear_norm(x) + 0.5 * (x - &m).norm_squared();
        let best = objective(&x);
        for _ in 0..100 {
            let eps = 10f64.powf(rng.random_range(-4.0..0.0));
            let p = random_matrix(&mut rng, rows, cols) * eps;
            prop_assert!(best <= objective(&(&x + p)) + 1e-10);
        }
    }

    #[test]
    fn masking_is_idempotent(seed in any::<u64>(), side in 1usize..12, m in 1usize..200) {
        let mut rng = RngSeed(seed).rng();
        let z = random_image(&mut rng, side);
        let s = sample_uniform(side, m, RngSeed(seed ^ 1)).unwrap();
        let once = apply_mask(&z, &s).unwrap();
        prop_assert_eq!(apply_mask(&once, &s).unwrap(), once.clone());
        for (i, &v) in once.pixels().iter().enumerate() {
            let hit = s.distinct().contains(&(i / side, i % side));
            prop_assert_eq!(v, if hit { z.pixels()[i] } else { 0.0 });
        }
    }

    #[test]
    fn lift_and_adjoint_are_adjoint(seed in any::<u64>(), side in 3usize..14, n in 1usize..4, b in boundary(), k in 1usize..4) {
        let mut rng = RngSeed(seed).rng();
        let cfg = PatchConfig::new(side, n.min(side), b).unwrap();
        let size = 1 + rng.random_range(0..cfg.anchor_count());
        let layout = PatchLayout::new(cfg, random_groups(&mut rng, &cfg, k, size)).unwrap();
        let z = random_image(&mut rng, side);
        let (rows, cols) = layout.block_shape();
        let m = GroupedPatchMatrix::from_blocks((0..k).map(|_| random_matrix(&mut rng, rows, cols)).collect());
        let lhs = lift(&z, &layout).unwrap().dot(&m);
        let rhs = z.dot(&adjoint_lift(&m, &layout));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + z.norm() * m.frobenius()));
    }

    #[test]
    fn tangent_projection_is_an_orthogonal_projector(seed in any::<u64>(), rows in 2usize..10, cols in 2usize..10, r in 1usize..3, k in 1usize..3) {
        let mut rng = RngSeed(seed).rng();
        let r = r.min(rows).min(cols);
        let base = GroupedPatchMatrix::from_blocks(
            (0..k).map(|_| random_matrix(&mut rng, rows, r) * random_matrix(&mut rng, r, cols)).collect(),
        );
        let t = TangentSpace::from_matrix(&base, 1e-10).unwrap();
        let draw = |rng: &mut _| GroupedPatchMatrix::from_blocks((0..k).map(|_| random_matrix(rng, rows, cols)).collect());
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let pa = t.project(&a).unwrap();
        let ppa = t.project(&pa).unwrap();
        prop_assert!((&ppa - &pa).frobenius() <= 1e-10 * (1.0 + a.frobenius()));
        let pb = t.project(&b).unwrap();
        prop_assert!((pa.dot(&b) - a.dot(&pb)).abs() <= 1e-10 * (1.0 + a.frobenius() * b.frobenius()));
        // base itself lies in T
        prop_assert!((&t.project(&base).unwrap() - &base).frobenius() <= 1e-10 * (1.0 + base.frobenius()));
    }

    #[test]
    fn grouping_is_deterministic(seed in any::<u64>(), b in boundary()) {
        let mut rng = RngSeed(seed).rng();
        let z = random_image(&mut rng, 12);
        let cfg = PatchConfig::new(12, 3, b).unwrap();
        let gcfg = GroupingConfig { k_groups: 5, group_size: 7, search_radius: 2 };
        let first = build_groups(&z, &gcfg, &cfg).unwrap();
        prop_assert_eq!(first.clone(), build_groups(&z, &gcfg, &cfg).unwrap());
        for g in first.groups() {
            prop_assert_eq!(g.len(), 7);
            prop_assert!(g.iter().all(|&a| cfg.is_valid_anchor(a)));
        }
    }

    #[test]
    fn pgm_round_trip(seed in any::<u64>(), side in 1usize..20) {
        let mut rng = RngSeed(seed).rng();
        let z = Image::from_fn(side, |_, _| rng.random_range(0..=255u8) as f64);
        for enc in [PgmEncoding::Ascii, PgmEncoding::Binary] {
            prop_assert_eq!(decode_pgm(&encode_pgm(&z, enc)).unwrap(), z.clone());
        }
    }

    #[test]
    fn mask_text_round_trip(seed in any::<u64>(), side in 1usize..16, m in 1usize..100) {
        let s = sample_uniform(side, m, RngSeed(seed)).unwrap();
        prop_assert_eq!(SampleSet::parse_mask_text(side, &s.to_mask_text()).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn phase_sweep_is_reproducible(seed in any::<u64>()) {
        let spec = SyntheticSpec { n_side: 8, components: 1, seed: RngSeed(seed), ..Default::default() };
        let layout = single_layout(8, 3, Boundary::Valid);
        let pcfg = PhaseConfig { m_grid: vec![20, 48], trials: 2, success_tol: 1e-3 };
        let acfg = AdmmConfig { max_iters: 60, ..Default::default() };
        let a = phase_transition(&spec, &layout, &pcfg, &acfg, RngSeed(seed ^ 7)).unwrap();
        let b = phase_transition(&spec, &layout, &pcfg, &acfg, RngSeed(seed ^ 7)).unwrap();
        prop_assert_eq!(a, b);
    }
}
