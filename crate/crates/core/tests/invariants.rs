use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tvadmm_core::engine::{full_lambda_step, step, warm_start, FullLambdaState};
use tvadmm_core::graph::{arc_matrices, generate_random_graph, laplacian_spectrum};
use tvadmm_core::oracle::{check_lemma1, g_deviation, ContractionParams};
use tvadmm_core::process::{ar1_step, local_gradient, stationary_sample};
use tvadmm_core::{AdmmState, ArcMatrices, GammaConvention, Oracle, ProcessConfig};

fn pcfg(eps: f64, rows: usize, p: usize, n: usize) -> ProcessConfig {
    ProcessConfig {
        epsilon_ar: eps,
        rows_per_node: rows,
        p,
        n_nodes: n,
        seed: 0,
    }
}

fn range_residual(arcs: &ArcMatrices, v: &DVector<f64>) -> f64 {
    let e = arcs.e_o();
    let eig = SymmetricEigen::new(e.tr_mul(&e));
    let top = eig.eigenvalues.amax();
    let mut pinv = DMatrix::zeros(e.ncols(), e.ncols());
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 1e-10 * top {
            let c = eig.eigenvectors.column(j);
            pinv += c * c.transpose() / lam;
        }
    }
    (&e * pinv * e.tr_mul(v) - v).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frozen_problems_are_fejer_monotone(
        n in 3usize..7, p in 1usize..4, extra in 0usize..2, rho in 0.2f64..20.0, seed in 0u64..1000,
    ) {
        let g = generate_random_graph(n, 0.6, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let th = stationary_sample(&pcfg(1.0, p + extra, p, n), &mut ChaCha8Rng::seed_from_u64(seed));
        let opt = Oracle::from_arcs(&arcs).unwrap().solve(&th).unwrap();
        let mut state = AdmmState::zeros(&arcs, rho).unwrap();
        let mut last = g_deviation(&state, &opt);
        for _ in 0..150 {
            state = step(&state, &th, &arcs).unwrap();
            let d = g_deviation(&state, &opt);
            prop_assert!(d <= last + 1e-10 * (1.0 + last), "{d} > {last}");
            last = d;
        }
    }

    #[test]
    fn static_linear_rate(n in 3usize..7, p in 1usize..4, rho in 0.5f64..10.0, seed in 0u64..1000) {
        let g = generate_random_graph(n, 0.6, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let s = laplacian_spectrum(&g, GammaConvention::SecondLargest).unwrap();
        let oracle = Oracle::new(&arcs, &s);
        let th = stationary_sample(&pcfg(1.0, p + 1, p, n), &mut ChaCha8Rng::seed_from_u64(seed));
        let opt = oracle.solve(&th).unwrap();
        let params = ContractionParams::new(rho, 2.0, &s).unwrap();
        let cq = oracle.contraction(&opt, &opt, &params).unwrap();
        prop_assume!(cq.delta > 0.0);
        let mut state = AdmmState::zeros(&arcs, rho).unwrap();
        let d0 = g_deviation(&state, &opt);
        for _ in 0..100 {
            state = step(&state, &th, &arcs).unwrap();
        }
        let bound = d0 * (1.0 + cq.delta).powf(-50.0) + 1e-8;
        prop_assert!(g_deviation(&state, &opt) <= bound);
    }

    #[test]
    fn tracking_steps_satisfy_lemma1(
        n in 3usize..8, p in 1usize..4, rows in 1usize..5, eps in 0.0f64..0.3, rho in 0.5f64..20.0,
        seed in 0u64..1000, smallest in any::<bool>(),
    ) {
        let conv = if smallest { GammaConvention::SmallestNonzero } else { GammaConvention::SecondLargest };
        let g = generate_random_graph(n, 0.5, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let s = laplacian_spectrum(&g, conv).unwrap();
        let oracle = Oracle::new(&arcs, &s);
        let params = ContractionParams::new(rho, 2.0, &s).unwrap();
        let c = pcfg(eps, rows, p, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut th = stationary_sample(&c, &mut rng);
        let mut opt = oracle.solve(&th).unwrap();
        let mut state = AdmmState::zeros(&arcs, rho).unwrap();
        for _ in 0..60 {
            let next_th = ar1_step(&th, &c, &mut rng);
            let next = step(&state, &next_th, &arcs).unwrap();
            let next_opt = oracle.solve(&next_th).unwrap();
            let cq = oracle.contraction(&next_opt, &opt, &params).unwrap();
            let chk = check_lemma1(&state, &next, &opt, &next_opt, &cq);
            prop_assert!(chk.passed, "{:?}", chk);
            state = next;
            th = next_th;
            opt = next_opt;
        }
    }

    #[test]
    fn dual_iterates_stay_in_incidence_range(n in 3usize..7, p in 1usize..4, rows in 1usize..4, seed in 0u64..1000) {
        let g = generate_random_graph(n, 0.5, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let c = pcfg(0.2, rows, p, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut th = stationary_sample(&c, &mut rng);
        let mut state = AdmmState::zeros(&arcs, 3.0).unwrap();
        for _ in 0..50 {
            th = ar1_step(&th, &c, &mut rng);
            state = step(&state, &th, &arcs).unwrap();
            prop_assert!(range_residual(&arcs, &state.alpha) <= 1e-9);
        }
    }

    #[test]
    fn full_lambda_stays_symmetric(n in 2usize..6, p in 1usize..3, rho in 0.5f64..10.0, seed in 0u64..1000) {
        let g = generate_random_graph(n, 0.7, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let c = pcfg(0.3, p, p, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut th = stationary_sample(&c, &mut rng);
        let mut full = FullLambdaState::zeros(&arcs, rho).unwrap();
        for _ in 0..40 {
            th = ar1_step(&th, &c, &mut rng);
            full = full_lambda_step(&full, &th, &arcs).unwrap();
            prop_assert!(full.symmetry_defect() <= 1e-10);
        }
    }

    #[test]
    fn optimum_increment_identity(n in 2usize..8, p in 1usize..4, seed in 0u64..1000) {
        let g = generate_random_graph(n, 0.5, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let oracle = Oracle::from_arcs(&arcs).unwrap();
        let c = pcfg(0.1, p, p, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = stationary_sample(&c, &mut rng);
        let b = ar1_step(&a, &c, &mut rng);
        let (oa, ob) = (oracle.solve(&a).unwrap(), oracle.solve(&b).unwrap());
        let dz = (&ob.z_star - &oa.z_star).norm();
        let dx = (&ob.x_star - &oa.x_star).norm();
        let ratio = (arcs.m_arcs() as f64 / n as f64).sqrt();
        prop_assert!((dz - ratio * dx).abs() <= 1e-10 * (1.0 + dz));
    }

    #[test]
    fn gradient_ignores_null_space_directions(n in 2usize..6, p in 2usize..5, seed in 0u64..1000, t in -5.0f64..5.0) {
        // A single row per node and n < p leaves the aggregate Gram singular.
        prop_assume!(n < p);
        let g = generate_random_graph(n, 0.8, seed).unwrap();
        let arcs = arc_matrices(&g, p).unwrap();
        let th = stationary_sample(&pcfg(1.0, 1, p, n), &mut ChaCha8Rng::seed_from_u64(seed));
        let opt = Oracle::from_arcs(&arcs).unwrap().solve(&th).unwrap();
        prop_assert!(!opt.is_unique_primal);
        let mut gram = DMatrix::zeros(p, p);
        for i in 0..n {
            gram += th.gram(i);
        }
        let eig = SymmetricEigen::new(gram);
        let j = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(j).into_owned() * t;
        for i in 0..n {
            let g0 = local_gradient(&th, i, &opt.x_bar).unwrap();
            let g1 = local_gradient(&th, i, &(&opt.x_bar + &v)).unwrap();
            prop_assert!((g1 - g0).amax() <= 1e-9);
        }
    }
}

#[test]
fn warm_started_duals_stay_in_range() {
    let g = generate_random_graph(6, 0.5, 3).unwrap();
    let arcs = arc_matrices(&g, 3).unwrap();
    let c = pcfg(0.05, 3, 3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut th = stationary_sample(&c, &mut rng);
    let ws = warm_start(&th, &arcs, 2.0, 1e-6, 1_000_000).unwrap();
    assert!(ws.distance <= 1e-6);
    let mut state = ws.state;
    assert!(range_residual(&arcs, &state.alpha) <= 1e-9);
    for _ in 0..20 {
        th = ar1_step(&th, &c, &mut rng);
        state = step(&state, &th, &arcs).unwrap();
        assert!(range_residual(&arcs, &state.alpha) <= 1e-9);
    }
}
