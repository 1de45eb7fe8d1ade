use cgdare::fixtures::random::{regular_triple, seeded, stein_shift_family, structured_triple, symmetric};
use cgdare::fixtures::{free_subspace_solution, free_subspace_triple, gdare_only_solution, gdare_only_triple};
use cgdare::numerics::{image_basis, is_psd, kernel_basis, vstack, Matrix, Subspace, TolerancePolicy};
use cgdare::popov::{classify_solution, kernel_condition_holds, lx, x_quantities, SolutionClass};
use cgdare::riccati::{solve_min_psd, SolveStatus};
use proptest::prelude::*;
use rand::Rng;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

fn converged(triple: &cgdare::PopovTriple, tol: &TolerancePolicy) -> Option<Matrix> {
    let report = solve_min_psd(triple, tol).ok()?;
    (report.status == SolveStatus::Converged).then_some(report.x_bar)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn g_x_is_the_projector_onto_ker_r_x(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let problem = structured_triple(&mut rng);
        let t = &problem.triple;
        let x = if rng.random_bool(0.5) {
            converged(t, &tol()).unwrap()
        } else {
            symmetric(&mut rng, t.n()) * 0.5
        };
        let xq = x_quantities(t, &x, &tol()).unwrap();
        let g = &xq.g_x;
        let m = t.m();
        prop_assert!((g * g - g).norm() <= 1e-12);
        prop_assert!((g - g.transpose()).norm() <= 1e-14);
        prop_assert!((&xq.r_x * g).norm() <= 1e-9 * (1.0 + xq.r_x.norm()));
        prop_assert!((&xq.r_x_pinv * &xq.r_x + g - Matrix::identity(m, m)).norm() <= 1e-9);
        let im_g = image_basis(g, &tol());
        let ker_r = kernel_basis(&xq.r_x, &tol());
        prop_assert!(im_g.equals(&ker_r, &tol()));
        prop_assert!((&xq.a_x - (t.a() - t.b() * &xq.k_x)).norm() <= 1e-14 * (1.0 + xq.a_x.norm()));
    }

    #[test]
    fn q0_x_factors_through_c_x(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let t = regular_triple(&mut rng, n, m);
        let x = converged(&t, &tol()).unwrap();
        let xq = x_quantities(&t, &x, &tol()).unwrap();
        prop_assume!(is_psd(&xq.pi_x, &tol()));
        let scale = 1.0 + xq.q0_x.norm();
        prop_assert!((&xq.q0_x - xq.c_x.transpose() * &xq.c_x).norm() <= 1e-8 * scale);
        // X = A_Xᵀ X A_X + Q0_X at a solution.
        let lyap = xq.a_x.transpose() * &x * &xq.a_x + &xq.q0_x;
        prop_assert!((lyap - &x).norm() <= 1e-7 * (1.0 + x.norm()));
    }

    #[test]
    fn residual_is_the_closed_loop_compression_of_pi_x(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let t = regular_triple(&mut rng, n, m);
        let x = symmetric(&mut rng, n);
        let xq = x_quantities(&t, &x, &tol()).unwrap();
        let closing = vstack(&Matrix::identity(n, n), &(-&xq.k_x));
        let compressed = closing.transpose() * &xq.pi_x * &closing;
        prop_assert!((compressed - xq.residual()).norm() <= 1e-9 * (1.0 + xq.pi_x.norm() * closing.norm().powi(2)));
    }

    #[test]
    fn lx_is_linear_and_completes_pi(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let t = regular_triple(&mut rng, n, m);
        let x = symmetric(&mut rng, n);
        let y = symmetric(&mut rng, n);
        let combined = lx(&t, &(&x * alpha + &y * beta)).unwrap();
        let separate = lx(&t, &x).unwrap() * alpha + lx(&t, &y).unwrap() * beta;
        prop_assert!((combined - separate).norm() <= 1e-12 * (1.0 + t.a().norm()).powi(2) * 10.0);
        let xq = x_quantities(&t, &x, &tol()).unwrap();
        prop_assert!((&xq.pi_x - t.popov_matrix() - lx(&t, &x).unwrap()).norm() <= 1e-12 * (1.0 + xq.pi_x.norm()));
        prop_assert!(lx(&t, &Matrix::zeros(n, n)).unwrap().norm() == 0.0);
    }

    #[test]
    fn psd_gdare_solutions_meet_the_kernel_condition(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let problem = structured_triple(&mut rng);
        let t = &problem.triple;
        let x = converged(t, &tol()).unwrap();
        prop_assert!(is_psd(&x, &tol()));
        prop_assert!(kernel_condition_holds(t, &x, &tol()).unwrap());
        prop_assert!(classify_solution(t, &x, &tol()).unwrap().solves_cgdare());
    }

    #[test]
    fn dare_classification_survives_tightening(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let t = regular_triple(&mut rng, n, m);
        let x = converged(&t, &tol().tightened(100.0));
        prop_assume!(x.is_some());
        let x = x.unwrap();
        prop_assert_eq!(classify_solution(&t, &x, &tol()).unwrap(), SolutionClass::Dare);
        prop_assert_eq!(classify_solution(&t, &x, &tol().tightened(10.0)).unwrap(), SolutionClass::Dare);
    }

    #[test]
    fn cgdare_solutions_share_ker_r_x(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let family = stein_shift_family(&mut rng, 4);
        let t = &family.triple;
        let kernels: Vec<_> = family
            .solutions
            .iter()
            .map(|x| {
                Subspace::from_orthonormal(x_quantities(t, x, &tol()).unwrap().ker_r_x)
            })
            .collect();
        for x in &family.solutions {
            prop_assert!(classify_solution(t, x, &tol()).unwrap().solves_cgdare());
        }
        for pair in kernels.windows(2) {
            prop_assert!(pair[0].equals(&pair[1], &tol()));
        }
    }
}

#[test]
fn fixture_classifications_are_stable_under_tightening() {
    let t = free_subspace_triple().unwrap();
    let x = free_subspace_solution();
    let g = gdare_only_triple().unwrap();
    let y = gdare_only_solution();
    for policy in [tol(), tol().tightened(10.0)] {
        assert_eq!(classify_solution(&t, &x, &policy).unwrap(), SolutionClass::Cgdare);
        assert_eq!(classify_solution(&g, &y, &policy).unwrap(), SolutionClass::GdareOnly);
    }
}

#[test]
fn zero_candidate_satisfies_the_lmi() {
    let mut rng = seeded(7);
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=3);
        let t = regular_triple(&mut rng, n, m);
        assert!(cgdare::popov::drlmi_holds(&t, &Matrix::zeros(n, n), &tol()).unwrap());
    }
}
