use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sampled_lq::blocks::compute_all_blocks;
use sampled_lq::experiments::{converge, resolve_reference, ReferenceSpec};
use sampled_lq::oracle::{assemble_qp, cross_check};
use sampled_lq::problem::min_eigenvalue;
use sampled_lq::quadrature::{simpson_matrix, simpson_weights};
use sampled_lq::random::{random_case, random_problem};
use sampled_lq::registry;
use sampled_lq::riccati::{k_is_psd, value_function};
use sampled_lq::simulate::{cost_of, running_cost_on, PiecewiseConstantControl};
use sampled_lq::{propagate_interval, solve, transition_matrix, SamplingGrid};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transition_semigroup(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let p = random_problem(seed);
        let mut ts = [a, b, c];
        ts.sort_by(f64::total_cmp);
        let [r, s, t] = ts;
        let direct = transition_matrix(&p, t, r, 128).unwrap();
        let composed = transition_matrix(&p, t, s, 128).unwrap() * transition_matrix(&p, s, r, 128).unwrap();
        prop_assert!((direct - composed).norm() <= 1e-8);
    }

    #[test]
    fn blocks_ignore_initial_state(seed in 0u64..10_000, shift in -5.0f64..5.0) {
        let case = random_case(seed);
        let moved = case.problem.clone().with_initial_state(case.problem.q_a.add_scalar(shift));
        let a = compute_all_blocks(&case.problem, &case.grid, 8).unwrap();
        let b = compute_all_blocks(&moved, &case.grid, 8).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cost_is_nonnegative(seed in 0u64..10_000, u_seed in 0u64..1000) {
        let case = random_case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(u_seed);
        let values = (0..case.grid.len())
            .map(|_| DVector::from_fn(case.problem.m, |_, _| rng.random_range(-3.0..3.0)))
            .collect();
        let u = PiecewiseConstantControl::new(case.grid.clone(), values).unwrap();
        prop_assert!(cost_of(&case.problem, &u, 8).unwrap() >= -1e-12);
    }
}

#[test]
fn rk4_is_fourth_order() {
    let p = registry::lookup("timevarying-demo").unwrap().problem;
    let reference = transition_matrix(&p, 1.0, 0.0, 512).unwrap();
    let err = |m: usize| (transition_matrix(&p, 1.0, 0.0, m).unwrap() - &reference).norm();
    let ratio = err(4) / err(8);
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    let ratio = err(8) / err(16);
    assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn duhamel_input_term_matches_nested_quadrature() {
    for name in ["dontchev", "timevarying-demo"] {
        let p = registry::lookup(name).unwrap().problem;
        let grid = SamplingGrid::uniform(2, p.a, p.b).unwrap();
        let i = 1;
        let prop = propagate_interval(&p, &grid, i, 16).unwrap();
        let s_i = grid.times()[i];
        for k in [2usize, 8, 20, 32] {
            let nodes = &prop.nodes[..=k];
            let width = nodes[k] - nodes[0];
            let weights = simpson_weights(k + 1, width);
            let integrand = nodes.iter().map(|&s| {
                &prop.z[k] * transition_matrix(&p, s_i, s, 128).unwrap() * p.b_at(s)
            });
            let gamma = simpson_matrix(integrand, &weights).unwrap();
            assert!((gamma - &prop.gamma[k]).norm() <= 1e-7, "{name} k={k}");
        }
    }
}

#[test]
fn blocks_converge_under_refinement() {
    for seed in 0..6 {
        let case = random_case(seed);
        let coarse = compute_all_blocks(&case.problem, &case.grid, 64).unwrap();
        let fine = compute_all_blocks(&case.problem, &case.grid, 128).unwrap();
        for (a, b) in coarse.iter().zip(&fine) {
            let pairs = [
                (&a.zwz, &b.zwz),
                (&a.zbwz, &b.zbwz),
                (&a.zbwzb, &b.zbwzb),
                (&a.z_step, &b.z_step),
                (&a.zb, &b.zb),
                (&a.r_bar, &b.r_bar),
            ];
            for (x, y) in pairs {
                assert!((x - y).norm() <= 1e-8 * (1.0 + y.norm()), "seed {seed}: {:e} vs {:e}", (x - y).norm(), y.norm());
            }
            assert!((&a.zwz_omega_x - &b.zwz_omega_x).norm() <= 1e-8 * (1.0 + b.zwz_omega_x.norm()));
            assert!((a.wz_omega_x2 - b.wz_omega_x2).abs() <= 1e-8 * (1.0 + b.wz_omega_x2.abs()));
        }
    }
}

#[test]
fn tail_blocks_are_bitwise_identical() {
    for seed in [1u64, 2, 5, 8] {
        let case = random_case(seed);
        let full = compute_all_blocks(&case.problem, &case.grid, 8).unwrap();
        for j in 0..case.grid.len() {
            let tail_grid = case.grid.tail(j).unwrap();
            let tail_problem = case.problem.restarted(tail_grid.start(), case.problem.q_a.clone());
            let tail = compute_all_blocks(&tail_problem, &tail_grid, 8).unwrap();
            for (k, b) in tail.iter().enumerate() {
                let mut expected = full[j + k].clone();
                expected.index = k;
                assert_eq!(b, &expected, "seed {seed}, j {j}, k {k}");
            }
        }
    }
}

#[test]
fn riccati_psd_cascade_on_random_problems() {
    for seed in 0..200 {
        let case = random_case(seed);
        let blocks = compute_all_blocks(&case.problem, &case.grid, 8).unwrap();
        let sweep = sampled_lq::backward_sweep(&blocks, case.problem.s()).unwrap();
        for s in &sweep.steps {
            assert!(k_is_psd(&s.k), "seed {seed} step {}", s.index);
            assert!(s.t_factor.l().diagonal().iter().all(|&d| d > 0.0));
        }
    }
}

#[test]
fn bellman_identity_and_tail_resolve() {
    for seed in 0..12 {
        let case = random_case(seed);
        let p = &case.problem;
        let out = solve(p, &case.grid, 16).unwrap();
        let u = out.control();
        let q = out.trajectory.sample_states();
        for j in 0..case.grid.len() {
            let here = value_function(&out.sweep, j, &q[j]).unwrap();
            // The terminal value function sees the shifted state q(b) − q_b.
            let y_next = if j + 1 == case.grid.len() { &q[j + 1] - &p.q_b } else { q[j + 1].clone() };
            let next = value_function(&out.sweep, j + 1, &y_next).unwrap();
            let stage = running_cost_on(p, &u, &out.trajectory, j).unwrap();
            assert!((here - stage - next).abs() <= 1e-6 * (1.0 + here.abs()), "seed {seed} j {j}: {here} {stage} {next}");

            let tail_grid = case.grid.tail(j).unwrap();
            let restarted = p.restarted(tail_grid.start(), q[j].clone());
            let tail = solve(&restarted, &tail_grid, 16).unwrap();
            for (k, uk) in tail.solution.controls.iter().enumerate() {
                let diff = (uk - &out.solution.controls[j + k]).amax();
                assert!(diff <= 1e-8, "seed {seed} j {j} k {k}: {diff:e}");
            }
        }
        let simulated = out.solution.simulated_cost.unwrap();
        let v0 = value_function(&out.sweep, 0, &p.q_a).unwrap();
        assert!((v0 - simulated).abs() <= 1e-6 * (1.0 + simulated.abs()));
    }
}

#[test]
fn synthesis_improves_on_zero_and_averaged_controls() {
    for seed in 0..30 {
        let case = random_case(seed);
        let p = &case.problem;
        let out = solve(p, &case.grid, 8).unwrap();
        let best = out.solution.simulated_cost.unwrap();
        let zero = PiecewiseConstantControl::zeros(case.grid.clone(), p.m);
        let c0 = cost_of(p, &zero, 8).unwrap();
        assert!(best <= c0 + 1e-9 * (1.0 + c0), "seed {seed}");
    }
    let p = registry::lookup("double-integrator").unwrap().problem;
    let reference = resolve_reference(&p, ReferenceSpec::Fine(400), None, 8).unwrap();
    for run in converge(&p, &reference, &[1, 3, 7, 20], 8).unwrap() {
        assert!(run.row.cost_sampled <= run.row.cost_averaged + 1e-9);
    }
}

#[test]
fn costate_is_affine_in_state_at_samples() {
    for seed in 0..12 {
        let case = random_case(seed);
        let out = solve(&case.problem, &case.grid, 64).unwrap();
        let ps = out.costate.sample_costates();
        for (i, q) in out.solution.q_nodes.iter().take(case.grid.len()).enumerate() {
            let (k, j, _) = out.sweep.value_data(i).unwrap();
            let r = &ps[i] + k * q + j;
            assert!(r.norm() <= 1e-5 * (1.0 + ps[i].norm()), "seed {seed} i {i}: {:e}", r.norm());
        }
    }
}

#[test]
fn oracle_hessian_is_positive_definite_and_certified() {
    for seed in 0..15 {
        let case = random_case(seed);
        let qp = assemble_qp(&case.problem, &case.grid, 8).unwrap();
        assert_eq!(qp.hessian, qp.hessian.transpose());
        let c_r = case.problem.validation().unwrap().c_r;
        let h_min = case.grid.durations().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min_eigenvalue(&qp.hessian) >= c_r * h_min * (1.0 - 1e-6), "seed {seed}");
        let report = cross_check(&case.problem, &case.grid, 8).unwrap();
        assert!(report.certificate_norm <= 1e-9 * (1.0 + report.gradient_norm), "seed {seed}");
    }
}

#[test]
fn homogenized_problem_shares_gains() {
    let p = registry::lookup("timevarying-demo").unwrap().problem;
    let hom = sampled_lq::validate_problem(p.homogenized(), 9).unwrap();
    let grid = SamplingGrid::uniform(6, p.a, p.b).unwrap();
    let a = solve(&p, &grid, 16).unwrap();
    let b = solve(&hom, &grid, 16).unwrap();
    for (x, y) in a.sweep.steps.iter().zip(&b.sweep.steps) {
        assert!((&x.gain - &y.gain).norm() <= 1e-12 * (1.0 + x.gain.norm()));
        assert!(y.offset.iter().all(|&v| v == 0.0));
    }
    let _ = DMatrix::<f64>::zeros(1, 1);
}
