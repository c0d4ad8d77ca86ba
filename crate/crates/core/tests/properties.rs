//! Property tests for the structural invariants: operator monotonicity and
//! homogeneity, rectangularity, enumeration order, validation completeness,
//! spectral agreement between independent routes, and return-time equations.

use proptest::prelude::*;

use polyiter_core::game::{enumerate_min_policies, GameInstance, MinPolicy, DEFAULT_ENUM_CAP};
use polyiter_core::generate::{generate, FamilyKind, GeneratorSpec, Xoshiro256StarStar};
use polyiter_core::oracle;
use polyiter_core::perron::{
    self, family_from_fixed_min, family_from_instance, HullMode, MatrixFamily, PerronConfig,
};
use polyiter_core::policy_iteration::{
    certify_mean_trace, solve_discounted, solve_mean, SolveConfig, TraceValue,
};
use polyiter_core::shapley::{
    eval_operator, eval_policy_min, eval_policy_pair, improve_min, ImprovementConfig,
};
use polyiter_core::{linalg, transforms};

fn substochastic(seed: u64, n: usize, lambda: f64) -> GameInstance {
    generate(&GeneratorSpec {
        n,
        a_max: 3,
        b_max: 3,
        seed,
        family: FamilyKind::SubstochasticCap { lambda },
    })
    .expect("generator spec is valid")
}

fn renewal(seed: u64, n: usize, p_min: f64) -> GameInstance {
    generate(&GeneratorSpec {
        n,
        a_max: 3,
        b_max: 2,
        seed,
        family: FamilyKind::RenewalMean { c: 0, p_min },
    })
    .expect("generator spec is valid")
}

fn random_vector(rng: &mut Xoshiro256StarStar, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.next_f64()).collect()
}

/// Random family with at most `max_rows` candidate rows per state; row sums
/// span [0.1, 1.2] so some families contract and some do not.
fn random_family(seed: u64, n: usize, max_rows: usize) -> MatrixFamily {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let count = 1 + (rng.next_u64() as usize) % max_rows;
            (0..count)
                .map(|_| {
                    let raw = random_vector(&mut rng, n, 0.0, 1.0);
                    let sum: f64 = raw.iter().sum();
                    let target = 0.1 + 1.1 * rng.next_f64();
                    if sum == 0.0 {
                        vec![0.0; n]
                    } else {
                        raw.iter().map(|x| x * target / sum).collect()
                    }
                })
                .collect()
        })
        .collect();
    MatrixFamily { rows }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_order_preserving(seed in 0u64..5000, n in 1usize..6) {
        let inst = substochastic(seed, n, 0.9);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xabcdef);
        let v = random_vector(&mut rng, n, -5.0, 5.0);
        let bump = random_vector(&mut rng, n, 0.0, 3.0);
        let w: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let fv = eval_operator(&inst, &v);
        let fw = eval_operator(&inst, &w);
        for i in 0..n {
            prop_assert!(fv[i] <= fw[i] + 1e-12);
        }
    }

    #[test]
    fn operator_additively_homogeneous_on_markov(seed in 0u64..5000, n in 1usize..6, shift in 0.1f64..50.0) {
        let inst = renewal(seed, n, 0.3);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x1234);
        let v = random_vector(&mut rng, n, -5.0, 5.0);
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let fv = eval_operator(&inst, &v);
        let fs = eval_operator(&inst, &shifted);
        for i in 0..n {
            prop_assert!((fs[i] - fv[i] - shift).abs() <= 1e-12 * shift.abs().max(1.0));
        }
    }

    #[test]
    fn min_max_consistency(seed in 0u64..5000, n in 1usize..5) {
        let inst = substochastic(seed, n, 0.8);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x77);
        let v = random_vector(&mut rng, n, -4.0, 4.0);
        let full = eval_operator(&inst, &v);
        for sigma in enumerate_min_policies(&inst, DEFAULT_ENUM_CAP).unwrap() {
            let restricted = eval_policy_min(&inst, &sigma, &v);
            for i in 0..n {
                prop_assert!(full[i] <= restricted[i] + 1e-12);
            }
            for delta in polyiter_core::game::enumerate_max_policies(&inst, 100_000).unwrap() {
                let pair = eval_policy_pair(&inst, &sigma, &delta, &v);
                for i in 0..n {
                    prop_assert!(pair[i] <= restricted[i] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn policy_value_set_is_rectangular(seed in 0u64..2000) {
        // mix-and-match membership: coordinate i of f^(sigma) depends only
        // on sigma_i, so swapping coordinates between members stays inside.
        let inst = substochastic(seed, 3, 0.8);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x99);
        let v = random_vector(&mut rng, 3, -2.0, 2.0);
        let all: Vec<(MinPolicy, Vec<f64>)> = enumerate_min_policies(&inst, DEFAULT_ENUM_CAP)
            .unwrap()
            .map(|s| {
                let val = eval_policy_min(&inst, &s, &v);
                (s, val)
            })
            .collect();
        // swap coordinate 0 of the first member with every other member
        let (_, base) = &all[0];
        for (other_policy, other_val) in &all {
            let mixed_policy = {
                let mut p = all[0].0.clone();
                p.0[0] = other_policy.0[0];
                p
            };
            let mixed_val = eval_policy_min(&inst, &mixed_policy, &v);
            prop_assert_eq!(mixed_val[0], other_val[0]);
            for i in 1..3 {
                prop_assert_eq!(mixed_val[i], base[i]);
            }
        }
    }

    #[test]
    fn enumeration_sorted_and_counted(seed in 0u64..2000, n in 1usize..5) {
        let inst = substochastic(seed, n, 0.5);
        let all: Vec<MinPolicy> = enumerate_min_policies(&inst, DEFAULT_ENUM_CAP).unwrap().collect();
        let expected: u128 = (0..n).map(|i| inst.a_count(i) as u128).product();
        prop_assert_eq!(all.len() as u128, expected);
        let mut sorted = all.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        prop_assert_eq!(&all, &sorted);
        prop_assert!(inst.count_m1() >= n);
        prop_assert!(inst.count_m() >= inst.count_m1());
    }

    #[test]
    fn single_violation_is_rejected(seed in 0u64..2000, kind in 0usize..3) {
        let mut inst = renewal(seed, 3, 0.4);
        prop_assert!(inst.validate().is_valid());
        match kind {
            0 => inst.states[1].min_actions[0].max_actions[0].row[2] = -0.1,
            1 => {
                for w in &mut inst.states[2].min_actions[0].max_actions[0].row {
                    *w *= 0.9;
                }
            }
            _ => {
                // ragged max-action list, needs a second min-action
                let extra = inst.states[0].min_actions[0].clone();
                inst.states[0].min_actions.push(extra);
                let dup = inst.states[0].min_actions[1].max_actions[0].clone();
                inst.states[0].min_actions[1].max_actions.push(dup);
            }
        }
        prop_assert!(!inst.validate().is_valid());
    }

    #[test]
    fn strict_improvement_is_lexicographic_argmin(seed in 0u64..2000, n in 1usize..5) {
        let inst = substochastic(seed, n, 0.9);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0x5a5a);
        let v = random_vector(&mut rng, n, -3.0, 3.0);
        let cfg = ImprovementConfig { tie_tolerance: 0.0, ..Default::default() };
        let start = MinPolicy(vec![0; n]);
        let improved = improve_min(&inst, &v, &start, &cfg);
        for i in 0..n {
            let vals: Vec<f64> = (0..inst.a_count(i))
                .map(|a| polyiter_core::shapley::eval_max(&inst, &v, i, a).0)
                .collect();
            let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let lex_first = vals.iter().position(|&x| x == best).unwrap();
            // conservative with zero tolerance keeps the current action only
            // when it already attains the exact minimum
            let expected = if vals[0] == best { 0 } else { lex_first };
            prop_assert_eq!(improved.0[i], expected);
        }
    }

    #[test]
    fn radius_routes_agree(seed in 0u64..400) {
        let fam = random_family(seed, 2 + (seed as usize % 3), 3);
        let cfg = PerronConfig::default();
        let by_enum = perron::hull_spectral_radius(&fam, HullMode::Enumerate, &cfg).unwrap();
        let by_search = perron::hull_spectral_radius(&fam, HullMode::BinarySearch, &cfg).unwrap();
        prop_assert!((by_enum - by_search).abs() <= 2e-8, "enum {} search {}", by_enum, by_search);
    }

    #[test]
    fn radius_matches_char_poly_oracle(seed in 0u64..400, n in 1usize..5) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let m: Vec<Vec<f64>> = (0..n).map(|_| random_vector(&mut rng, n, 0.0, 0.5)).collect();
        let est = linalg::spectral_radius(&m).unwrap();
        let exact = oracle::spectral_radius_oracle(&m).unwrap();
        prop_assert!((est - exact).abs() <= 1e-6 * exact.max(1.0), "est {} exact {}", est, exact);
    }

    #[test]
    fn radius_is_positively_homogeneous(seed in 0u64..400, alpha in 0.01f64..20.0) {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let m: Vec<Vec<f64>> = (0..3).map(|_| random_vector(&mut rng, 3, 0.0, 0.8)).collect();
        let scaled: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| alpha * x).collect()).collect();
        let a = linalg::spectral_radius(&m).unwrap();
        let b = linalg::spectral_radius(&scaled).unwrap();
        prop_assert!((b - alpha * a).abs() <= 1e-6 * (alpha * a).max(1.0));
    }

    #[test]
    fn growing_a_family_grows_radius_and_return_times(seed in 0u64..400, n in 2usize..5) {
        let inst = renewal(seed, n, 0.3);
        let small = family_from_fixed_min(&inst, &MinPolicy(vec![0; n]));
        let large = family_from_instance(&inst);
        let cfg = PerronConfig::default();
        let rho_small = perron::hull_spectral_radius(&small, HullMode::Enumerate, &cfg).unwrap();
        let rho_large = perron::hull_spectral_radius(&large, HullMode::Enumerate, &cfg).unwrap();
        prop_assert!(rho_large >= rho_small - 1e-9);
        let rt_small = perron::mean_return_times(&small, 0).unwrap();
        let rt_large = perron::mean_return_times(&large, 0).unwrap();
        for i in 0..n {
            prop_assert!(rt_large.phi[i] >= rt_small.phi[i] - 1e-9);
        }
    }

    #[test]
    fn return_time_equation_holds(seed in 0u64..400, n in 2usize..6) {
        let inst = renewal(seed, n, 0.25);
        let fam = family_from_instance(&inst);
        let rt = perron::mean_return_times(&fam, 0).unwrap();
        let stopped = fam.stopped(0);
        let fphi = stopped.apply_max(&rt.phi);
        for (p, f) in rt.phi.iter().zip(&fphi) {
            prop_assert!((p - 1.0 - f).abs() <= 1e-9);
            prop_assert!(*p >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn renewal_generator_bounds_return_times(seed in 0u64..400, n in 2usize..6, p_idx in 0usize..3) {
        // mass >= p_min on the renewal column forces K <= 1/p_min
        let p_min = [0.2, 0.4, 0.7][p_idx];
        let inst = renewal(seed, n, p_min);
        let fam = family_from_instance(&inst);
        let rt = perron::mean_return_times(&fam, 0).unwrap();
        prop_assert!(rt.k_max <= 1.0 / p_min + 1e-9, "K = {} above 1/p_min = {}", rt.k_max, 1.0 / p_min);
    }

    #[test]
    fn single_matrix_return_times_match_direct_solve(seed in 0u64..400, n in 2usize..6) {
        let inst = renewal(seed, n, 0.3);
        let sigma = MinPolicy(vec![0; n]);
        let tau = vec![0usize; n];
        let (m, _) = inst.selection_system(&sigma, &tau);
        let fam = MatrixFamily { rows: m.iter().map(|r| vec![r.clone()]).collect() };
        let rt = perron::mean_return_times(&fam, 0).unwrap();
        let direct = oracle::brute_force_return_time(&m, 0).unwrap();
        for (p, d) in rt.phi.iter().zip(&direct) {
            prop_assert!((p - d).abs() <= 1e-9);
        }
    }

    #[test]
    fn solver_fixed_point_and_attainment(seed in 0u64..600, n in 1usize..5) {
        let inst = substochastic(seed, n, 0.9);
        let (v, sigma, delta, trace) = solve_discounted(&inst, &SolveConfig::default()).unwrap();
        let fv = eval_operator(&inst, &v);
        let tol = 1e-8 * (1.0 + linalg::inf_norm(&v));
        for i in 0..n {
            prop_assert!((fv[i] - v[i]).abs() <= tol);
        }
        // optimal pair attains the operator coordinatewise
        let restricted = eval_policy_min(&inst, &sigma, &v);
        let pair = eval_policy_pair(&inst, &sigma, &delta, &v);
        for i in 0..n {
            prop_assert!((restricted[i] - fv[i]).abs() <= tol);
            prop_assert!((pair[i] - restricted[i]).abs() <= tol);
        }
        // outer values nonincreasing, inner values nondecreasing
        for k in 0..trace.outer.len() {
            if k + 1 < trace.outer.len() {
                let a = trace.outer[k].value.fixed().unwrap();
                let b = trace.outer[k + 1].value.fixed().unwrap();
                for i in 0..n {
                    prop_assert!(b[i] <= a[i] + tol);
                }
            }
            let inner = &trace.outer[k].inner;
            for j in 0..inner.len().saturating_sub(1) {
                let a = inner[j].value.fixed().unwrap();
                let b = inner[j + 1].value.fixed().unwrap();
                for i in 0..n {
                    prop_assert!(b[i] >= a[i] - tol);
                }
            }
        }
    }

    #[test]
    fn value_iteration_contracts_and_pi_dominates(seed in 0u64..400, n in 1usize..5) {
        let lambda = 0.8;
        let inst = substochastic(seed, n, lambda);
        let (v_star, _, _, trace) = solve_discounted(&inst, &SolveConfig::default()).unwrap();
        let v0 = vec![0.0; n];
        for steps in [1usize, 3, 7, 15] {
            let vt = oracle::value_iteration(&inst, &v0, steps);
            let d = vt.iter().zip(&v_star).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            let d0 = v0.iter().zip(&v_star).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            prop_assert!(d <= lambda.powi(steps as i32) * d0 + 1e-9);
        }
        // policy iteration stays below value iteration started at its own v0
        let v0_pi = trace.outer[0].value.fixed().unwrap().clone();
        let mut vi = v0_pi.clone();
        for k in 1..trace.outer.len() {
            vi = eval_operator(&inst, &vi);
            let vk = trace.outer[k].value.fixed().unwrap();
            for i in 0..n {
                prop_assert!(vk[i] <= vi[i] + 1e-9);
            }
        }
    }

    #[test]
    fn state_discount_instances_solve_under_spectral_certificate(seed in 0u64..300, n in 2usize..5) {
        // rows may sum above 1 locally; the generator certifies every pair
        // matrix radius below the cap, so the forced solve terminates and
        // matches the brute-force reference
        let inst = generate(&GeneratorSpec {
            n,
            a_max: 2,
            b_max: 2,
            seed: seed.wrapping_mul(48271).wrapping_add(5),
            family: FamilyKind::StateDependentDiscount { rho_cap: 0.85 },
        })
        .unwrap();
        let cfg = SolveConfig { force: true, ..Default::default() };
        let (v, _, _, _) = solve_discounted(&inst, &cfg).unwrap();
        let reference = oracle::brute_force_discounted(&inst, DEFAULT_ENUM_CAP).unwrap();
        for (a, b) in v.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn mean_run_eigenvalues_are_monotone(seed in 0u64..300, n in 2usize..5) {
        // outer eigenvalues nonincreasing, inner eigenvalues nondecreasing
        let inst = renewal(seed, n, 0.3);
        let (pair, _, _, trace) = solve_mean(&inst, 0, &SolveConfig::default()).unwrap();
        let tol = 1e-9 * (1.0 + pair.eta.abs());
        let outer_eta: Vec<f64> = trace
            .outer
            .iter()
            .map(|s| match &s.value {
                TraceValue::Eigen { eta, .. } => *eta,
                TraceValue::Fixed(_) => unreachable!("mean traces carry eigenpairs"),
            })
            .collect();
        for w in outer_eta.windows(2) {
            prop_assert!(w[1] <= w[0] + tol);
        }
        for step in &trace.outer {
            let inner_eta: Vec<f64> = step
                .inner
                .iter()
                .map(|s| match &s.value {
                    TraceValue::Eigen { eta, .. } => *eta,
                    TraceValue::Fixed(_) => unreachable!(),
                })
                .collect();
            for w in inner_eta.windows(2) {
                prop_assert!(w[1] >= w[0] - tol);
            }
        }
    }

    #[test]
    fn mean_certificate_passes_on_renewal_runs(seed in 0u64..200, n in 2usize..5) {
        let inst = renewal(seed, n, 0.35);
        let (_, _, _, trace) = solve_mean(&inst, 0, &SolveConfig::default()).unwrap();
        let (report, _) = certify_mean_trace(&inst, &trace, 0).unwrap();
        prop_assert!(report.passed(), "{}", report);
    }

    #[test]
    fn scaling_preserves_optimizing_actions(seed in 0u64..400, n in 2usize..5) {
        // the scaled operator at phi^{-1} v selects the same actions the
        // original operator selects at v, coordinate by coordinate
        let inst = substochastic(seed, n, 0.8);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xc0de);
        let phi: Vec<f64> = (0..n).map(|_| 10f64.powf(2.0 * rng.next_f64() - 1.0)).collect();
        let scaled = transforms::scale_instance(&inst, &phi).unwrap();
        let v = random_vector(&mut rng, n, -3.0, 3.0);
        let w: Vec<f64> = v.iter().zip(&phi).map(|(x, p)| x / p).collect();
        for i in 0..n {
            let orig_vals: Vec<f64> = (0..inst.a_count(i))
                .map(|a| polyiter_core::shapley::eval_max(&inst, &v, i, a).0)
                .collect();
            let scaled_vals: Vec<f64> = (0..inst.a_count(i))
                .map(|a| polyiter_core::shapley::eval_max(&scaled, &w, i, a).0)
                .collect();
            let argmin = |vals: &[f64]| {
                let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                vals.iter().position(|&x| x == best).unwrap()
            };
            prop_assert_eq!(argmin(&orig_vals), argmin(&scaled_vals));
            // the inner maximizer picks the same action too
            for a in 0..inst.a_count(i) {
                let b_orig = polyiter_core::shapley::eval_max(&inst, &v, i, a).1;
                let b_scaled = polyiter_core::shapley::eval_max(&scaled, &w, i, a).1;
                prop_assert_eq!(b_orig, b_scaled);
            }
        }
    }

    #[test]
    fn scaled_fixed_point_corresponds(seed in 0u64..400, n in 2usize..5) {
        let inst = substochastic(seed, n, 0.8);
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xfeed);
        let phi: Vec<f64> = (0..n).map(|_| 10f64.powf(2.0 * rng.next_f64() - 1.0)).collect();
        let scaled = transforms::scale_instance(&inst, &phi).unwrap();
        let (v, _, _, _) = solve_discounted(&inst, &SolveConfig::default()).unwrap();
        // w = phi^{-1} v is a fixed point of the scaled operator
        let w: Vec<f64> = v.iter().zip(&phi).map(|(x, p)| x / p).collect();
        let fw = eval_operator(&scaled, &w);
        for i in 0..n {
            prop_assert!((fw[i] - w[i]).abs() <= 1e-9 * (1.0 + w[i].abs()));
        }
    }

    #[test]
    fn mean_reduction_matrix_identity(seed in 0u64..400, n in 2usize..5) {
        // Mv + eta (phi - 1) = M_reduced (v + eta phi) for v with v_c = 0
        let inst = renewal(seed, n, 0.3);
        let fam = family_from_instance(&inst);
        let rt = perron::mean_return_times(&fam, 0).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xbead);
        let mut v = random_vector(&mut rng, n, -2.0, 2.0);
        v[0] = 0.0;
        let eta = 2.0 * rng.next_f64() - 1.0;
        for i in 0..n {
            for a in 0..inst.a_count(i) {
                for b in 0..inst.b_count(i) {
                    let row = inst.row(i, a, b);
                    let lhs: f64 = row.iter().zip(&v).map(|(w, x)| w * x).sum::<f64>()
                        + eta * (rt.phi[i] - 1.0);
                    // reconstruct the reduced row before scaling
                    let stopped_phi: f64 = row
                        .iter()
                        .enumerate()
                        .filter(|&(y, _)| y != 0)
                        .map(|(y, &w)| w * rt.phi[y])
                        .sum();
                    let replaced = (rt.phi[i] - 1.0 - stopped_phi) / rt.phi[0];
                    let mut rhs = replaced * (v[0] + eta * rt.phi[0]);
                    for y in 1..n {
                        rhs += row[y] * (v[y] + eta * rt.phi[y]);
                    }
                    prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
                }
            }
        }
    }
}
