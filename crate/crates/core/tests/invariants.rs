//! Structural and statistical invariants of the model, the bounded
//! approximations and the stationary statistics.

use bdm_core::dynamics::Action;
use bdm_core::solver::{
    evolve, horizon_analysis, l1_distance, origin_distribution, predicted_stationary, stationary_exact,
    stationary_power, PowerOptions, TransitionMatrices, DEFAULT_TOLERANCE,
};
use bdm_core::stats::{jump_height_profile, jump_rate, mean_deviation, stat_report};
use bdm_core::{
    partition_count, step, subcycle_phase, update_phase, BdmState, BoundedModel, BudgetPolicy, Execution, FieldParam,
    Probability,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn q(v: i64) -> FieldParam {
    FieldParam::from_integer(v).unwrap()
}

/// `2M + 2` distinct rationals above 1.
fn sample_qs(m: usize) -> Vec<BigRational> {
    (0..2 * m + 2).map(|i| BigRational::new(BigInt::from(3 + 2 * i as i64), BigInt::from(2))).collect()
}

fn state_strategy() -> impl Strategy<Value = BdmState> {
    (1usize..=4)
        .prop_flat_map(|m| (proptest::collection::vec(-6i32..=6, m), 0..=m))
        .prop_map(|(b, t)| BdmState::from_batteries(b, t).unwrap())
}

proptest! {
    #[test]
    fn update_phase_keeps_the_layer_invariant(s in state_strategy()) {
        let u = update_phase(&s);
        prop_assert_eq!(u.layer(), (s.layer() + 1) % (s.m() + 1));
        prop_assert!(BdmState::new(u.batteries().to_vec(), u.drain(), u.layer()).is_ok());
        for o in step(&s, BudgetPolicy::Unbounded).unwrap() {
            prop_assert!(BdmState::new(o.state.batteries().to_vec(), o.state.drain(), o.state.layer()).is_ok());
        }
    }

    #[test]
    fn outcome_weights_sum_to_one(s in state_strategy()) {
        let outcomes = subcycle_phase(&s, BudgetPolicy::Unbounded).unwrap();
        for qv in sample_qs(s.m()) {
            let mut total = BigRational::zero();
            for o in &outcomes {
                total += o.weight.value(&qv);
            }
            prop_assert_eq!(total, BigRational::one());
        }
    }

    #[test]
    fn discharges_swap_battery_and_drain(s in state_strategy()) {
        let total = s.drain() + s.batteries().iter().sum::<i32>();
        for o in subcycle_phase(&s, BudgetPolicy::Unbounded).unwrap() {
            prop_assert_eq!(o.state.drain() + o.state.batteries().iter().sum::<i32>(), total);
            // Replay the path: each D swaps b_t and d, each jump has height b_t - d >= 1.
            let (mut b, mut d) = (s.batteries().to_vec(), s.drain());
            let mut heights = Vec::new();
            for (t, a) in o.path.iter().enumerate() {
                match a {
                    Action::Discharge => {
                        prop_assert!(b[t] > d);
                        heights.push((t + 1, (b[t] - d) as u32));
                        std::mem::swap(&mut b[t], &mut d);
                    }
                    Action::Inhibit => prop_assert!(b[t] > d),
                    Action::Idle => prop_assert!(b[t] <= d),
                }
            }
            prop_assert_eq!(b.as_slice(), o.state.batteries());
            prop_assert_eq!(d, o.state.drain());
            let recorded: Vec<(usize, u32)> = o.discharges.iter().map(|x| (x.battery, x.height)).collect();
            prop_assert_eq!(recorded, heights);
        }
    }
}

#[test]
fn all_discharge_path_is_periodic() {
    for m in 1..=6 {
        let origin = BdmState::origin(m).unwrap();
        let mut s = origin.clone();
        let mut trace = vec![s.clone()];
        for _ in 0..2 * (m + 1) {
            let outcomes = step(&s, BudgetPolicy::Unbounded).unwrap();
            let all_d = outcomes.iter().find(|o| o.inhibitions == 0).expect("an inhibition-free path exists");
            s = all_d.state.clone();
            trace.push(s.clone());
        }
        assert_eq!(trace[m + 1], origin, "M={m}");
        assert_eq!(trace[2 * (m + 1)], origin, "M={m}");
        assert!(trace[1..=m].iter().all(|x| *x != origin));
    }
}

#[test]
fn class_zero_states_only_jump_by_one() {
    for m in 1..=5 {
        let model = BoundedModel::build(m, 4).unwrap();
        for layer in model.layers() {
            for (i, out) in layer.edges.iter().enumerate() {
                let heights = out.iter().flat_map(|e| e.discharges.iter().map(|d| d.height));
                if layer.classes[i] == 0 {
                    assert!(heights.clone().all(|h| h == 1));
                }
                assert!(heights.into_iter().all(|h| h >= 1));
            }
        }
    }
}

#[test]
fn bounded_weights_sum_to_one_symbolically() {
    for (m, k0) in [(1, 6), (2, 6), (3, 5), (4, 3)] {
        let model = BoundedModel::build(m, k0).unwrap();
        let qs = sample_qs(m);
        for layer in model.layers() {
            for i in 0..layer.len() {
                for qv in &qs {
                    let total = layer.merged_edges(i).iter().fold(BigRational::zero(), |acc, (_, w)| acc + w.value(qv));
                    assert_eq!(total, BigRational::one());
                }
            }
        }
    }
}

#[test]
fn class_sizes_are_partition_counts() {
    for (m, k0) in [(1, 50), (2, 50), (3, 50), (4, 40)] {
        let model = BoundedModel::build(m, k0).unwrap();
        for t in 0..model.period() {
            for (k, &n) in model.class_counts(t).iter().enumerate() {
                assert_eq!(BigUint::from(n), partition_count(k, m), "M={m} T={t} K={k}");
            }
        }
        model.verify_partition_counts().unwrap();
    }
}

#[test]
fn bounded_model_is_reachable_from_the_origin() {
    for (m, k0) in [(1, 8), (2, 6), (3, 4), (4, 3)] {
        let model = BoundedModel::build(m, k0).unwrap();
        let mut seen: Vec<Vec<bool>> = model.layers().iter().map(|l| vec![false; l.len()]).collect();
        let mut stack = vec![(0usize, model.class_zero_index(0))];
        seen[0][stack[0].1] = true;
        while let Some((t, i)) = stack.pop() {
            let next = (t + 1) % model.period();
            for e in &model.layer(t).edges[i] {
                if !seen[next][e.to] {
                    seen[next][e.to] = true;
                    stack.push((next, e.to));
                }
            }
        }
        assert!(seen.iter().flatten().all(|&v| v), "M={m} K0={k0}");
    }
}

#[test]
fn smaller_bound_is_a_restriction() {
    for (m, k0, k1) in [(1, 3, 6), (2, 3, 5), (3, 2, 4)] {
        let small = BoundedModel::build(m, k0).unwrap();
        let big = BoundedModel::build(m, k1).unwrap();
        for t in 0..small.period() {
            let (ls, lb) = (small.layer(t), big.layer(t));
            let next = (t + 1) % small.period();
            let expected: Vec<_> =
                lb.states.iter().zip(&lb.classes).filter(|(_, &k)| k <= k0).map(|(s, _)| s).collect();
            assert_eq!(ls.states.iter().collect::<Vec<_>>(), expected);
            for (i, s) in ls.states.iter().enumerate() {
                let j = lb.index_of(s).unwrap();
                let targets = lb.merged_edges(j);
                if targets.iter().all(|(to, _)| big.layer(next).classes[*to] <= k0) {
                    let a: Vec<_> = ls
                        .merged_edges(i)
                        .into_iter()
                        .map(|(to, w)| (small.layer(next).states[to].clone(), w))
                        .collect();
                    let b: Vec<_> =
                        targets.into_iter().map(|(to, w)| (big.layer(next).states[to].clone(), w)).collect();
                    assert_eq!(a, b, "M={m} T={t} {s}");
                }
            }
        }
    }
}

#[test]
fn stationary_layers_map_onto_each_other() {
    let qv = q(3);
    let model = BoundedModel::build(3, 10).unwrap();
    let dist = stationary_power(&model, &qv, PowerOptions::default(), Execution::Sequential).unwrap();
    let mats = TransitionMatrices::<f64>::new(&model, &qv);
    for t in 0..model.period() {
        let next = mats.apply(t, dist.layer(t), Execution::Sequential);
        let target = dist.layer((t + 1) % model.period());
        assert!(l1_distance(&next, target) < 1e-12, "T={t}");
    }
}

#[test]
fn power_and_exact_agree() {
    let qv = q(2);
    let model = BoundedModel::build(2, 8).unwrap();
    let opts = PowerOptions::default();
    let float = stationary_power(&model, &qv, opts, Execution::Sequential).unwrap();
    let exact = stationary_exact(&model, &qv).unwrap().to_f64();
    for (a, b) in float.per_layer.iter().flatten().zip(exact.per_layer.iter().flatten()) {
        assert!((a - b).abs() < 10.0 * opts.tol);
    }
}

fn max_prediction_gap(m: usize, k0: u32, qv: &FieldParam) -> f64 {
    let model = BoundedModel::build(m, k0).unwrap();
    let dist = stationary_power(&model, qv, PowerOptions::default(), Execution::Parallel).unwrap();
    let predicted = predicted_stationary::<f64>(&model, qv);
    dist.per_layer
        .iter()
        .flatten()
        .zip(predicted.per_layer.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn stationary_is_near_class_prediction() {
    let qv = q(2);
    assert!(max_prediction_gap(2, 30, &qv) < 1e-6);
    // Up to M = 2 the bounded chain is exactly geometric in K, so the gap is
    // pure roundoff; the truncation decay shows from M = 3 on.
    let gaps: Vec<f64> = [10, 20, 30].iter().map(|&k0| max_prediction_gap(3, k0, &qv)).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-6);
}

#[test]
fn small_m_stationary_is_exactly_geometric() {
    for (m, k0) in [(1, 6), (2, 6), (3, 3)] {
        let model = BoundedModel::build(m, k0).unwrap();
        for qi in [2, 3] {
            let exact = stationary_exact(&model, &q(qi)).unwrap();
            assert_eq!(exact.per_layer, predicted_stationary::<BigRational>(&model, &q(qi)).per_layer);
        }
    }
}

#[test]
fn horizon_probabilities_are_symbol_counts() {
    for p in [2i64, 3] {
        for m in 1..=3usize {
            let n = 4;
            let model = BoundedModel::build(m, n as u32).unwrap();
            let x0 = origin_distribution::<BigRational>(&model);
            let snap = evolve(&model, &q(p), &x0, n, Execution::Sequential).unwrap();
            let scale = BigRational::from_integer(BigInt::from(p).pow((m * n) as u32));
            let mut total = BigRational::zero();
            for x in &snap.probs {
                assert!((x * &scale).is_integer(), "p={p} M={m}: {x}");
                total += x;
            }
            assert_eq!(total, BigRational::one());
        }
    }
}

fn sum<'a>(values: impl Iterator<Item = &'a BigRational>) -> BigRational {
    values.fold(BigRational::zero(), |a, b| a + b)
}

#[test]
fn horizon_pmfs_are_consistent() {
    let model = BoundedModel::build(2, 8).unwrap();
    let h = horizon_analysis::<BigRational>(&model, &q(3), 4);
    let one = BigRational::one();
    assert_eq!(sum(h.complexity_pmf.values()), one);
    assert_eq!(sum(h.jump_count_pmf.values()), one);
    // Expected jump count equals the summed height histogram.
    let mean_jumps = h
        .jump_count_pmf
        .iter()
        .fold(BigRational::zero(), |a, (j, p)| a + p * BigRational::from_integer(BigInt::from(*j)));
    assert_eq!(mean_jumps, sum(h.height_histogram.values()));
}

fn stationary_stats(m: usize, qi: i64) -> (Vec<f64>, f64, f64, f64) {
    let k0 = match qi {
        2 => 40,
        3 => 26,
        _ => 10,
    };
    let qv = q(qi);
    let model = BoundedModel::build(m, k0).unwrap();
    let dist = stationary_power(&model, &qv, PowerOptions::default(), Execution::Parallel).unwrap();
    let (per_layer, mean) = mean_deviation(&model, &dist).unwrap();
    let (_, rate) = jump_rate(&model, &qv, &dist).unwrap();
    let heights: f64 = jump_height_profile(&model, &qv, &dist).unwrap().values().sum();
    (per_layer, mean, rate, heights)
}

#[test]
fn deviation_is_antisymmetric_and_centred() {
    for qi in [2, 3, 16] {
        for m in 1..=6 {
            let (d, mean, rate, heights) = stationary_stats(m, qi);
            for t in 0..=m {
                assert!((d[t] + d[m - t]).abs() < 1e-8, "q={qi} M={m} T={t}: {} vs {}", d[t], d[m - t]);
            }
            assert!(mean.abs() < 1e-8, "q={qi} M={m}: mean {mean}");
            assert!((rate - heights).abs() < 1e-10, "q={qi} M={m}");
        }
    }
}

#[test]
fn single_sequence_closed_forms() {
    let tol = 10.0 * DEFAULT_TOLERANCE;
    for qi in [2i64, 3, 5, 100] {
        let qv = q(qi);
        let model = BoundedModel::build(1, 60).unwrap();
        let dist = stationary_power(&model, &qv, PowerOptions::default(), Execution::Sequential).unwrap();
        let r = stat_report(&model, &qv, &dist).unwrap();
        let x = qi as f64;
        assert!((r.d_bar_per_layer[0] - x / ((x + 1.0) * (x + 1.0))).abs() < tol, "q={qi}");
        assert!((r.jump_rate - (x - 1.0) / (2.0 * x)).abs() < tol, "q={qi}");
        for h in 1..=6u32 {
            let want = x.powi(1 - h as i32) * (x - 1.0) * (x - 1.0) / (2.0 * x * x);
            assert!((r.jump_heights[&h] - want).abs() < tol, "q={qi} h={h}");
        }
    }
}

#[test]
fn exact_statistics_match_closed_forms_symbolically() {
    // Truncation at K0 = 12 is far below 1e-9 for q = 7.
    let qv = q(7);
    let model = BoundedModel::build(1, 12).unwrap();
    let dist = stationary_exact(&model, &qv).unwrap();
    let (_, rate) = jump_rate(&model, &qv, &dist).unwrap();
    let want = BigRational::new(BigInt::from(6), BigInt::from(14));
    assert!((rate - want).as_f64().abs() < 1e-9);
}
