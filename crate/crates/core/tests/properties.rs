use std::collections::{BTreeMap, BTreeSet, VecDeque};

use hexanneal::analysis::{select_best_fit, tts_from_rate, Tts};
use hexanneal::anneal::{default_schedule, Annealer};
use hexanneal::exact::{binary_minimum, gray_code_energies, quadratized_minimum};
use hexanneal::lattice::{heavy_hex_node_count, honeycomb_edge_count, honeycomb_vertex_count};
use hexanneal::model::approximation_ratio;
use hexanneal::reduce::{solution_to_spins, LpVar};
use hexanneal::rng::CounterRng;
use hexanneal::*;
use proptest::prelude::*;

fn random_model(n: usize, seed: u64, linear: bool, cubic: bool) -> IsingModel {
    let mut rng = CounterRng::new(seed);
    let mut m = IsingModel::new(n);
    let coin = |r: &mut CounterRng| r.next_spin() as f64;
    for i in 0..n {
        if linear && rng.next_f64() < 0.5 {
            let c = coin(&mut rng);
            m.add_linear(i, c);
        }
        for j in i + 1..n {
            if rng.next_f64() < 0.3 {
                let c = coin(&mut rng);
                m.add_quadratic(i, j, c);
            }
            if cubic {
                for k in j + 1..n {
                    if rng.next_f64() < 0.05 {
                        let c = coin(&mut rng);
                        m.add_cubic(i, j, k, c);
                    }
                }
            }
        }
    }
    m
}

fn spins_of(bits: u64, n: usize) -> SpinVector {
    SpinVector::new((0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()).unwrap()
}

/// Two-colouring by breadth-first search from node 0.
fn bfs_colouring(g: &HeavyHexGraph) -> Vec<u8> {
    let adj = g.adjacency();
    let mut colour = vec![u8::MAX; g.n];
    colour[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if colour[v] == u8::MAX {
                colour[v] = 1 - colour[u];
                queue.push_back(v);
            } else {
                assert_ne!(colour[v], colour[u], "odd cycle through {u}-{v}");
            }
        }
    }
    colour
}

#[test]
fn bipartition_is_unique_and_matches_construction() {
    for rows in 1..=12 {
        for cols in 1..=12 {
            let g = build_lattice(rows, cols).unwrap();
            assert!(g.is_connected());
            let colour = bfs_colouring(&g);
            let class_of_zero: BTreeSet<usize> = g.nodes().filter(|&v| colour[v] == colour[0]).collect();
            let other: BTreeSet<usize> = g.nodes().filter(|&v| colour[v] != colour[0]).collect();
            // connected, so the classes are fixed up to swapping
            let v2: BTreeSet<usize> = g.v2_set.iter().copied().collect();
            let v3: BTreeSet<usize> = g.v3_set.iter().copied().collect();
            assert!(
                (class_of_zero == v3 && other == v2) || (class_of_zero == v2 && other == v3),
                "{rows}x{cols}"
            );
        }
    }
}

#[test]
fn subdivision_identity() {
    for rows in 1..=6 {
        for cols in 1..=6 {
            let g = build_lattice(rows, cols).unwrap();
            // honeycomb counted independently: vertices are the degree >= 2
            // nodes of V3, honeycomb edges are the subdivision vertices
            assert_eq!(g.v3_set.len(), honeycomb_vertex_count(rows, cols));
            assert_eq!(g.v2_set.len(), honeycomb_edge_count(rows, cols));
            assert_eq!(g.n, g.v3_set.len() + g.v2_set.len());
            assert_eq!(g.edges.len(), 2 * g.v2_set.len());
            assert_eq!(g.n, heavy_hex_node_count(rows, cols));
        }
    }
}

#[test]
fn target_sizes_within_fifteen_percent() {
    for target in [100usize, 500, 1000, 2000] {
        let g = build_lattice_for_target(target).unwrap();
        let miss = (g.n as f64 - target as f64).abs() / target as f64;
        assert!(miss <= 0.15, "target {target} gave {}", g.n);
        g.validate().unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_serialization_is_deterministic(rows in 1usize..9, cols in 1usize..9) {
        let a = build_lattice(rows, cols).unwrap().to_json();
        let b = build_lattice(rows, cols).unwrap().to_json();
        prop_assert_eq!(&a, &b);
        let back = HeavyHexGraph::from_json(&a).unwrap();
        prop_assert_eq!(back.to_json(), a);
    }

    #[test]
    fn degrees_respect_the_classes(rows in 1usize..9, cols in 1usize..9) {
        let g = build_lattice(rows, cols).unwrap();
        let deg = g.degrees();
        prop_assert_eq!(g.degree_histogram().values().sum::<usize>(), g.n);
        for &v in &g.v2_set {
            prop_assert!(deg[v] <= 2);
        }
        for &v in &g.v3_set {
            prop_assert!(deg[v] <= 3);
        }
        let w: BTreeSet<usize> = g.w_set.iter().map(|t| t.center).collect();
        let deg2: BTreeSet<usize> = g.v2_set.iter().copied().filter(|&v| deg[v] == 2).collect();
        prop_assert_eq!(w, deg2);
    }

    #[test]
    fn quadratic_models_are_flip_symmetric(n in 2usize..=16, seed in any::<u64>(), bits in any::<u64>()) {
        let m = random_model(n, seed, false, false);
        let z = spins_of(bits, n);
        prop_assert_eq!(m.evaluate(&z).unwrap(), m.evaluate(&z.flipped()).unwrap());
    }

    #[test]
    fn approximation_ratio_is_affine(lo in -100.0f64..0.0, span in 0.5f64..100.0, t in 0.0f64..1.0, u in 0.0f64..1.0) {
        let b = SpectrumBounds { c_min: lo, c_max: lo + span, provenance: Provenance::BruteForce };
        prop_assert!((approximation_ratio(b.c_min, &b).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(approximation_ratio(b.c_max, &b).unwrap().abs() < 1e-12);
        let (e1, e2) = (lo + t * span, lo + u * span);
        let (r1, r2) = (approximation_ratio(e1, &b).unwrap(), approximation_ratio(e2, &b).unwrap());
        prop_assert!((r1 - (1.0 - t)).abs() < 1e-9);
        if e1 < e2 {
            prop_assert!(r1 >= r2);
        }
    }

    #[test]
    fn binary_values_match_spin_energies(n in 1usize..=12, seed in any::<u64>()) {
        let m = random_model(n, seed, true, true);
        let p = spin_to_binary(&m);
        for bits in 0u64..1 << n {
            let x: Vec<u8> = (0..n).map(|i| (bits >> i & 1) as u8).collect();
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let z = solution_to_spins(&xf).unwrap();
            prop_assert_eq!(p.value(&x), m.evaluate(&z).unwrap());
        }
    }

    #[test]
    fn gray_walk_matches_direct_evaluation(n in 1usize..=16, seed in any::<u64>()) {
        let m = random_model(n, seed, true, true);
        let walk = gray_code_energies(&m).unwrap();
        prop_assert_eq!(walk.len(), 1 << n);
        let seen: BTreeSet<u64> = walk.iter().map(|w| w.0).collect();
        prop_assert_eq!(seen.len(), 1 << n);
        for (bits, e) in walk {
            prop_assert_eq!(e, m.evaluate(&spins_of(bits, n)).unwrap());
        }
    }

    #[test]
    fn negation_swaps_extremes(n in 1usize..=16, seed in any::<u64>()) {
        let m = random_model(n, seed, true, false);
        let t = brute_force(&m, false).unwrap();
        let neg = brute_force(&m.negated(), false).unwrap();
        prop_assert_eq!(t.c_max.unwrap(), -neg.c_min);
    }

    #[test]
    fn tts_decreases_with_success_rate(p in 0.001f64..0.98, dp in 0.0001f64..0.01, cpu in 0.01f64..100.0, reads in 1usize..100_000) {
        let q = (p + dp).min(0.989);
        prop_assume!(q > p);
        let a = tts_from_rate(p, reads, cpu, 0.99).unwrap().seconds().unwrap();
        let b = tts_from_rate(q, reads, cpu, 0.99).unwrap().seconds().unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn tts_scales_with_cpu_time(p in 0.0f64..1.0, cpu in 0.01f64..100.0, reads in 1usize..100_000) {
        let a = tts_from_rate(p, reads, cpu, 0.99).unwrap();
        let b = tts_from_rate(p, reads, 2.0 * cpu, 0.99).unwrap();
        match (a, b) {
            (Tts::Finite(x), Tts::Finite(y)) => prop_assert_eq!(2.0 * x, y),
            (Tts::Infinite, Tts::Infinite) => prop_assert_eq!(p, 0.0),
            _ => prop_assert!(false),
        }
    }
}

#[test]
fn single_flip_delta_is_twice_the_incident_sum() {
    let g = build_lattice(3, 3).unwrap();
    let m = generate_instance(&g, true, 8);
    let c = m.compile();
    let mut rng = CounterRng::new(77);
    for _ in 0..10_000 {
        let z = SpinVector::random(m.n, rng.next());
        let i = (rng.next() % m.n as u64) as usize;
        let mut flipped = z.clone().into_inner();
        flipped[i] = -flipped[i];
        let direct = m.evaluate(&SpinVector::new(flipped).unwrap()).unwrap() - m.evaluate(&z).unwrap();
        assert_eq!(direct.abs(), 2.0 * c.field(i, z.as_slice()).abs());
        assert_eq!(direct, c.flip_delta(i, z.as_slice()));
    }
}

#[test]
fn instance_coefficients_are_balanced() {
    let g = build_lattice(12, 12).unwrap();
    let mut tally = [(0usize, 0usize); 3];
    let mut seed = 0;
    while tally.iter().any(|t| t.1 < 100_000) {
        let m = generate_instance(&g, true, seed);
        seed += 1;
        for (slot, coefs) in [
            (0, m.linear.values().copied().collect::<Vec<_>>()),
            (1, m.quadratic.values().copied().collect()),
            (2, m.cubic.values().copied().collect()),
        ] {
            tally[slot].0 += coefs.iter().filter(|&&c| c > 0.0).count();
            tally[slot].1 += coefs.len();
        }
    }
    for (plus, total) in tally {
        let f = plus as f64 / total as f64;
        assert!((f - 0.5).abs() < 0.01, "{plus}/{total}");
    }
}

fn lattice_instances() -> Vec<IsingModel> {
    let g = build_lattice(1, 1).unwrap();
    (0..100).map(|s| generate_instance(&g, true, 1000 + s)).collect()
}

#[test]
fn quadratization_is_sound_on_small_lattices() {
    let g = build_lattice(1, 1).unwrap();
    for m in lattice_instances() {
        let truth = brute_force(&m, true).unwrap();
        let q = quadratize_on_lattice(&spin_to_binary(&m), m.n as f64, &g).unwrap();
        // both sides by exhaustion over every original and auxiliary bit
        let (min, x) = binary_minimum(&q.base).unwrap();
        assert_eq!(min, truth.c_min);
        assert!(q.aux_consistent(&x));
        let back: Vec<f64> = q.back_map(&x).iter().map(|&v| v as f64).collect();
        assert_eq!(m.evaluate(&solution_to_spins(&back).unwrap()).unwrap(), truth.c_min);
        assert_eq!(quadratized_minimum(&q).unwrap().0, truth.c_min);
    }
}

#[test]
fn lifted_program_is_exact_on_small_lattices() {
    for m in lattice_instances().into_iter().take(30) {
        let truth = brute_force(&m, false).unwrap();
        let lp = lift_to_lp(&spin_to_binary(&m)).unwrap();
        let mut best = f64::INFINITY;
        for bits in 0u64..1 << m.n {
            let x: Vec<u8> = (0..m.n).map(|i| (bits >> i & 1) as u8).collect();
            let values: BTreeMap<LpVar, f64> = lp.tight_values(&x);
            assert!(lp.is_feasible(&values, 0.0));
            best = best.min(lp.objective_value(&values));
        }
        assert_eq!(best, truth.c_min);
    }
}

#[test]
fn penalty_weights_above_the_largest_coefficient_preserve_the_optimum() {
    let g = build_lattice(1, 1).unwrap();
    for m in lattice_instances().into_iter().take(30) {
        let p = spin_to_binary(&m);
        let truth = brute_force(&m, false).unwrap();
        let n = m.n as f64;
        for w in [p.max_abs_coefficient() + 1.0, n, 10.0 * n] {
            let q = quadratize_on_lattice(&p, w, &g).unwrap();
            assert!(q.penalty_sufficient(), "weight {w}");
            assert_eq!(binary_minimum(&q.base).unwrap().0, truth.c_min, "weight {w}");
        }
    }
}

#[test]
fn constant_beta_two_spin_chain_is_boltzmann() {
    let mut m = IsingModel::new(2);
    m.add_quadratic(0, 1, -1.0).add_linear(0, 0.5);
    let beta = 0.5;
    let annealer = Annealer::new(&m);
    let mut rng = CounterRng::new(2024);
    let mut z = vec![1i8, -1];
    let mut freq = [0u64; 4];
    let sweeps = 1_000_000;
    for _ in 0..sweeps {
        annealer.sweep(&mut z, beta, &mut rng);
        freq[usize::from(z[0] > 0) | usize::from(z[1] > 0) << 1] += 1;
    }
    let weights: Vec<f64> = (0..4u64)
        .map(|b| (-beta * m.evaluate(&spins_of(b, 2)).unwrap()).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    for b in 0..4 {
        let exact = weights[b] / total;
        let seen = freq[b] as f64 / sweeps as f64;
        assert!((seen / exact - 1.0).abs() < 0.02, "state {b}: {seen} vs {exact}");
    }
}

#[test]
fn stored_energies_match_evaluation() {
    for (rows, cols, cubic) in [(1, 2, false), (1, 2, true), (2, 2, true)] {
        let g = build_lattice(rows, cols).unwrap();
        let m = generate_instance(&g, cubic, 5);
        let s = default_schedule(&m, 20).unwrap();
        let set = sample(&m, &s, 1000, 6).unwrap();
        assert_eq!(set.samples.iter().map(|s| s.multiplicity).sum::<usize>(), 1000);
        for smp in &set.samples {
            assert_eq!(smp.energy, m.evaluate(&smp.spins).unwrap());
        }
    }
}

#[test]
fn brute_force_never_loses_to_annealing() {
    for seed in 0..10 {
        let g = if seed % 2 == 0 { build_lattice(1, 2) } else { build_lattice(2, 1) }.unwrap();
        let m = generate_instance(&g, seed % 3 != 0, seed);
        let truth = brute_force(&m, false).unwrap();
        let s = default_schedule(&m, 50).unwrap();
        let set = sample(&m, &s, 200, seed).unwrap();
        assert!(truth.c_min <= set.lowest_energy());
    }
}

#[test]
fn best_fit_is_deterministic() {
    let pts: Vec<(f64, f64)> = [100.0, 400.0, 900.0, 1600.0, 2500.0]
        .iter()
        .map(|&x| (x, 0.003 * x + (x * 0.002f64).exp2()))
        .collect();
    let a = select_best_fit(&pts).unwrap();
    let b = select_best_fit(&pts).unwrap();
    assert_eq!(a, b);
}
