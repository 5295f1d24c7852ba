use proptest::prelude::*;
use vessel::equalization::equalize_fn;
use vessel::game::{evaluate, is_nash, potential};
use vessel::oracles::{flow_feasibility_oracle, potential_min_oracle, OracleConfig};
use vessel::solver::{self, SolverOptions};
use vessel::{Game, MonotonePL, Profile, ResourceSet, Tol};

/// Nondecreasing continuous PL function from 0; `strict` forbids flat pieces.
fn pl(strict: bool) -> impl Strategy<Value = MonotonePL> {
    let slope = if strict { 1u32..=12 } else { 0u32..=12 };
    (0u32..=8, prop::collection::vec((1u32..=8, slope.clone()), 0..=3), slope).prop_map(|(v0, pieces, tail)| {
        let mut pts = vec![(0.0, v0 as f64 * 0.25)];
        for (dx, s) in pieces {
            let (x, v) = *pts.last().unwrap();
            let dx = dx as f64 * 0.25;
            pts.push((x + dx, v + dx * s as f64 * 0.25));
        }
        MonotonePL::new(pts, tail as f64 * 0.25).unwrap()
    })
}

fn game(strict: bool, max_n: usize) -> impl Strategy<Value = Game> {
    (1..=max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(pl(strict), n),
            prop::collection::vec((1u64..(1u64 << n), 0.0f64..5.0), 1..=5),
        )
            .prop_map(|(costs, types)| Game::new(costs, types.into_iter().map(|(b, m)| (ResourceSet(b), m))).unwrap())
    })
}

fn with_profile(g: Game) -> impl Strategy<Value = (Game, Profile)> {
    let types: Vec<(ResourceSet, f64)> = g.masses().iter().map(|(&r, &m)| (r, m)).collect();
    let n = g.n();
    prop::collection::vec(prop::collection::vec(0.001f64..1.0, n), types.len()).prop_map(move |ws| {
        let s: Profile = types
            .iter()
            .zip(ws)
            .map(|(&(r, m), w)| {
                let w: Vec<f64> = (0..n).map(|j| if r.contains(j) { w[j] } else { 0.0 }).collect();
                let total: f64 = w.iter().sum();
                (r, w.iter().map(|x| m * x / total).collect())
            })
            .collect();
        (g.clone(), s)
    })
}

const T: Tol = Tol(1e-9);

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_contains_preimage(f in pl(false), x in 0.0f64..10.0) {
        let h = f.eval(x).unwrap();
        let iv = f.inverse_interval(h, T).unwrap();
        prop_assert!(iv.lo <= x + 1e-9 && x <= iv.hi + 1e-9);
    }

    #[test]
    fn loads_conserve_mass((g, s) in game(false, 4).prop_flat_map(with_profile)) {
        let out = evaluate(&g, &s, T).unwrap();
        let total: f64 = out.loads.iter().sum();
        prop_assert!((total - g.total_mass()).abs() <= 1e-9 * g.total_mass().max(1.0));
    }

    #[test]
    fn constructed_profiles_are_nash(g in game(false, 4)) {
        let o = SolverOptions::default();
        let r = solver::construct_equilibrium(&g, &o).unwrap();
        let h = solver::compute_heights(&g, &o).unwrap();
        prop_assert!(is_nash(&g, r.equilibrium.as_ref().unwrap(), T).unwrap());
        for (a, b) in r.heights.iter().zip(&h.heights) {
            prop_assert!(T.eq(*a, *b));
        }
        for w in r.stopping_order.windows(2) {
            prop_assert!(w[1].height < w[0].height);
        }
    }

    #[test]
    fn equilibria_minimize_potential((g, s) in game(true, 4).prop_flat_map(with_profile)) {
        let o = SolverOptions::default();
        let eq = solver::construct_equilibrium(&g, &o).unwrap().equilibrium.unwrap();
        prop_assert!(potential(&g, &eq, T).unwrap() <= potential(&g, &s, T).unwrap() + 1e-9);
    }

    #[test]
    fn loads_unique_without_shared_plateaus(g in game(true, 4)) {
        let o = SolverOptions::default();
        let eq = solver::construct_equilibrium(&g, &o).unwrap().equilibrium.unwrap();
        let loads = evaluate(&g, &eq, T).unwrap().loads;
        let (oracle, _) = potential_min_oracle(&g, &OracleConfig::default()).unwrap();
        for (a, b) in loads.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-6, "{loads:?} vs {oracle:?}");
        }
    }

    #[test]
    fn highest_set_is_unproblematic(g in game(false, 4)) {
        let (p, h) = solver::highest_set(&g, T).unwrap();
        prop_assert!(T.eq(solver::e_value(&g, p, T).unwrap().unwrap(), h));
        prop_assert!(solver::problematic_subsets(&g, p, T).unwrap().is_empty());
    }

    #[test]
    fn removal_composes(g in game(false, 5), a in 0u64..32, b in 0u64..32) {
        let all = g.all().bits();
        let (s1, s2) = (ResourceSet(a & all), ResourceSet(b & all));
        prop_assume!(s1.union(s2) != g.all());
        let (once, names) = solver::remove_resources(&g, s1.union(s2)).unwrap();
        let (first, keep1) = solver::remove_resources(&g, s1).unwrap();
        let local = ResourceSet::from_indices(keep1.iter().enumerate().filter(|(_, j)| s2.contains(**j)).map(|(k, _)| k));
        let (twice, keep2) = solver::remove_resources(&first, local).unwrap();
        let composed: Vec<usize> = keep2.iter().map(|&k| keep1[k]).collect();
        prop_assert_eq!(&names, &composed);
        prop_assert_eq!(once.masses().len(), twice.masses().len());
        for ((r1, m1), (r2, m2)) in once.masses().iter().zip(twice.masses()) {
            prop_assert_eq!(r1, r2);
            prop_assert!((m1 - m2).abs() <= 1e-12);
        }
    }

    #[test]
    fn equalization_keeps_lipschitz_bound(fs in prop::collection::vec(pl(false), 1..=4)) {
        let e = equalize_fn(&fs, T);
        prop_assume!(e.is_ok());
        let e = e.unwrap();
        let k = fs.iter().map(|f| f.lipschitz()).fold(f64::INFINITY, f64::min);
        prop_assert!(e.lipschitz() <= k + 1e-9);
    }

    #[test]
    fn flat_grid_gives_identical_rows(g in game(false, 3), m in 0.0f64..5.0) {
        let r = *g.masses().keys().next().unwrap();
        let rows = solver::sensitivity(&g, r, &[m, m], &SolverOptions::default()).unwrap();
        prop_assert_eq!(&rows[0], &rows[1]);
    }

    #[test]
    fn flow_verdict_ignores_order(
        cells in prop::collection::vec(prop::collection::vec((0u32..3, 0u32..8), 3), 3),
        rows in prop::collection::vec((0u32..10, 0u32..8), 3),
        cols in prop::collection::vec((0u32..10, 0u32..8), 3),
    ) {
        let iv = |(lo, w): (u32, u32)| (lo as f64 * 0.25, (lo + w) as f64 * 0.25);
        let rows: Vec<_> = rows.into_iter().map(iv).collect();
        let cols: Vec<_> = cols.into_iter().map(iv).collect();
        let cells: Vec<Vec<_>> = cells.into_iter().map(|r| r.into_iter().map(iv).collect()).collect();
        let cfg = OracleConfig::default();
        let base = flow_feasibility_oracle(&rows, &cols, &cells, &cfg).unwrap().is_feasible();
        let rrows: Vec<_> = rows.iter().rev().copied().collect();
        let rcols: Vec<_> = cols.iter().rev().copied().collect();
        let rcells: Vec<Vec<_>> = cells.iter().rev().map(|r| r.iter().rev().copied().collect()).collect();
        prop_assert_eq!(base, flow_feasibility_oracle(&rrows, &rcols, &rcells, &cfg).unwrap().is_feasible());
    }
}
