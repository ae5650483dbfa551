use gaussrdp_core::classic::{reverse_waterfill, water_level};
use gaussrdp_core::eigen::{decompose, SymMatrix};
use gaussrdp_core::kernel::ComponentKernel;
use gaussrdp_core::montecarlo::build_pair;
use gaussrdp_core::oracle::PrimalPoint;
use gaussrdp_core::solver::{solve, solve_perfect_perception};
use gaussrdp_core::{CaseTag, DualPoint, PerceptionMetric, SolverConfig, SourceSpectrum, TradeoffQuery};
use proptest::prelude::*;

fn spectrum() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..10.0, 1..=4)
}

fn metric() -> impl Strategy<Value = PerceptionMetric> {
    prop_oneof![Just(PerceptionMetric::Kl), Just(PerceptionMetric::W2)]
}

fn symmetric(max_dim: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |raw| {
            let mut m = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                }
            }
            (n, m)
        })
    })
}

proptest! {
    #[test]
    fn eigen_reconstructs_and_is_orthonormal((n, m) in symmetric(6)) {
        let mat = SymMatrix::new(n, m.clone()).unwrap();
        let e = decompose(&mat).unwrap();
        let scale = 1.0 + mat.max_abs();
        for (a, b) in e.reconstruct().iter().zip(&m) {
            prop_assert!((a - b).abs() <= 1e-12 * scale * n as f64);
        }
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = e.basis_row(i).iter().zip(e.basis_row(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-12 * n as f64);
            }
        }
        let sum: f64 = e.eigenvalues.iter().sum();
        prop_assert!((sum - mat.trace()).abs() <= 1e-12 * scale * n as f64);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn kl_stationary_maps_invert(lambda in 0.1f64..10.0, nu1 in 0.05f64..20.0, nu2 in 0.05f64..20.0) {
        let k = ComponentKernel::new(lambda).unwrap();
        let dual = DualPoint { nu1, nu2 };
        let gamma = k.stationary_gamma_kl(dual).unwrap();
        prop_assert!(gamma > 0.0 && gamma < lambda);
        let hat = k.stationary_lambda_hat_kl(gamma, nu1).unwrap();
        let back = k.gamma_from_lambda_hat(hat, nu1);
        prop_assert!((back - gamma).abs() <= 1e-10 * gamma);
        if let Some(closed) = k.gamma_kl_closed_form(dual) {
            prop_assert!((closed - gamma).abs() <= 1e-9 * lambda, "{} vs {}", closed, gamma);
        }
    }

    #[test]
    fn w2_fixed_point_is_interior(lambda in 0.1f64..10.0, nu1 in 0.05f64..20.0, nu2 in 0.05f64..20.0) {
        let k = ComponentKernel::new(lambda).unwrap();
        let dual = DualPoint { nu1, nu2 };
        let fp = k.theta_fixed_point_w2(dual).unwrap();
        prop_assert!(fp.theta > 0.0 && fp.theta < k.theta_upper(dual));
        prop_assert!(fp.residual.abs() < 1e-12);
        let (gamma, hat) = k.stationary_pair_w2(dual).unwrap();
        prop_assert!(gamma > 0.0 && gamma < lambda && hat > 0.0);
    }

    #[test]
    fn water_level_meets_budget(l in spectrum(), frac in 0.01f64..0.99) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let d = frac * s.total_variance();
        let wl = water_level(&s, d).unwrap();
        let used: f64 = wl.per_component.iter().sum();
        prop_assert!((used - d).abs() <= 1e-12 * s.total_variance());
    }

    #[test]
    fn pair_determinant_identity(lambda in 0.1f64..10.0, g in 0.001f64..1.0, hat in 0.0f64..20.0) {
        let gamma = g * lambda;
        let p = build_pair(lambda, gamma, hat).unwrap();
        let want = gamma * hat;
        prop_assert!((p.determinant() - want).abs() <= 1e-12 * (lambda * hat).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn feasible_set_and_rate_are_midpoint_convex(
        l in spectrum(),
        u in prop::collection::vec((0.01f64..0.99, 0.05f64..3.0, 0.01f64..0.99, 0.05f64..3.0), 4),
        m in metric(),
    ) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let lam = s.lambdas();
        let n = lam.len();
        let x = PrimalPoint {
            gammas: (0..n).map(|i| u[i].0 * lam[i]).collect(),
            lambda_hats: (0..n).map(|i| u[i].1 * lam[i]).collect(),
        };
        let y = PrimalPoint {
            gammas: (0..n).map(|i| u[i].2 * lam[i]).collect(),
            lambda_hats: (0..n).map(|i| u[i].3 * lam[i]).collect(),
        };
        let d = 1.001 * x.distortion(&s).max(y.distortion(&s));
        let p = 1.001 * x.perception(&s, m).max(y.perception(&s, m)) + 1e-12;
        let q = TradeoffQuery::new(d, p, m).unwrap();
        prop_assert!(x.is_strictly_feasible(&s, &q) && y.is_strictly_feasible(&s, &q));
        let mid = PrimalPoint {
            gammas: x.gammas.iter().zip(&y.gammas).map(|(a, b)| 0.5 * (a + b)).collect(),
            lambda_hats: x.lambda_hats.iter().zip(&y.lambda_hats).map(|(a, b)| 0.5 * (a + b)).collect(),
        };
        prop_assert!(mid.is_strictly_feasible(&s, &q));
        prop_assert!(mid.rate(&s) <= 0.5 * (x.rate(&s) + y.rate(&s)) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn infinite_budget_is_reverse_waterfill(l in spectrum(), frac in 0.02f64..1.5, m in metric()) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let d = frac * s.total_variance();
        let q = TradeoffQuery::new(d, f64::INFINITY, m).unwrap();
        let a = solve(&s, &q, &SolverConfig::default()).unwrap();
        let b = reverse_waterfill(&s, d).unwrap();
        for (x, y) in a.gammas().iter().zip(b.gammas()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn scalar_perfect_perception_identity(lambda in 0.1f64..10.0, frac in 0.01f64..0.99) {
        let s = SourceSpectrum::from_eigenvalues(&[lambda]).unwrap();
        let d = 2.0 * lambda * frac;
        let p0 = solve_perfect_perception(&s, d, &SolverConfig::default()).unwrap();
        let rd = reverse_waterfill(&s, d - d * d / (4.0 * lambda)).unwrap();
        prop_assert!((p0.total_rate - rd.total_rate).abs() <= 1e-8);
    }

    #[test]
    fn both_active_certificate(l in spectrum(), frac in 0.05f64..1.5, p in 0.005f64..1.0, m in metric()) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let d = frac * s.total_variance();
        let q = TradeoffQuery::new(d, p, m).unwrap();
        let sol = solve(&s, &q, &SolverConfig::default()).unwrap();
        if sol.case_tag == CaseTag::BothActive {
            prop_assert!(sol.kkt_residual <= 1e-8, "{:?}", sol.kkt);
            prop_assert!((sol.achieved_distortion - d).abs() <= 1e-9 * s.total_variance());
            prop_assert!((sol.achieved_perception - p).abs() <= 1e-9);
            for (a, lam) in sol.allocations.iter().zip(s.lambdas()) {
                prop_assert!(lam - a.gamma > 1e-12 * lam);
                prop_assert!(a.rate > 0.0);
            }
        }
    }

    #[test]
    fn rate_ordering_across_budgets(l in spectrum(), frac in 0.05f64..1.5, p in 0.005f64..1.0, m in metric()) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let d = frac * s.total_variance();
        let cfg = SolverConfig::default();
        let mid = solve(&s, &TradeoffQuery::new(d, p, m).unwrap(), &cfg).unwrap().total_rate;
        let free = solve(&s, &TradeoffQuery::unconstrained(d).unwrap(), &cfg).unwrap().total_rate;
        let perfect = solve(&s, &TradeoffQuery::new(d, 0.0, m).unwrap(), &cfg).unwrap().total_rate;
        prop_assert!(free <= mid + 1e-9 && mid <= perfect + 1e-9, "{} {} {}", free, mid, perfect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rate_is_monotone_on_grids(l in spectrum(), p in 0.01f64..1.0, frac in 0.05f64..1.2, m in metric()) {
        let s = SourceSpectrum::from_eigenvalues(&l).unwrap();
        let total = s.total_variance();
        let cfg = SolverConfig::default();
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let d = total * (0.05 + 1.9 * i as f64 / 19.0);
            let r = solve(&s, &TradeoffQuery::new(d, p, m).unwrap(), &cfg).unwrap().total_rate;
            prop_assert!(r <= last + 1e-9);
            last = r;
        }
        let d = frac * total;
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let p = 1e-3 * 10f64.powf(4.0 * i as f64 / 19.0);
            let r = solve(&s, &TradeoffQuery::new(d, p, m).unwrap(), &cfg).unwrap().total_rate;
            prop_assert!(r <= last + 1e-9);
            last = r;
        }
    }
}
