use epifront::model::{scalar_diagnostics, KernelSpec, ModelConfig, ReactionPair};
use epifront::spectral::{assemble_operator, collatz_wielandt_bounds, principal_eigen, principal_eigen_with, EigenSettings};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = ModelConfig> {
    ((0.5..3.0f64, 0.5..3.0f64, 0.3..2.0f64, 0.3..2.0f64), (0.5..4.0f64, 0.5..4.0f64), 0.5..2.0f64).prop_map(
        |((d1, d2, a, b), (p, r), w)| {
            let mut c = ModelConfig::reference();
            c.d1 = d1;
            c.d2 = d2;
            c.a = a;
            c.b = b;
            c.reactions = ReactionPair::Monod { p, q: 1.0, r, s: 1.0 };
            c.kernel1 = KernelSpec::Triangle { width: w };
            c.kernel2 = KernelSpec::TruncatedGaussian { sigma: 0.25 * w };
            c.numerics.dx = Some(0.05 * w);
            c
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eigenvalue_ignores_translation(c in config(), l in 0.1..6.0f64, origin in -50.0..50.0f64) {
        let op = assemble_operator(&c, l).unwrap();
        let s = EigenSettings::from_config(&c);
        let a = principal_eigen_with(&op, &s).unwrap().lambda_p;
        let b = principal_eigen_with(&op, &EigenSettings { origin, ..s }).unwrap().lambda_p;
        prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn eigenvalue_is_increasing_and_bounded(c in config(), l in 0.1..8.0f64, grow in 1.2..3.0f64) {
        let d = scalar_diagnostics(&c);
        let a = principal_eigen(&c, l).unwrap().lambda_p;
        let b = principal_eigen(&c, l * grow).unwrap().lambda_p;
        prop_assert!(a < b);
        for lam in [a, b] {
            prop_assert!(d.gamma_b < lam && lam < d.gamma_a);
        }
    }

    #[test]
    fn restart_gives_same_eigenpair(c in config(), l in 0.2..5.0f64, seed in 0u64..1000) {
        let op = assemble_operator(&c, l).unwrap();
        let s = EigenSettings::from_config(&c);
        let base = principal_eigen_with(&op, &s).unwrap();
        let n = op.len();
        let z = |k: u64| (0..n).map(|i| 1.0 + ((i as u64 * 2654435761 + seed * 97 + k) % 1000) as f64 / 250.0).collect::<Vec<_>>();
        let other = principal_eigen_with(&op, &EigenSettings { start: Some((z(1), z(2))), ..s }).unwrap();
        prop_assert!((base.lambda_p - other.lambda_p).abs() <= 1e-8);
        let norm = |v: &[f64], w: &[f64]| v.iter().chain(w).fold(0.0f64, |m, x| m.max(*x));
        let (n1, n2) = (norm(&base.phi1, &base.phi2), norm(&other.phi1, &other.phi2));
        let dist = base.phi1.iter().zip(&other.phi1).chain(base.phi2.iter().zip(&other.phi2))
            .fold(0.0f64, |m, (a, b)| m.max((a / n1 - b / n2).abs()));
        prop_assert!(dist <= 1e-8, "eigenvector moved {}", dist);
    }

    #[test]
    fn test_functions_bound_the_eigenvalue(c in config(), l in 0.2..5.0f64, seed in 0u64..1000) {
        let op = assemble_operator(&c, l).unwrap();
        let lam = principal_eigen_with(&op, &EigenSettings::from_config(&c)).unwrap().lambda_p;
        let n = op.len();
        let z = |k: u64| (0..n).map(|i| 0.1 + ((i as u64 * 40503 + seed * 31 + k) % 977) as f64 / 977.0).collect::<Vec<_>>();
        let (lo, hi) = collatz_wielandt_bounds(&op, &z(3), &z(7));
        prop_assert!(lo <= lam + 1e-8 && lam <= hi + 1e-8, "{} not in [{}, {}]", lam, lo, hi);
    }
}

#[test]
fn refinement_is_second_order() {
    let lam = |dx: f64| principal_eigen(&ModelConfig::reference().with_dx(dx), 3.0).unwrap().lambda_p;
    let (a, b, c) = (lam(0.1), lam(0.05), lam(0.025));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
}
