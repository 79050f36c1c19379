use epifront::model::{scalar_diagnostics, solve_equilibrium_with, KernelSpec, ModelConfig, ReactionPair};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = ModelConfig> {
    (
        (0.2..5.0f64, 0.2..5.0f64, 0.2..3.0f64, 0.2..3.0f64),
        (0.2..6.0f64, 0.2..3.0f64, 0.2..6.0f64, 0.2..3.0f64),
        (0.3..3.0f64, 0.3..3.0f64),
    )
        .prop_map(|((d1, d2, a, b), (p, q, r, s), (w1, w2))| {
            let mut c = ModelConfig::reference();
            c.d1 = d1;
            c.d2 = d2;
            c.a = a;
            c.b = b;
            c.reactions = ReactionPair::Monod { p, q, r, s };
            c.kernel1 = KernelSpec::Triangle { width: w1 };
            c.kernel2 = KernelSpec::CompactBump { radius: w2 };
            c
        })
}

proptest! {
    #[test]
    fn limits_and_reproduction_numbers_are_ordered(c in config()) {
        let d = scalar_diagnostics(&c);
        prop_assert!(d.gamma_a > d.gamma_b);
        prop_assert!(d.r0 > d.rstar);
    }

    #[test]
    fn theta_vectors_are_eigenvectors(c in config()) {
        let d = scalar_diagnostics(&c);
        let (hp, gp) = (c.h_slope(), c.g_slope());
        // A = [[-a, H'(0)], [G'(0), -b]], B = A - diag(d1, d2)
        let ra = ((d.gamma_a + c.a) * d.theta_a - hp).abs().max((d.gamma_a * 1.0 - gp * d.theta_a + c.b).abs());
        let rb = ((d.gamma_b + c.d1 + c.a) * d.theta_b - hp).abs().max((d.gamma_b - gp * d.theta_b + c.d2 + c.b).abs());
        let scale = 1.0 + hp.max(gp).max(c.d1 + c.a).max(c.d2 + c.b);
        prop_assert!(ra <= 1e-12 * scale, "A residual {}", ra);
        prop_assert!(rb <= 1e-12 * scale, "B residual {}", rb);
    }

    #[test]
    fn equilibrium_ignores_scan_step(c in config()) {
        prop_assume!(c.r0() > 1.05);
        let e1 = solve_equilibrium_with(&c.reactions, c.a, c.b, 1e-6).unwrap();
        let e2 = solve_equilibrium_with(&c.reactions, c.a, c.b, 5e-7).unwrap();
        prop_assert!((e1.0 - e2.0).abs() <= 1e-10 && (e1.1 - e2.1).abs() <= 1e-10);
        prop_assert!((c.a * e1.0 - c.reactions.h(e1.1)).abs() <= 1e-12 * (1.0 + e1.0));
        prop_assert!((c.b * e1.1 - c.reactions.g(e1.0)).abs() <= 1e-12 * (1.0 + e1.1));
    }
}
