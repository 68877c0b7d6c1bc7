//! Fixed quadrature rules on the reference simplex, used where lumped
//! nodal quadrature is not accurate enough (mass-type integrals of
//! interpolants). Both rules integrate degree-5 polynomials exactly, so
//! quadratic integrands (`p = 2` mass terms) are exact.

/// 5-point Gauss-Legendre rule on [0, 1]: (node, weight), weights sum to 1.
pub(crate) const SEGMENT_RULE: [(f64, f64); 5] = [
    (0.046_910_077_030_668_07, 0.118_463_442_528_094_54),
    (0.230_765_344_947_158_45, 0.239_314_335_249_683_24),
    (0.5, 0.284_444_444_444_444_44),
    (0.769_234_655_052_841_55, 0.239_314_335_249_683_24),
    (0.953_089_922_969_331_93, 0.118_463_442_528_094_54),
];

/// 7-point degree-5 rule on the reference triangle in barycentric
/// coordinates: (λ₀, λ₁, λ₂, weight), weights sum to 1.
pub(crate) fn triangle_rule() -> [([f64; 3], f64); 7] {
    let a = (6.0 - 15.0f64.sqrt()) / 21.0;
    let b = (6.0 + 15.0f64.sqrt()) / 21.0;
    let wa = (155.0 - 15.0f64.sqrt()) / 1200.0;
    let wb = (155.0 + 15.0f64.sqrt()) / 1200.0;
    let third = 1.0 / 3.0;
    [
        ([third, third, third], 9.0 / 40.0),
        ([a, a, 1.0 - 2.0 * a], wa),
        ([a, 1.0 - 2.0 * a, a], wa),
        ([1.0 - 2.0 * a, a, a], wa),
        ([b, b, 1.0 - 2.0 * b], wb),
        ([b, 1.0 - 2.0 * b, b], wb),
        ([1.0 - 2.0 * b, b, b], wb),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_rule_integrates_low_degrees_exactly() {
        for k in 0..=9u32 {
            let quad: f64 = SEGMENT_RULE.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = 1.0 / (k as f64 + 1.0);
            assert!(
                (quad - exact).abs() < 1e-14,
                "x^{k} on [0,1]: quadrature {quad} vs exact {exact}"
            );
        }
    }

    #[test]
    fn triangle_rule_integrates_barycentric_monomials() {
        // ∫ λ₀^a λ₁^b over the unit triangle = a! b! / (a+b+2)! · 2 · area,
        // normalized here so constant integrates to 1.
        let rule = triangle_rule();
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14, "weights sum to 1: {total}");
        // Mean of λ₀²λ₁² over the triangle: (1/Area)·2!2!0!/(2+2+2)! = 1/90.
        let quad: f64 = rule.iter().map(|(l, w)| w * l[0] * l[0] * l[1] * l[1]).sum();
        let exact = 1.0 / 90.0;
        assert!(
            (quad - exact).abs() < 1e-14,
            "λ₀²λ₁² mean: quadrature {quad} vs exact {exact}"
        );
    }
}
