use nlqsim_core::discrimination::{alpha_from_epsilon, gp_t_perp};
use nlqsim_core::meanfield::{
    bosonic_overlap, gp_validity_time, meanfield_overlap, CondensateParams,
};
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn validity_time_is_t_perp() {
    for n in [2.0, 10.0, 1e3, 1e6, 1e9] {
        for g in [0.1, 1.0, 7.0] {
            let p = CondensateParams::with_strength(n, g).unwrap();
            let v = gp_validity_time(&p).unwrap().t_star;
            let t = gp_t_perp(g, alpha_from_epsilon(1.0 / n).unwrap()).unwrap();
            assert!(
                (v - t).abs() <= 1e-12 * t.max(1.0),
                "n={n} g={g}: {v} vs {t}"
            );
        }
    }
}

proptest! {
    #[test]
    fn product_state_overlap_matches_occupation_basis(
        a in 0.0f64..1.0, ta in 0.0f64..6.28, tb in 0.0f64..6.28,
        c in 0.0f64..1.0, tc in 0.0f64..6.28, td in 0.0f64..6.28,
        n in 1u32..=4,
    ) {
        let psi = [Complex64::from_polar(a.sqrt(), ta), Complex64::from_polar((1.0 - a).sqrt(), tb)];
        let phi = [Complex64::from_polar(c.sqrt(), tc), Complex64::from_polar((1.0 - c).sqrt(), td)];
        let inner: Complex64 = psi.iter().zip(&phi).map(|(x, y)| x.conj() * y).sum();
        let mf = meanfield_overlap(inner, n).unwrap();
        let brute = bosonic_overlap(&psi, &phi, n).unwrap();
        prop_assert!((mf - brute).norm() <= 1e-10);
    }
}
