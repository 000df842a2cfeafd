//! Named invariant checks run by `nlqsim validate`.

use std::f64::consts::{FRAC_PI_4, PI};

use nlqsim_core::blochdyn::{
    bloch_to_pair, integrate, ip_rate, pair_to_bloch, BlochVector, DriveSchedule, PairOrientation,
};
use nlqsim_core::bounds::{certify_growth, GrowthRate};
use nlqsim_core::discrimination::{
    alpha_from_epsilon, fig3a_table, gp_overlap_closed_form, gp_t_perp, overlap_trace,
    time_to_overlap, OrientationPolicy,
};
use nlqsim_core::interp::MonotoneCubic;
use nlqsim_core::meanfield::{
    bosonic_overlap, gp_validity_time, meanfield_overlap, CondensateParams,
};
use nlqsim_core::optimizer::{optimize_orientation, rate_functional, PairEmbedding};
use nlqsim_core::search::{
    hadamard_test, integrate_nlse, run_search, search_table, simulate_hadamard_circuit,
    DecisionMode, HamiltonianSchedule, SearchInstance, StateVector, T1Policy,
};
use nlqsim_core::table::Table;
use nlqsim_core::{Nonlinearity, ReducedNonlinearity};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed violation measure.
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &'static str, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
        }
    }

    fn failed(name: &'static str) -> Self {
        Self {
            name,
            passed: false,
            worst: f64::NAN,
            tolerance: f64::NAN,
        }
    }
}

pub struct Suite {
    /// Reduced nonlinearities used by the per-kbar checks.
    pub catalog: Vec<ReducedNonlinearity>,
    pub quick: bool,
    pub seed: u64,
    pub growth_rate: GrowthRate,
}

type CheckFn = fn(&Suite, &mut ChaCha8Rng) -> Option<Check>;

impl Suite {
    pub fn default_catalog() -> Vec<ReducedNonlinearity> {
        ["gp:1", "log:0.5", "sqrt", "quartic", "linear"]
            .iter()
            .map(|s| s.parse::<Nonlinearity>().expect("catalog entry").reduce())
            .collect()
    }

    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            catalog: Self::default_catalog(),
            quick: cfg.quick,
            seed: cfg.seed,
            growth_rate: cfg.growth_rate.into(),
        }
    }

    fn scale(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    /// Run every check in a fixed order; each draws from its own seeded stream.
    pub fn run(&self) -> Vec<Check> {
        let checks: [(&'static str, CheckFn); 27] = [
            ("kbar_odd", kbar_odd),
            ("gp_reduction_exact", gp_reduction_exact),
            ("gp_reduction_generic", gp_reduction_generic),
            ("quartic_zero", quartic_zero),
            ("mu_nu_round_trip", mu_nu_round_trip),
            ("latitude_conserved", latitude_conserved),
            ("bloch_norm", bloch_norm),
            ("drive_neutral", drive_neutral),
            ("rate_consistency", rate_consistency),
            ("z_rotation_invariance", z_rotation_invariance),
            ("closed_form_vs_ode", closed_form_vs_ode),
            ("log_scaling", log_scaling),
            ("lipschitz_consistency", lipschitz_consistency),
            ("general_upper_bound", general_upper_bound),
            ("certified_growth_rate", certified_growth_rate),
            ("latitude_gap_identity", latitude_gap_identity),
            ("latitude_gap_geometry", latitude_gap_geometry),
            ("postselection_identity", postselection_identity),
            ("search_lower_bound", search_lower_bound),
            ("nlse_norm", nlse_norm),
            ("phase_covariance", phase_covariance),
            ("optimizer_constraint", optimizer_constraint),
            ("optimizer_permutation", optimizer_permutation),
            ("optimizer_dim_monotone", optimizer_dim_monotone),
            ("rate_functional_fd", rate_functional_fd),
            ("meanfield_consistency", meanfield_consistency),
            ("meanfield_brute_force", meanfield_brute_force),
        ];
        checks
            .iter()
            .enumerate()
            .map(|(i, (name, f))| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(i as u64);
                f(self, &mut rng).unwrap_or_else(|| Check::failed(name))
            })
            .chain(std::iter::once(csv_deterministic(self)))
            .collect()
    }

    /// Columns `check,status,worst,tolerance`.
    pub fn table(checks: &[Check]) -> Table {
        let mut t = Table::new(&["check", "status", "worst", "tolerance"]);
        for c in checks {
            t.push(vec![
                c.name.into(),
                if c.passed { "pass" } else { "FAIL" }.into(),
                c.worst.into(),
                c.tolerance.into(),
            ]);
        }
        t
    }
}

fn unit(rng: &mut ChaCha8Rng) -> BlochVector {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let p: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    BlochVector::new(r * p.cos(), r * p.sin(), z)
}

fn orientation(rng: &mut ChaCha8Rng) -> PairOrientation {
    PairOrientation::new(
        rng.gen_range(0.01..3.1),
        rng.gen_range(0.01..3.1),
        rng.gen_range(0.0..2.0 * PI),
    )
}

fn gp(g: f64) -> ReducedNonlinearity {
    Nonlinearity::gross_pitaevskii(g)
        .expect("positive strength")
        .reduce()
}

fn kbar_odd(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for k in &s.catalog {
        for _ in 0..s.scale(1000, 200) {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let v = k.eval(z);
            worst = worst.max((v + k.eval(-z)).abs() / v.abs().max(1.0));
        }
    }
    Some(Check::new("kbar_odd", worst, 1e-12))
}

fn gp_reduction_exact(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = rng.gen_range(0.01..20.0);
        let z = rng.gen_range(-1.0..=1.0);
        worst = worst.max((gp(g).eval(z) - g * z).abs());
    }
    Some(Check::new("gp_reduction_exact", worst, 0.0))
}

fn gp_reduction_generic(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let g = rng.gen_range(0.01..20.0);
        let z = rng.gen_range(-1.0..=1.0);
        worst = worst.max((gp(g).eval_generic(z) - g * z).abs() / g.max(1.0));
    }
    Some(Check::new("gp_reduction_generic", worst, 1e-12))
}

fn quartic_zero(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let k = Nonlinearity::quartic_difference(1.0).ok()?.reduce();
    let m = s.scale(100_000, 10_000);
    let worst = (0..=m)
        .map(|i| k.eval(-1.0 + 2.0 * i as f64 / m as f64).abs())
        .fold(0.0, f64::max);
    Some(Check::new("quartic_zero", worst, 1e-12))
}

fn mu_nu_round_trip(_: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let xs: Vec<f64> = (0..=64)
        .map(|i| std::f64::consts::FRAC_1_SQRT_2 * i as f64 / 64.0)
        .collect();
    let mu = MonotoneCubic::from_fn(xs.clone(), |x| x * x).ok()?;
    let nu = MonotoneCubic::from_fn(xs, |x| 2.0 - x.sin()).ok()?;
    let k = Nonlinearity::build_from_mu_nu(mu.clone(), nu.clone())
        .ok()?
        .reduce();
    let worst = (1..=1000)
        .map(|i| {
            let z = i as f64 / 1000.0;
            let x = ((1.0 - z) / 2.0).sqrt();
            (k.eval(z) - (nu.eval(x) - mu.eval(x))).abs()
        })
        .fold(0.0, f64::max);
    Some(Check::new("mu_nu_round_trip", worst, 1e-12))
}

fn free_traces(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Vec<(BlochVector, Vec<BlochVector>)>> {
    let mut out = Vec::new();
    for k in &s.catalog {
        for _ in 0..s.scale(4, 2) {
            let v = unit(rng);
            let tr = integrate(k, &DriveSchedule::none(), &[v], 10.0, 1e-10).ok()?;
            out.push((v, tr.states.into_iter().map(|s| s[0]).collect()));
        }
    }
    Some(out)
}

fn latitude_conserved(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let worst = free_traces(s, rng)?
        .iter()
        .flat_map(|(v, tr)| tr.iter().map(move |w| (w.z - v.z).abs()))
        .fold(0.0, f64::max);
    Some(Check::new("latitude_conserved", worst, 1e-8))
}

fn bloch_norm(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let worst = free_traces(s, rng)?
        .iter()
        .flat_map(|(_, tr)| tr.iter().map(|w| (w.norm() - 1.0).abs()))
        .fold(0.0, f64::max);
    Some(Check::new("bloch_norm", worst, 1e-8))
}

fn drive_neutral(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for _ in 0..s.scale(10, 3) {
        let (a, b) = (unit(rng), unit(rng));
        let w: f64 = rng.gen_range(-3.0..3.0);
        let drive = DriveSchedule::time_dependent(unit(rng), move |t| w * (1.0 + t.sin())).ok()?;
        let tr = integrate(&ReducedNonlinearity::zero(), &drive, &[a, b], 5.0, 1e-10).ok()?;
        for st in &tr.states {
            worst = worst.max((st[0].dot(&st[1]) - a.dot(&b)).abs());
        }
    }
    Some(Check::new("drive_neutral", worst, 1e-8))
}

fn rate_consistency(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let dt = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..s.scale(100, 20) {
        let k = &s.catalog[i % s.catalog.len()];
        let p = orientation(rng);
        let (a, b) = pair_to_bloch(&p);
        let tr = integrate(k, &DriveSchedule::none(), &[a, b], dt, 1e-13).ok()?;
        let f = tr.final_states()?;
        let fd = (f[0].dot(&f[1]) - a.dot(&b)) / dt;
        // the difference quotient is the step-averaged rate
        let r = 0.5 * (ip_rate(k, &p) + ip_rate(k, &bloch_to_pair(&f[0], &f[1])?));
        worst = worst.max((fd - r).abs() / (r.abs() + 1e-5));
    }
    Some(Check::new("rate_consistency", worst, 1e-4))
}

fn z_rotation_invariance(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for k in &s.catalog {
        for _ in 0..s.scale(100, 20) {
            let p = orientation(rng);
            let rot = rng.gen_range(0.0..2.0 * PI);
            let (a, b) = pair_to_bloch(&p);
            let q = bloch_to_pair(&a.rotate_z(rot), &b.rotate_z(rot))?;
            let r = ip_rate(k, &p);
            worst = worst.max((r - ip_rate(k, &q)).abs() / r.abs().max(1.0));
        }
    }
    Some(Check::new("z_rotation_invariance", worst, 1e-12))
}

fn closed_form_vs_ode(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for _ in 0..s.scale(20, 5) {
        let g = rng.gen_range(0.2..5.0);
        let a0 = rng.gen_range(1e-3..3.0);
        let tp = gp_t_perp(g, a0).ok()?;
        let times: Vec<f64> = (0..=100).map(|i| tp * i as f64 / 100.0).collect();
        let tr = overlap_trace(
            &gp(g),
            a0,
            OrientationPolicy::FixedOptimalGp,
            &times,
            &Default::default(),
        )
        .ok()?;
        for (t, o) in tr.times.iter().zip(&tr.overlap) {
            worst = worst.max((o - gp_overlap_closed_form(g, a0, *t).ok()?).abs());
        }
    }
    Some(Check::new("closed_form_vs_ode", worst, 1e-8))
}

fn log_scaling(_: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let g = 1.0;
    let pts: Vec<(f64, f64)> = (2..=6)
        .map(|k| {
            let e = 10f64.powi(-k);
            let a0 = alpha_from_epsilon(e).ok()?;
            let t = time_to_overlap(&gp(g), a0, 0.0, OrientationPolicy::FixedOptimalGp)
                .ok()?
                .t_perp;
            Some(((1.0 / e).ln(), t))
        })
        .collect::<Option<_>>()?;
    let worst = (fit_slope(&pts) * g - 1.0).abs();
    Some(Check::new("log_scaling", worst, 0.02))
}

pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn lipschitz_consistency(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let g = 1.0;
    let policies = [
        OrientationPolicy::FixedOptimalGp,
        OrientationPolicy::Reoptimized {
            grid: s.scale(256, 64),
        },
        OrientationPolicy::Fixed {
            phi: 1.1,
            theta: 2.0,
        },
    ];
    let times: Vec<f64> = (0..=200).map(|i| 4.0 * i as f64 / 200.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for policy in policies {
        let a0 = 1e-3;
        let tr = overlap_trace(&gp(g), a0, policy, &times, &Default::default()).ok()?;
        for (t, a) in tr.times.iter().zip(&tr.alpha) {
            if *a > 0.1 {
                break;
            }
            worst = worst.max(a / ((2.0 * g * t).exp() * a0) - 1.0);
        }
    }
    Some(Check::new("lipschitz_consistency", worst, 1e-6))
}

fn general_upper_bound(_: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let delta = 0.5f64;
    let target = (1.0 - 2.0 * delta * delta).sqrt();
    let cases = [
        (
            1.0,
            ReducedNonlinearity::odd_extension("z+z^3", |z| z + z.powi(3)),
        ),
        (
            2.0,
            ReducedNonlinearity::odd_extension("2z(1+sin^2 3z)", |z| {
                2.0 * z * (1.0 + (3.0 * z).sin().powi(2))
            }),
        ),
        (
            0.5,
            ReducedNonlinearity::odd_extension("sinh/2", |z| 0.5 * z.sinh()),
        ),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (g, k) in &cases {
        for a0 in [1e-3, 0.1] {
            let reference = time_to_overlap(&gp(*g), a0, target, OrientationPolicy::FixedOptimalGp)
                .ok()?
                .t_perp;
            let t = time_to_overlap(k, a0, target, OrientationPolicy::FixedOptimalGp)
                .ok()?
                .t_perp;
            worst = worst.max(t / reference - 1.0);
        }
    }
    Some(Check::new("general_upper_bound", worst, 1e-8))
}

fn certified_growth_rate(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = f64::NEG_INFINITY;
    for spec in ["gp:1", "log:0.5", "sqrt"] {
        let k = spec.parse::<Nonlinearity>().ok()?.reduce();
        for z0 in [0.0, 0.3, 0.6] {
            let Ok(cert) = certify_growth(&k, z0, 0.1, s.scale(10_000, 1000)) else {
                continue;
            };
            let c = s.growth_rate.of(&cert);
            let top = cert.validity_angle();
            for i in 1..=100 {
                let alpha = top * i as f64 / 101.0;
                let realized = ip_rate(&k, &PairOrientation::new(alpha, cert.phi(), cert.theta()));
                worst = worst.max(realized + c * alpha * alpha.sin());
            }
        }
    }
    Some(Check::new("certified_growth_rate", worst, 1e-8))
}

fn latitude_gap_identity(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let z0: f64 = rng.gen_range(-0.999..0.999);
        let alpha = rng.gen_range(0.0..PI);
        let theta = if i % 2 == 0 {
            FRAC_PI_4
        } else {
            3.0 * FRAC_PI_4
        };
        let (zp, zm) = PairOrientation::new(alpha, z0.acos(), theta).latitudes();
        let want = (2.0 * (1.0 - z0 * z0)).sqrt() * (alpha / 2.0).sin();
        worst = worst.max(((zp - zm).abs() - want).abs());
    }
    Some(Check::new("latitude_gap_identity", worst, 1e-12))
}

fn latitude_gap_geometry(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let p = PairOrientation::new(
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..2.0 * PI),
        );
        let (zp, zm) = p.latitudes();
        worst = worst.max((zp - zm).abs() - p.alpha);
    }
    Some(Check::new("latitude_gap_geometry", worst, 1e-12))
}

fn postselection_identity(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for n in 2..=s.scale(64, 16) {
        for t1 in [0.1, 1.0, PI] {
            for marked in [None, Some(n - 1)] {
                let closed = hadamard_test(n, t1, marked.is_some()).ok()?;
                let (p, qubit) = simulate_hadamard_circuit(n, t1, marked).ok()?;
                worst = worst
                    .max((p - closed.success_prob).abs())
                    .max((qubit.amplitudes()[0].norm() - closed.overlap_with_zero).abs());
            }
        }
    }
    Some(Check::new("postselection_identity", worst, 1e-10))
}

fn search_lower_bound(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = f64::NEG_INFINITY;
    for k in (3..=s.scale(8, 5)).map(|k| 1usize << (2 * k)) {
        for g in [0.1, 1.0, 10.0] {
            let kappa = Nonlinearity::gross_pitaevskii(g).ok()?;
            for marked in [None, Some(k / 3)] {
                let r = run_search(
                    &SearchInstance::new(k, marked).ok()?,
                    &kappa,
                    T1Policy::PaperDefault,
                    DecisionMode::Exact,
                )
                .ok()?;
                if !r.respects_lower_bound() {
                    return Some(Check::new("search_lower_bound", f64::INFINITY, 0.0));
                }
                let root = (k as f64).sqrt();
                let delta = 4.0 * (r.success_probability - 0.5);
                worst = worst.max(delta - r.total_time * (1.0 + 2.0 * g * root) / root);
            }
        }
    }
    Some(Check::new("search_lower_bound", worst, 1e-12))
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Option<StateVector> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::from_polar(rng.gen_range(0.05..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    StateVector::new(v.into_iter().map(|c| c / norm).collect()).ok()
}

fn nlse_norm(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for n in [2, 5, 8] {
        for _ in 0..s.scale(4, 1) {
            let psi0 = random_state(rng, n)?;
            let kappa = Nonlinearity::gross_pitaevskii(rng.gen_range(0.1..3.0)).ok()?;
            let tr = integrate_nlse(
                &kappa,
                &HamiltonianSchedule::search(n, 0.5),
                Some(n - 1),
                &psi0,
                3.0,
                1e-10,
                None,
            )
            .ok()?;
            for st in &tr.states {
                worst = worst.max((st.norm() - 1.0).abs());
            }
        }
    }
    Some(Check::new("nlse_norm", worst, 1e-8))
}

fn phase_covariance(s: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    let kappa = Nonlinearity::logarithmic(0.4).ok()?;
    for n in [3, 6] {
        for _ in 0..s.scale(4, 1) {
            let psi0 = random_state(rng, n)?;
            let phase = rng.gen_range(0.0..2.0 * PI);
            let h = HamiltonianSchedule::search(n, 0.3);
            let times = [0.5, 1.0, 2.0];
            let a = integrate_nlse(&kappa, &h, Some(0), &psi0, 2.0, 1e-11, Some(&times)).ok()?;
            let b = integrate_nlse(
                &kappa,
                &h,
                Some(0),
                &psi0.with_phase(phase),
                2.0,
                1e-11,
                Some(&times),
            )
            .ok()?;
            let u = StateVector::uniform(n);
            for (x, y) in a.states.iter().zip(&b.states) {
                worst = worst.max((u.inner(x).norm() - u.inner(y).norm()).abs());
            }
        }
    }
    Some(Check::new("phase_covariance", worst, 1e-12))
}

fn optimizer_constraint(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for spec in ["gp:1", "quartic", "log:0.5"] {
        let kappa: Nonlinearity = spec.parse().ok()?;
        for dim in [2, 3] {
            let r = optimize_orientation(&kappa, 0.7, dim, s.scale(8, 4), s.seed).ok()?;
            worst = worst.max((r.argmax.overlap() - 0.35f64.cos()).abs());
        }
    }
    Some(Check::new("optimizer_constraint", worst, 1e-10))
}

fn optimizer_permutation(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let kappa = Nonlinearity::quartic_difference(1.0).ok()?;
    let r = optimize_orientation(&kappa, 0.5, 4, s.scale(16, 8), s.seed).ok()?;
    let mut worst = 0.0f64;
    for perm in [[2usize, 0, 3, 1], [3, 2, 1, 0], [1, 0, 2, 3]] {
        let pick = |v: &[Complex64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let e = PairEmbedding::new(pick(&r.argmax.psi), pick(&r.argmax.phi)).ok()?;
        worst = worst.max((rate_functional(&kappa, &e).rate - r.best_rate).abs());
    }
    Some(Check::new("optimizer_permutation", worst, 1e-10))
}

fn optimizer_dim_monotone(s: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let kappa = Nonlinearity::quartic_difference(1.0).ok()?;
    let rates: Vec<f64> = (2..=4)
        .map(|d| {
            optimize_orientation(&kappa, 0.5, d, s.scale(24, 12), s.seed)
                .ok()
                .map(|r| r.best_rate)
        })
        .collect::<Option<_>>()?;
    let worst = rates
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Some(Check::new("optimizer_dim_monotone", worst, 1e-10))
}

fn rate_functional_fd(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let h = 1e-6;
    let mut worst = 0.0f64;
    for spec in ["gp:1", "log:0.3", "quartic", "sqrt"] {
        let kappa: Nonlinearity = spec.parse().ok()?;
        let psi = random_state(rng, 4)?;
        let phi = random_state(rng, 4)?;
        let e = PairEmbedding::new(psi.amplitudes().to_vec(), phi.amplitudes().to_vec()).ok()?;
        let rate = rate_functional(&kappa, &e).rate;
        let evolve = |st: &StateVector| {
            integrate_nlse(&kappa, &HamiltonianSchedule::Zero, None, st, h, 1e-13, None)
                .ok()
                .and_then(|tr| tr.states.last().cloned())
        };
        let fd = (evolve(&psi)?.inner(&evolve(&phi)?).norm() - psi.inner(&phi).norm()) / h;
        worst = worst.max((fd - rate).abs() / rate.abs().max(1.0));
    }
    Some(Check::new("rate_functional_fd", worst, 1e-4))
}

fn meanfield_consistency(_: &Suite, _: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for n in [2.0, 10.0, 1e3, 1e6] {
        for g in [0.1, 1.0, 7.0] {
            let v = gp_validity_time(&CondensateParams::with_strength(n, g).ok()?)
                .ok()?
                .t_star;
            let t = gp_t_perp(g, alpha_from_epsilon(1.0 / n).ok()?).ok()?;
            worst = worst.max((v - t).abs() / t.max(1.0));
        }
    }
    Some(Check::new("meanfield_consistency", worst, 1e-12))
}

fn meanfield_brute_force(_: &Suite, rng: &mut ChaCha8Rng) -> Option<Check> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let psi = random_state(rng, 2)?;
        let phi = random_state(rng, 2)?;
        for n in 1..=4 {
            let mf = meanfield_overlap(psi.inner(&phi), n).ok()?;
            let brute = bosonic_overlap(psi.amplitudes(), phi.amplitudes(), n).ok()?;
            worst = worst.max((mf - brute).norm());
        }
    }
    Some(Check::new("meanfield_brute_force", worst, 1e-10))
}

fn csv_deterministic(_: &Suite) -> Check {
    let render = || -> Option<String> {
        let kappa = Nonlinearity::gross_pitaevskii(1.0).ok()?;
        let r = run_search(
            &SearchInstance::new(256, Some(3)).ok()?,
            &kappa,
            T1Policy::PaperDefault,
            DecisionMode::Exact,
        )
        .ok()?;
        Some(fig3a_table(0.1, 7.5, 512).ok()?.to_csv() + &search_table(&[r]).to_csv())
    };
    match (render(), render()) {
        (Some(a), Some(b)) => Check::new("csv_deterministic", if a == b { 0.0 } else { 1.0 }, 0.0),
        _ => Check::failed("csv_deterministic"),
    }
}
