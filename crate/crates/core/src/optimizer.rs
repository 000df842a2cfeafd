//! Instantaneous separation rate of a state pair and its optimization over
//! orientations: `(phi, theta)` for qubits, unitary frames for `d` dimensions.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::blochdyn::{bloch_to_pair, separation_speed, BlochVector, PairOrientation};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::{Nonlinearity, ReducedNonlinearity};
use crate::table::Table;

/// Rates above this are treated as "no separation".
pub const SEPARATION_FLOOR: f64 = -1e-12;

/// Two unit vectors in `C^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEmbedding {
    pub psi: Vec<Complex64>,
    pub phi: Vec<Complex64>,
}

impl PairEmbedding {
    pub fn new(psi: Vec<Complex64>, phi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                got: phi.len(),
            });
        }
        if psi.len() < 2 {
            return Err(invalid("dim", "must be at least 2"));
        }
        for v in [&psi, &phi] {
            let n = norm(v);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::NotNormalized(n));
            }
        }
        Ok(Self { psi, phi })
    }

    /// The qubit pair with the given Bloch orientation.
    pub fn from_orientation(p: &PairOrientation) -> Self {
        let (a, b) = crate::blochdyn::pair_to_bloch(p);
        Self {
            psi: bloch_to_amplitudes(&a).to_vec(),
            phi: bloch_to_amplitudes(&b).to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn inner(&self) -> Complex64 {
        self.psi
            .iter()
            .zip(&self.phi)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn overlap(&self) -> f64 {
        self.inner().norm()
    }

    /// `(phi, theta)` of a qubit pair, with `theta` reduced modulo `pi`
    /// (exchanging the states shifts `theta` by `pi`).
    pub fn qubit_orientation(&self) -> Option<PairOrientation> {
        if self.dim() != 2 {
            return None;
        }
        let a = amplitudes_to_bloch(self.psi[0], self.psi[1]);
        let b = amplitudes_to_bloch(self.phi[0], self.phi[1]);
        bloch_to_pair(&a, &b).map(|p| PairOrientation::new(p.alpha, p.phi, p.theta.rem_euclid(PI)))
    }

    /// Same pair with one extra zero amplitude.
    pub fn padded(&self) -> Self {
        let mut out = self.clone();
        out.psi.push(Complex64::new(0.0, 0.0));
        out.phi.push(Complex64::new(0.0, 0.0));
        out
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Bloch coordinates with `x + i y = 2 a* b`, `z = |a|^2 - |b|^2`.
pub fn amplitudes_to_bloch(a: Complex64, b: Complex64) -> BlochVector {
    let ab = a.conj() * b * 2.0;
    BlochVector::new(ab.re, ab.im, a.norm_sqr() - b.norm_sqr())
}

pub fn bloch_to_amplitudes(v: &BlochVector) -> [Complex64; 2] {
    let a = ((1.0 + v.z) / 2.0).max(0.0).sqrt();
    if a < 1e-150 {
        return [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    }
    [Complex64::new(a, 0.0), Complex64::new(v.x, v.y) / (2.0 * a)]
}

/// `d|<psi|phi>|/dt` under the nonlinearity alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateValue {
    pub rate: f64,
    /// The states are orthogonal; `rate` is the magnitude of the one-sided derivative.
    pub orthogonal: bool,
}

pub fn rate_functional(kappa: &Nonlinearity, e: &PairEmbedding) -> RateValue {
    rate_of(kappa, &e.psi, &e.phi)
}

fn rate_of(kappa: &Nonlinearity, psi: &[Complex64], phi: &[Complex64]) -> RateValue {
    let mut ip = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for (a, b) in psi.iter().zip(phi) {
        let prod = a.conj() * b;
        ip += prod;
        d += prod * (kappa.kappa_sq(a.norm_sqr()) - kappa.kappa_sq(b.norm_sqr()));
    }
    let d = d * Complex64::i();
    let m = ip.norm();
    if m < 1e-300 {
        RateValue {
            rate: d.norm(),
            orthogonal: true,
        }
    } else {
        RateValue {
            rate: (ip.conj() * d).re / m,
            orthogonal: false,
        }
    }
}

/// Optimal qubit orientation for one separation angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitOrientation {
    pub phi: f64,
    /// In `[0, pi)`.
    pub theta: f64,
    /// `d alpha / dt` at the optimum.
    pub speed: f64,
}

impl QubitOrientation {
    /// `d cos(alpha/2)/dt` at the optimum.
    pub fn overlap_rate(&self, alpha: f64) -> f64 {
        -0.5 * (alpha / 2.0).sin() * self.speed
    }
}

/// Maximize `d alpha/dt` over `(phi, theta)`: a `grid x grid` scan over
/// `[0, pi] x [0, pi)` followed by compass descent.
pub fn best_qubit_orientation(
    kbar: &ReducedNonlinearity,
    alpha: f64,
    grid: usize,
) -> QubitOrientation {
    let grid = grid.max(2);
    let speed =
        |phi: f64, theta: f64| separation_speed(kbar, &PairOrientation::new(alpha, phi, theta));
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..grid {
        let phi = PI * i as f64 / (grid - 1) as f64;
        for j in 0..grid {
            let theta = PI * j as f64 / grid as f64;
            let s = speed(phi, theta);
            if s > best.0 {
                best = (s, phi, theta);
            }
        }
    }
    let (mut s, mut phi, mut theta) = best;
    let mut step = PI / grid as f64;
    while step > 1e-12 {
        let mut moved = false;
        for (dp, dt) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let p = (phi + dp).clamp(0.0, PI);
            let t = theta + dt;
            let v = speed(p, t);
            if v > s {
                (s, phi, theta) = (v, p, t);
                moved = true;
                break;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    QubitOrientation {
        phi,
        theta: theta.rem_euclid(PI),
        speed: s,
    }
}

/// The pair is `psi = u`, `phi = cos(a/2) u + sin(a/2) v` for an orthonormal
/// frame `(u, v)`. Moves are complex Givens rotations applied to both frame
/// vectors on one coordinate pair, plus a phase on `v`; all of them preserve
/// the overlap exactly.
#[derive(Clone, Debug, PartialEq)]
struct Frame {
    c: f64,
    s: f64,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug)]
enum Move {
    /// Rotation by `theta` in the `(i, j)` plane with phase `beta`.
    Givens {
        i: usize,
        j: usize,
        beta: f64,
    },
    Phase,
}

impl Frame {
    fn random(dim: usize, alpha: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut gauss = || {
            // Box-Muller
            let r = (-2.0 * (1.0 - rng.gen::<f64>()).ln()).sqrt();
            Complex64::from_polar(r, rng.gen_range(0.0..TAU))
        };
        let u: Vec<Complex64> = (0..dim).map(|_| gauss()).collect();
        let v: Vec<Complex64> = (0..dim).map(|_| gauss()).collect();
        let (s, c) = (alpha / 2.0).sin_cos();
        let mut f = Self { c, s, u, v };
        f.orthonormalize();
        f
    }

    fn orthonormalize(&mut self) {
        let nu = norm(&self.u);
        self.u.iter_mut().for_each(|x| *x /= nu);
        let p: Complex64 = self.u.iter().zip(&self.v).map(|(a, b)| a.conj() * b).sum();
        for (b, a) in self.v.iter_mut().zip(&self.u) {
            *b -= a * p;
        }
        let nv = norm(&self.v);
        self.v.iter_mut().for_each(|x| *x /= nv);
    }

    fn pair(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let phi = self
            .u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a * self.c + b * self.s)
            .collect();
        (self.u.clone(), phi)
    }

    fn moved(&self, m: Move, x: f64) -> Self {
        let mut out = self.clone();
        match m {
            Move::Phase => {
                let e = Complex64::from_polar(1.0, x);
                out.v.iter_mut().for_each(|b| *b *= e);
            }
            Move::Givens { i, j, beta } => {
                let (st, ct) = x.sin_cos();
                let e = Complex64::from_polar(1.0, beta);
                for w in [&mut out.u, &mut out.v] {
                    let (a, b) = (w[i], w[j]);
                    w[i] = a * ct - e.conj() * b * st;
                    w[j] = e * a * st + b * ct;
                }
            }
        }
        out
    }

    fn rate(&self, kappa: &Nonlinearity) -> f64 {
        let (psi, phi) = self.pair();
        rate_of(kappa, &psi, &phi).rate
    }
}

fn moves(dim: usize) -> Vec<Move> {
    let mut out = Vec::with_capacity(dim * (dim - 1) + 1);
    for i in 0..dim {
        for j in i + 1..dim {
            out.push(Move::Givens { i, j, beta: 0.0 });
            out.push(Move::Givens {
                i,
                j,
                beta: std::f64::consts::FRAC_PI_2,
            });
        }
    }
    out.push(Move::Phase);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub alpha: f64,
    pub dim: usize,
    /// Most negative `d|<psi|phi>|/dt` found.
    pub best_rate: f64,
    pub argmax: PairEmbedding,
    /// For `dim = 2`, the Bloch orientation of the optimum.
    pub qubit: Option<PairOrientation>,
    pub restarts: usize,
    pub seed: u64,
    /// Best rate reached by each restart, in restart order.
    pub restart_rates: Vec<f64>,
    /// `false` when no restart found a rate below [`SEPARATION_FLOOR`].
    pub separating: bool,
}

#[derive(Clone, Debug)]
pub struct OptimizerOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Stop a restart once a sweep improves the rate by less than this.
    pub tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            seed: 0,
            max_sweeps: 5000,
            tol: 1e-12,
        }
    }
}

/// Multi-start coordinate descent over unitary frames. Deterministic for a
/// given seed regardless of thread count.
pub fn optimize_orientation(
    kappa: &Nonlinearity,
    alpha: f64,
    dim: usize,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    optimize_orientation_with(
        kappa,
        alpha,
        dim,
        &OptimizerOptions {
            restarts,
            seed,
            ..OptimizerOptions::default()
        },
    )
}

pub fn optimize_orientation_with(
    kappa: &Nonlinearity,
    alpha: f64,
    dim: usize,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    if dim < 2 {
        return Err(invalid("dim", format!("must be at least 2, got {dim}")));
    }
    if opts.restarts < 1 {
        return Err(invalid("restarts", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= PI) {
        return Err(invalid(
            "alpha",
            format!("must lie in (0, pi], got {alpha}"),
        ));
    }
    let runs: Vec<(f64, Frame)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            descend(Frame::random(dim, alpha, &mut rng), kappa, opts)
        })
        .collect();
    let restart_rates: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (best_idx, _) =
        restart_rates
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
    let (psi, phi) = runs[best_idx].1.pair();
    let argmax = PairEmbedding { psi, phi };
    // Report the rate recomputed from the returned pair.
    let best_rate = rate_functional(kappa, &argmax).rate;
    let qubit = argmax.qubit_orientation();
    Ok(OptimizationResult {
        alpha,
        dim,
        best_rate,
        argmax,
        qubit,
        restarts: opts.restarts,
        seed: opts.seed,
        restart_rates,
        separating: best_rate < SEPARATION_FLOOR,
    })
}

fn descend(mut frame: Frame, kappa: &Nonlinearity, opts: &OptimizerOptions) -> (f64, Frame) {
    const COARSE: usize = 12;
    let all = moves(frame.u.len());
    let mut fx = frame.rate(kappa);
    for _ in 0..opts.max_sweeps {
        let start = fx;
        for &m in &all {
            let mut eval = |x: f64| frame.moved(m, x).rate(kappa);
            let mut best = (fx, 0.0);
            for j in 1..COARSE {
                let x = TAU * j as f64 / COARSE as f64;
                let f = eval(x);
                if f < best.0 {
                    best = (f, x);
                }
            }
            let h = TAU / COARSE as f64;
            let (x, f) = golden_min(&mut eval, best.1 - h, best.1 + h, 40);
            if f < best.0 {
                best = (f, x);
            }
            if best.0 < fx {
                frame = frame.moved(m, best.1);
                fx = frame.rate(kappa);
            }
        }
        frame.orthonormalize();
        fx = frame.rate(kappa);
        if start - fx < opts.tol {
            break;
        }
    }
    (fx, frame)
}

fn golden_min(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `best_rate(dim) - best_rate(2)` over a grid. Columns `alpha,dim,best_rate,gap_vs_dim2`.
pub fn optimality_gap_scan(
    kappa: &Nonlinearity,
    alpha_grid: &[f64],
    dims: &[usize],
    opts: &OptimizerOptions,
) -> Result<Table> {
    if let Some(&d) = dims.iter().find(|&&d| !(2..=8).contains(&d)) {
        return Err(invalid("dims", format!("dimension {d} outside 2..=8")));
    }
    let mut t = Table::new(&["alpha", "dim", "best_rate", "gap_vs_dim2"]);
    for &alpha in alpha_grid {
        let base = optimize_orientation_with(kappa, alpha, 2, opts)?.best_rate;
        for &dim in dims {
            let r = if dim == 2 {
                base
            } else {
                optimize_orientation_with(kappa, alpha, dim, opts)?.best_rate
            };
            t.push(vec![alpha.into(), dim.into(), r.into(), (r - base).into()]);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn gp(g: f64) -> Nonlinearity {
        Nonlinearity::gross_pitaevskii(g).unwrap()
    }

    #[test]
    fn gp_optimal_pair_rate() {
        for alpha in [0.2, 1.0, 2.5] {
            let e = PairEmbedding::from_orientation(&PairOrientation::gp_optimal(alpha));
            let r = rate_functional(&gp(1.5), &e);
            let s = (alpha / 2.0).sin();
            assert!((r.rate + 0.75 * s * s).abs() < 1e-14, "{}", r.rate);
            assert!((e.overlap() - (alpha / 2.0).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_rate_vanishes() {
        let e = PairEmbedding::from_orientation(&PairOrientation::new(1.0, 0.4, 2.0));
        assert_eq!(rate_functional(&Nonlinearity::linear(), &e).rate, 0.0);
    }

    #[test]
    fn orthogonal_pair_is_flagged() {
        let e = PairEmbedding::from_orientation(&PairOrientation::new(PI, 0.4, 2.0));
        assert!(rate_functional(&gp(1.0), &e).orthogonal || e.overlap() > 0.0);
    }

    #[test]
    fn best_qubit_orientation_for_gp() {
        let k = gp(1.0).reduce();
        let o = best_qubit_orientation(&k, 0.5, 64);
        assert!((o.phi - PI / 2.0).abs() < 1e-6);
        assert!((o.theta - 3.0 * FRAC_PI_4).abs() < 1e-6);
    }

    #[test]
    fn frame_moves_preserve_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut f = Frame::random(5, 0.6, &mut rng);
        for (k, m) in moves(5).into_iter().enumerate().cycle().take(200) {
            f = f.moved(m, 0.37 * k as f64);
            let (psi, phi) = f.pair();
            let e = PairEmbedding::new(psi, phi).unwrap();
            assert!((e.overlap() - 0.3f64.cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let q = Nonlinearity::quartic_difference(1.0).unwrap();
        let a = optimize_orientation(&q, 0.5, 3, 4, 11).unwrap();
        let b = optimize_orientation(&q, 0.5, 3, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(optimize_orientation(&gp(1.0), 0.5, 1, 4, 0).is_err());
        assert!(optimize_orientation(&gp(1.0), 0.5, 2, 0, 0).is_err());
        assert!(optimality_gap_scan(&gp(1.0), &[0.5], &[9], &OptimizerOptions::default()).is_err());
    }
}
