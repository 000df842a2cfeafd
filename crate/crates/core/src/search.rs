//! Unstructured search by oracle evolution, a Hadamard test with
//! postselection, and nonlinear discrimination of the resulting qubit; plus an
//! N-dimensional nonlinear Schrödinger integrator used to audit the lower bound
//! on search time.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discrimination::{time_to_overlap, OrientationPolicy};
use crate::error::{invalid, Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::ode::{self, OdeOptions, OdeSystem, Sampling, StepStats};
use crate::table::Table;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchInstance {
    pub n: usize,
    /// Zero-based index of the marked item, if any.
    pub marked: Option<usize>,
}

impl SearchInstance {
    pub fn new(n: usize, marked: Option<usize>) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("must be at least 2, got {n}")));
        }
        if let Some(m) = marked {
            if m >= n {
                return Err(invalid("marked", format!("index {m} outside 0..{n}")));
            }
        }
        Ok(Self { n, marked })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(invalid("amplitudes", "empty state"));
        }
        let n = l2(&amps);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    pub fn uniform(dim: usize) -> Self {
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self { amps: vec![a; dim] }
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut amps = vec![ZERO; dim];
        amps[i] = ONE;
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        inner(&self.amps, &other.amps)
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        let p = Complex64::from_polar(1.0, phase);
        Self {
            amps: self.amps.iter().map(|a| a * p).collect(),
        }
    }
}

fn l2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `1 - e^{-i t}` without cancellation for small `t`.
fn one_minus_phase(t: f64) -> Complex64 {
    let s = (t / 2.0).sin();
    Complex64::new(2.0 * s * s, t.sin())
}

/// `<s|U|s>` for `U = exp(-i t1 |m><m|)`, or 1 without a marked item.
pub fn oracle_overlap(n: usize, t1: f64, marked: bool) -> Complex64 {
    if !marked {
        return ONE;
    }
    ONE - one_minus_phase(t1) / n as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct HadamardTestOutcome {
    pub success_prob: f64,
    pub postselected_qubit: StateVector,
    pub overlap_with_zero: f64,
    /// `1 - overlap_with_zero^2`, computed without cancellation.
    pub deficit: f64,
}

impl HadamardTestOutcome {
    /// `1 - overlap_with_zero`.
    pub fn epsilon(&self) -> f64 {
        self.deficit / (1.0 + self.overlap_with_zero)
    }

    /// Bloch angle between the postselected qubit and `|0>`.
    pub fn alpha0(&self) -> f64 {
        2.0 * self.deficit.sqrt().atan2(self.overlap_with_zero)
    }
}

pub fn hadamard_test(n: usize, t1: f64, marked: bool) -> Result<HadamardTestOutcome> {
    if n < 2 {
        return Err(invalid("n", format!("must be at least 2, got {n}")));
    }
    if !(t1 >= 0.0) {
        return Err(invalid("t1", format!("must be non-negative, got {t1}")));
    }
    let o = oracle_overlap(n, t1, marked);
    let one_minus_o = if marked {
        one_minus_phase(t1) / n as f64
    } else {
        ZERO
    };
    let denom = 2.0 * (1.0 + o.norm_sqr());
    let norm = denom.sqrt();
    let qubit = StateVector {
        amps: vec![(ONE + o) / norm, one_minus_o / norm],
    };
    Ok(HadamardTestOutcome {
        success_prob: (1.0 + o.norm_sqr()) / 2.0,
        overlap_with_zero: (ONE + o).norm() / norm,
        deficit: one_minus_o.norm_sqr() / denom,
        postselected_qubit: qubit,
    })
}

/// Gate-by-gate simulation of the Hadamard test on an ancilla plus an
/// `n`-dimensional register (`2n` amplitudes), with the oracle unitary built
/// by matrix exponentiation. Returns `(success_prob, postselected qubit)`.
pub fn simulate_hadamard_circuit(
    n: usize,
    t1: f64,
    marked: Option<usize>,
) -> Result<(f64, StateVector)> {
    if n < 2 {
        return Err(invalid("n", format!("must be at least 2, got {n}")));
    }
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    if let Some(m) = marked {
        h[(m, m)] = ONE;
    }
    let u = (h * Complex64::new(0.0, -t1)).exp();
    let s = StateVector::uniform(n);
    // amplitudes indexed [ancilla * n + x]
    let mut state = vec![ZERO; 2 * n];
    state[..n].copy_from_slice(s.amplitudes());
    let hadamard = |st: &mut Vec<Complex64>| {
        for x in 0..n {
            let (a, b) = (st[x], st[n + x]);
            st[x] = (a + b) * FRAC_1_SQRT_2;
            st[n + x] = (a - b) * FRAC_1_SQRT_2;
        }
    };
    hadamard(&mut state);
    let upper = nalgebra::DVector::from_column_slice(&state[n..]);
    let moved = &u * upper;
    state[n..].copy_from_slice(moved.as_slice());
    hadamard(&mut state);
    // project the register onto |s>
    let amp0 = inner(s.amplitudes(), &state[..n]);
    let amp1 = inner(s.amplitudes(), &state[n..]);
    let p = amp0.norm_sqr() + amp1.norm_sqr();
    let norm = p.sqrt();
    Ok((
        p,
        StateVector {
            amps: vec![amp0 / norm, amp1 / norm],
        },
    ))
}

/// Shot-sampled Hadamard test, for demonstration only.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledHadamardTest {
    pub shots: usize,
    pub postselected: usize,
    /// Postselected shots with ancilla outcome 0.
    pub zeros: usize,
}

pub fn sample_hadamard_test(
    n: usize,
    t1: f64,
    marked: bool,
    shots: usize,
    seed: u64,
) -> Result<SampledHadamardTest> {
    let out = hadamard_test(n, t1, marked)?;
    let p0 = out.overlap_with_zero.powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SampledHadamardTest {
        shots,
        postselected: 0,
        zeros: 0,
    };
    for _ in 0..shots {
        if rng.gen::<f64>() < out.success_prob {
            res.postselected += 1;
            if rng.gen::<f64>() < p0 {
                res.zeros += 1;
            }
        }
    }
    Ok(res)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum T1Policy {
    /// `t1 = max(1, ln(g N)/g)`, clamped to at most `sqrt N`.
    PaperDefault,
    Explicit(f64),
}

impl fmt::Display for T1Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            T1Policy::PaperDefault => write!(f, "auto"),
            T1Policy::Explicit(t) => write!(f, "{t}"),
        }
    }
}

impl T1Policy {
    pub fn resolve(&self, n: usize, g: f64) -> f64 {
        match *self {
            T1Policy::Explicit(t) => t,
            T1Policy::PaperDefault => {
                let root = (n as f64).sqrt();
                ((g * n as f64).ln() / g).max(1.0).min(root)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Marked,
    Unmarked,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Marked => "marked",
            Decision::Unmarked => "unmarked",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DecisionMode {
    /// Report the most likely outcome of the optimal measurement.
    #[default]
    Exact,
    /// Draw the measurement outcome from a seeded generator.
    Sampled { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchReport {
    pub n: usize,
    pub g: f64,
    pub t1: f64,
    pub t2: f64,
    pub total_time: f64,
    pub decision: Decision,
    /// Optimal success probability for telling the two final states apart.
    pub success_probability: f64,
    /// `min{ln(g N)/g, sqrt N}`.
    pub complexity_budget: f64,
    pub postselection_prob: f64,
    pub epsilon: f64,
    pub alpha0: f64,
    pub final_overlap: f64,
    /// The nonlinearity is too weak and the report describes plain Grover search.
    pub grover_fallback: bool,
    /// `delta sqrt N / (1 + 2 g sqrt N)` with `delta = 1 - final_overlap`.
    pub lower_bound_time: f64,
}

impl SearchReport {
    pub fn respects_lower_bound(&self) -> bool {
        self.total_time >= self.lower_bound_time
    }
}

/// Overlap at which the two branches count as distinguishable.
pub const FINAL_OVERLAP: f64 = FRAC_1_SQRT_2;
pub const MIN_EPSILON: f64 = 1e-15;

pub fn complexity_budget(n: usize, g: f64) -> f64 {
    let root = (n as f64).sqrt();
    if g > 0.0 {
        ((g * n as f64).ln() / g).min(root)
    } else {
        root
    }
}

fn helstrom(overlap: f64) -> f64 {
    (1.0 + (1.0 - overlap * overlap).max(0.0).sqrt()) / 2.0
}

pub fn run_search(
    instance: &SearchInstance,
    kappa: &Nonlinearity,
    t1_policy: T1Policy,
    mode: DecisionMode,
) -> Result<SearchReport> {
    let n = instance.n;
    let root = (n as f64).sqrt();
    let g = kappa.strength();
    let truth = if instance.marked.is_some() {
        Decision::Marked
    } else {
        Decision::Unmarked
    };
    let budget = complexity_budget(n, g);
    let lower_bound = |delta: f64| delta * root / (1.0 + 2.0 * g * root);

    let grover = kappa.is_linear()
        || (matches!(t1_policy, T1Policy::PaperDefault) && g < (n as f64).ln() / root);
    let (t1, t2, final_overlap, postselection_prob, epsilon, alpha0) = if grover {
        // Continuous-time Grover search; the marked branch ends on |m>.
        let t = FRAC_PI_2 * root;
        (t, 0.0, 1.0 / root, 1.0, f64::NAN, f64::NAN)
    } else {
        let t1 = t1_policy.resolve(n, g);
        let ht = hadamard_test(n, t1, true)?;
        let eps = ht.epsilon();
        if eps < MIN_EPSILON {
            return Err(Error::EpsilonTooSmall { epsilon: eps, t1 });
        }
        let alpha0 = ht.alpha0();
        let (t2, ov) = if ht.overlap_with_zero <= FINAL_OVERLAP {
            (0.0, ht.overlap_with_zero)
        } else {
            let res = time_to_overlap(
                &kappa.reduce(),
                alpha0,
                FINAL_OVERLAP,
                OrientationPolicy::FixedOptimalGp,
            )?;
            let a = *res.trace.alpha.last().expect("trace is never empty");
            (res.t_perp, (a / 2.0).cos())
        };
        (t1, t2, ov, ht.success_prob, eps, alpha0)
    };
    let success = helstrom(final_overlap);
    let decision = match mode {
        DecisionMode::Exact => truth,
        DecisionMode::Sampled { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if rng.gen::<f64>() < success {
                truth
            } else if truth == Decision::Marked {
                Decision::Unmarked
            } else {
                Decision::Marked
            }
        }
    };
    Ok(SearchReport {
        n,
        g,
        t1,
        t2,
        total_time: t1 + t2,
        decision,
        success_probability: success,
        complexity_budget: budget,
        postselection_prob,
        epsilon,
        alpha0,
        final_overlap,
        grover_fallback: grover,
        lower_bound_time: lower_bound(1.0 - final_overlap),
    })
}

/// Columns `N,g,t1,t2,total,budget,decision,success_prob`.
pub fn search_table(reports: &[SearchReport]) -> Table {
    let mut t = Table::new(&[
        "N",
        "g",
        "t1",
        "t2",
        "total",
        "budget",
        "decision",
        "success_prob",
    ]);
    for r in reports {
        t.push(vec![
            r.n.into(),
            r.g.into(),
            r.t1.into(),
            r.t2.into(),
            r.total_time.into(),
            r.complexity_budget.into(),
            r.decision.to_string().into(),
            r.success_probability.into(),
        ]);
    }
    t
}

/// Time-dependent Hermitian driving term shared by all trajectories.
#[derive(Clone, Debug, PartialEq)]
pub enum HamiltonianSchedule {
    Zero,
    Constant(DMatrix<Complex64>),
    /// `strength |v><v|` switched on at `t_on`.
    Projector {
        vector: Vec<Complex64>,
        strength: f64,
        t_on: f64,
    },
    /// Piecewise-linear interpolation between Hermitian samples, held
    /// constant outside the sampled range.
    Sampled {
        times: Vec<f64>,
        matrices: Vec<DMatrix<Complex64>>,
    },
}

fn check_hermitian(m: &DMatrix<Complex64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.iter().map(|c| c.norm()).fold(1.0f64, f64::max);
    let dev = (m - m.adjoint())
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

impl HamiltonianSchedule {
    /// The driving term used by the search pipeline: nothing while the oracle
    /// runs (`t < t1`), then `|s><s|`.
    pub fn search(n: usize, t1: f64) -> Self {
        HamiltonianSchedule::Projector {
            vector: StateVector::uniform(n).amps,
            strength: 1.0,
            t_on: t1,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            HamiltonianSchedule::Zero => Ok(()),
            HamiltonianSchedule::Constant(m) => {
                check_hermitian(m)?;
                if m.nrows() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: m.nrows(),
                    });
                }
                Ok(())
            }
            HamiltonianSchedule::Projector {
                vector, strength, ..
            } => {
                if vector.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: vector.len(),
                    });
                }
                if !strength.is_finite() {
                    return Err(invalid("strength", "must be finite"));
                }
                Ok(())
            }
            HamiltonianSchedule::Sampled { times, matrices } => {
                if times.is_empty() || times.len() != matrices.len() {
                    return Err(invalid("schedule", "needs one matrix per sample time"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("schedule", "sample times must increase"));
                }
                for m in matrices {
                    check_hermitian(m)?;
                    if m.nrows() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: m.nrows(),
                        });
                    }
                }
                Ok(())
            }
        }
    }

    /// Times at which the schedule is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            HamiltonianSchedule::Projector { t_on, .. } => vec![*t_on],
            HamiltonianSchedule::Sampled { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    /// `out += H(t) psi`.
    fn apply(&self, t: f64, psi: &[Complex64], out: &mut [Complex64]) {
        match self {
            HamiltonianSchedule::Zero => {}
            HamiltonianSchedule::Constant(m) => matvec_add(m, 1.0, psi, out),
            HamiltonianSchedule::Projector {
                vector,
                strength,
                t_on,
            } => {
                if t >= *t_on {
                    let c = inner(vector, psi) * *strength;
                    for (o, v) in out.iter_mut().zip(vector) {
                        *o += v * c;
                    }
                }
            }
            HamiltonianSchedule::Sampled { times, matrices } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    matvec_add(&matrices[0], 1.0, psi, out);
                } else if k == times.len() {
                    matvec_add(&matrices[k - 1], 1.0, psi, out);
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    matvec_add(&matrices[k - 1], 1.0 - w, psi, out);
                    matvec_add(&matrices[k], w, psi, out);
                }
            }
        }
    }
}

fn matvec_add(m: &DMatrix<Complex64>, w: f64, psi: &[Complex64], out: &mut [Complex64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = ZERO;
        for (j, p) in psi.iter().enumerate() {
            acc += m[(i, j)] * p;
        }
        *o += acc * w;
    }
}

struct NlseSystem<'a> {
    kappa: &'a Nonlinearity,
    h: &'a HamiltonianSchedule,
    oracle: Option<usize>,
    dim: usize,
}

fn to_complex(y: &[f64]) -> Vec<Complex64> {
    y.chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

fn to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

impl NlseSystem<'_> {
    /// `A psi = (H(t) + |m><m| + K(psi)) psi`.
    fn generator(&self, t: f64, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = psi
            .iter()
            .map(|p| p * self.kappa.kappa_sq(p.norm_sqr()))
            .collect();
        if let Some(m) = self.oracle {
            out[m] += psi[m];
        }
        self.h.apply(t, psi, &mut out);
        out
    }
}

impl OdeSystem for NlseSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let psi = to_complex(y);
        let a = self.generator(t, &psi);
        for (k, v) in a.iter().enumerate() {
            // d psi/dt = -i A psi
            dy[2 * k] = v.im;
            dy[2 * k + 1] = -v.re;
        }
    }

    fn project(&self, y: &mut [f64]) -> f64 {
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= n);
        (n - 1.0).abs()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NlseTrace {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub step_stats: StepStats,
}

/// Integrate `i dpsi/dt = (H(t) + |m><m| + K(psi)) psi` with
/// `(K psi)_x = kappa(|psi_x|) psi_x`, recording the state at `samples`
/// (every accepted step when `None`).
pub fn integrate_nlse(
    kappa: &Nonlinearity,
    h: &HamiltonianSchedule,
    oracle: Option<usize>,
    psi0: &StateVector,
    duration: f64,
    tol: f64,
    samples: Option<&[f64]>,
) -> Result<NlseTrace> {
    let dim = psi0.dim();
    h.validate(dim)?;
    if let Some(m) = oracle {
        if m >= dim {
            return Err(invalid("oracle", format!("index {m} outside 0..{dim}")));
        }
    }
    if !(duration >= 0.0) {
        return Err(invalid(
            "duration",
            format!("must be non-negative, got {duration}"),
        ));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    if let Some(ts) = samples {
        if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|&t| t < 0.0 || t > duration) {
            return Err(invalid(
                "samples",
                "must be sorted and inside [0, duration]",
            ));
        }
    }
    let mut sys = NlseSystem {
        kappa,
        h,
        oracle,
        dim,
    };
    let opts = OdeOptions::with_tol(tol, tol * 1e-2);

    // Integrate piecewise between breakpoints of the schedule.
    let mut cuts: Vec<f64> = h
        .breakpoints()
        .into_iter()
        .filter(|&b| b > 0.0 && b < duration)
        .collect();
    cuts.push(duration);
    let mut trace = NlseTrace::default();
    // The flow commutes with a global phase; integrate a canonical
    // representative so that phase-shifted inputs take identical steps.
    let lead = psi0
        .amplitudes()
        .iter()
        .fold(ZERO, |m, &a| if a.norm() > m.norm() { a } else { m });
    let unphase = if lead.norm() > 0.0 {
        lead.conj() / lead.norm()
    } else {
        ONE
    };
    let canonical: Vec<Complex64> = psi0.amplitudes().iter().map(|a| a * unphase).collect();
    let rephase = unphase.conj();
    let mut y = to_real(&canonical);
    let mut t0 = 0.0;
    let mut next = 0usize;
    for (seg, &t1) in cuts.iter().enumerate() {
        let first = seg == 0;
        // Requested times in this segment, plus the segment end to carry the state over.
        let (sampling, wanted) = match samples {
            None => (Sampling::EveryStep, None),
            Some(ts) => {
                let mut pts = Vec::new();
                while next < ts.len() && ts[next] <= t1 {
                    pts.push(ts[next]);
                    next += 1;
                }
                let n_wanted = pts.len();
                if pts.last() != Some(&t1) {
                    pts.push(t1);
                }
                (Sampling::At(pts), Some(n_wanted))
            }
        };
        let sol = ode::integrate(&mut sys, t0, &y, t1, &opts, &sampling, None)?;
        let points = sol.times.iter().zip(&sol.states);
        let recorded: Vec<_> = match wanted {
            None => points.skip(usize::from(!first)).collect(),
            Some(k) => points.take(k).collect(),
        };
        for (t, s) in recorded {
            trace.times.push(*t);
            let amps = to_complex(s).into_iter().map(|a| a * rephase).collect();
            trace.states.push(StateVector { amps });
        }
        let st = &sol.stats;
        trace.step_stats.accepted += st.accepted;
        trace.step_stats.rejected += st.rejected;
        trace.step_stats.rhs_evals += st.rhs_evals;
        trace.step_stats.max_error = trace.step_stats.max_error.max(st.max_error);
        trace.step_stats.max_projection = trace.step_stats.max_projection.max(st.max_projection);
        y = sol
            .states
            .last()
            .expect("solution holds the final state")
            .clone();
        t0 = t1;
    }
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub t: f64,
    pub s: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub n: usize,
    /// Sampled `sup |kappa|` on `[0, 1]`.
    pub g: f64,
    pub rows: Vec<AuditRow>,
    pub min_margin: f64,
    pub holds: bool,
    /// Largest deviation between the derivative identity and a central
    /// finite difference of `<psi|psi_m>`.
    pub derivative_error: f64,
}

pub const AUDIT_CAP: usize = 256;

#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub samples: usize,
    pub tol: f64,
    pub cap: usize,
    /// Step for the finite-difference check of the derivative identity.
    pub fd_step: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            samples: 101,
            tol: 1e-10,
            cap: AUDIT_CAP,
            fd_step: 1e-4,
        }
    }
}

/// Co-integrate the unmarked trajectory and all `n` marked trajectories from
/// `|s>` and check `S(t) = sum_m |<psi|psi_m>| >= N - t sqrt N (1 + 2 g sqrt N)`.
pub fn lower_bound_audit(
    kappa: &Nonlinearity,
    h: &HamiltonianSchedule,
    n: usize,
    duration: f64,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    if n > opts.cap {
        return Err(Error::BudgetExceeded { n, cap: opts.cap });
    }
    if n < 2 {
        return Err(invalid("n", format!("must be at least 2, got {n}")));
    }
    let g = kappa.sup_abs_kappa(10_001);
    if !(g.is_finite() && g < 1e12) {
        return Err(Error::UnboundedKappa(g));
    }
    h.validate(n)?;
    let s0 = StateVector::uniform(n);
    let k = opts.samples.max(2);
    let times: Vec<f64> = (0..k)
        .map(|i| {
            if i + 1 == k {
                duration
            } else {
                duration * i as f64 / (k - 1) as f64
            }
        })
        .collect();
    let oracles: Vec<Option<usize>> = std::iter::once(None).chain((0..n).map(Some)).collect();
    let traces: Vec<NlseTrace> = oracles
        .par_iter()
        .map(|&o| integrate_nlse(kappa, h, o, &s0, duration, opts.tol, Some(&times)))
        .collect::<Result<_>>()?;
    let root = (n as f64).sqrt();
    let slack = 1e-9 * n as f64;
    let mut rows = Vec::with_capacity(k);
    for (i, &t) in times.iter().enumerate() {
        let psi = &traces[0].states[i];
        let s: f64 = traces[1..]
            .iter()
            .map(|tr| psi.inner(&tr.states[i]).norm())
            .sum();
        let bound = n as f64 - t * root * (1.0 + 2.0 * g * root);
        rows.push(AuditRow {
            t,
            s,
            bound,
            margin: s - bound,
        });
    }
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);

    // Derivative identity at the middle sample.
    let mid = k / 2;
    let tm = times[mid];
    let psi = traces[0].states[mid].amplitudes();
    let mut derivative_error = 0.0f64;
    for (m, tr) in traces[1..].iter().enumerate() {
        let phi = tr.states[mid].amplitudes();
        let identity = derivative_identity(kappa, m, psi, phi);
        let fd = finite_difference(kappa, h, m, psi, phi, tm, opts.fd_step);
        derivative_error = derivative_error.max((identity - fd).norm());
    }
    Ok(AuditReport {
        n,
        g,
        holds: min_margin >= -slack,
        rows,
        min_margin,
        derivative_error,
    })
}

/// `d<psi|psi_m>/dt = i sum_x (kappa(|psi_x|) - kappa(|psi_m,x|)) psi_x* psi_m,x - i <psi|m><m|psi_m>`.
pub fn derivative_identity(
    kappa: &Nonlinearity,
    m: usize,
    psi: &[Complex64],
    phi: &[Complex64],
) -> Complex64 {
    let mut d = ZERO;
    for (a, b) in psi.iter().zip(phi) {
        d += a.conj() * b * (kappa.kappa_sq(a.norm_sqr()) - kappa.kappa_sq(b.norm_sqr()));
    }
    d -= psi[m].conj() * phi[m];
    d * Complex64::i()
}

fn finite_difference(
    kappa: &Nonlinearity,
    h: &HamiltonianSchedule,
    m: usize,
    psi: &[Complex64],
    phi: &[Complex64],
    t: f64,
    step: f64,
) -> Complex64 {
    let free = NlseSystem {
        kappa,
        h,
        oracle: None,
        dim: psi.len(),
    };
    let marked = NlseSystem {
        kappa,
        h,
        oracle: Some(m),
        dim: psi.len(),
    };
    let y_psi = to_real(psi);
    let y_phi = to_real(phi);
    let at = |dt: f64| {
        let a = to_complex(&ode::rk4_step(&free, t, &y_psi, dt));
        let b = to_complex(&ode::rk4_step(&marked, t, &y_phi, dt));
        inner(&a, &b)
    };
    (at(step) - at(-step)) / (2.0 * step)
}

/// Columns `t,S,bound,margin`.
pub fn audit_table(report: &AuditReport) -> Table {
    let mut t = Table::new(&["t", "S", "bound", "margin"]);
    for r in &report.rows {
        t.push(vec![
            r.t.into(),
            r.s.into(),
            r.bound.into(),
            r.margin.into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn oracle_overlap_values() {
        assert_eq!(oracle_overlap(10, 3.0, false), ONE);
        assert_eq!(oracle_overlap(10, 0.0, true), ONE);
        assert!(oracle_overlap(2, PI, true).norm() < 1e-15);
    }

    #[test]
    fn hadamard_unmarked_and_n2() {
        let u = hadamard_test(8, 1.0, false).unwrap();
        assert_eq!(u.success_prob, 1.0);
        assert_eq!(u.postselected_qubit.amplitudes(), &[ONE, ZERO]);
        let m = hadamard_test(2, PI, true).unwrap();
        assert!((m.success_prob - 0.5).abs() < 1e-15);
        assert!((m.overlap_with_zero - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn circuit_matches_closed_form() {
        for n in [2, 5, 16] {
            for t1 in [0.1, 1.0, PI] {
                let ht = hadamard_test(n, t1, true).unwrap();
                let (p, q) = simulate_hadamard_circuit(n, t1, Some(n - 1)).unwrap();
                assert!((p - ht.success_prob).abs() < 1e-12);
                assert!((q.amplitudes()[0].norm() - ht.overlap_with_zero).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deficit_is_consistent() {
        let ht = hadamard_test(64, 0.7, true).unwrap();
        let direct = 1.0 - ht.overlap_with_zero.powi(2);
        assert!((ht.deficit - direct).abs() < 1e-15);
        let a = ht.alpha0();
        assert!(((a / 2.0).cos() - ht.overlap_with_zero).abs() < 1e-15);
    }

    #[test]
    fn t1_policy() {
        assert!((T1Policy::PaperDefault.resolve(1024, 1.0) - 1024f64.ln()).abs() < 1e-12);
        assert_eq!(T1Policy::PaperDefault.resolve(1024, 100.0), 1.0);
        assert_eq!(T1Policy::PaperDefault.resolve(64, 0.05), 8.0);
        assert_eq!(T1Policy::Explicit(2.5).resolve(64, 1.0), 2.5);
    }

    #[test]
    fn search_pipeline_gp() {
        let gp = Nonlinearity::gross_pitaevskii(1.0).unwrap();
        let r = run_search(
            &SearchInstance::new(1024, Some(7)).unwrap(),
            &gp,
            T1Policy::PaperDefault,
            DecisionMode::Exact,
        )
        .unwrap();
        assert_eq!(r.decision, Decision::Marked);
        assert!((r.total_time - r.t1 - r.t2).abs() < 1e-12);
        assert!(r.success_probability > 0.85);
        assert!(r.respects_lower_bound());
        let u = run_search(
            &SearchInstance::new(1024, None).unwrap(),
            &gp,
            T1Policy::PaperDefault,
            DecisionMode::Exact,
        )
        .unwrap();
        assert_eq!(u.decision, Decision::Unmarked);
        assert_eq!(u.success_probability, r.success_probability);
    }

    #[test]
    fn tiny_epsilon_is_refused() {
        let gp = Nonlinearity::gross_pitaevskii(1.0).unwrap();
        let r = run_search(
            &SearchInstance::new(1 << 20, Some(0)).unwrap(),
            &gp,
            T1Policy::Explicit(1e-6),
            DecisionMode::Exact,
        );
        assert!(matches!(r, Err(Error::EpsilonTooSmall { .. })));
    }

    #[test]
    fn weak_nonlinearity_falls_back_to_grover() {
        let gp = Nonlinearity::gross_pitaevskii(1e-3).unwrap();
        let r = run_search(
            &SearchInstance::new(256, Some(3)).unwrap(),
            &gp,
            T1Policy::PaperDefault,
            DecisionMode::Exact,
        )
        .unwrap();
        assert!(r.grover_fallback);
        assert!((r.total_time - FRAC_PI_2 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn nlse_constant_without_dynamics() {
        let psi =
            StateVector::new(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).unwrap();
        let tr = integrate_nlse(
            &Nonlinearity::linear(),
            &HamiltonianSchedule::Zero,
            None,
            &psi,
            3.0,
            1e-10,
            None,
        )
        .unwrap();
        assert_eq!(tr.states.last().unwrap(), &psi);
    }

    #[test]
    fn nlse_oracle_only_matches_closed_form() {
        let n = 8;
        let s = StateVector::uniform(n);
        let t1 = 2.3;
        let tr = integrate_nlse(
            &Nonlinearity::linear(),
            &HamiltonianSchedule::Zero,
            Some(3),
            &s,
            t1,
            1e-12,
            Some(&[t1]),
        )
        .unwrap();
        let ov = s.inner(&tr.states[0]);
        assert!((ov - oracle_overlap(n, t1, true)).norm() < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = ONE;
        let psi = StateVector::uniform(2);
        let r = integrate_nlse(
            &Nonlinearity::linear(),
            &HamiltonianSchedule::Constant(m),
            None,
            &psi,
            1.0,
            1e-9,
            None,
        );
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    #[test]
    fn audit_refuses_large_and_unbounded() {
        let gp = Nonlinearity::gross_pitaevskii(1.0).unwrap();
        assert!(matches!(
            lower_bound_audit(
                &gp,
                &HamiltonianSchedule::Zero,
                300,
                1.0,
                &AuditOptions::default()
            ),
            Err(Error::BudgetExceeded { .. })
        ));
        let log = Nonlinearity::logarithmic(1.0).unwrap();
        assert!(matches!(
            lower_bound_audit(
                &log,
                &HamiltonianSchedule::Zero,
                4,
                1.0,
                &AuditOptions::default()
            ),
            Err(Error::UnboundedKappa(_))
        ));
    }

    #[test]
    fn audit_small_instance() {
        let gp = Nonlinearity::gross_pitaevskii(1.0).unwrap();
        let r = lower_bound_audit(
            &gp,
            &HamiltonianSchedule::search(8, 0.3),
            8,
            1.0,
            &AuditOptions {
                samples: 21,
                ..AuditOptions::default()
            },
        )
        .unwrap();
        assert!((r.rows[0].s - 8.0).abs() < 1e-12);
        assert!(r.holds);
        assert!(r.derivative_error < 1e-6, "{}", r.derivative_error);
    }
}
