//! Mean-field product states and the validity window of the
//! Gross-Pitaevskii approximation.

use num_complex::Complex64;

use crate::discrimination::{alpha_from_epsilon, gp_time_to_overlap};
use crate::error::{invalid, Error, Result};
use crate::table::Table;

/// `<MF(psi)|MF(phi)> = <psi|phi>^n_atoms`.
pub fn meanfield_overlap(inner: Complex64, n_atoms: u32) -> Result<Complex64> {
    if inner.norm() > 1.0 + 1e-12 {
        return Err(invalid(
            "inner",
            format!("|inner| must be at most 1, got {}", inner.norm()),
        ));
    }
    Ok(inner.powu(n_atoms))
}

/// Inner product of the bosonic states `(sum_x psi_x a_x^dag)^n |0> / sqrt(n!)`
/// computed by expanding both in the occupation-number basis.
pub fn bosonic_overlap(psi: &[Complex64], phi: &[Complex64], n_atoms: u32) -> Result<Complex64> {
    if psi.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: phi.len(),
        });
    }
    if psi.is_empty() {
        return Err(invalid("psi", "needs at least one mode"));
    }
    if n_atoms > 20 {
        return Err(invalid(
            "n_atoms",
            "occupation expansion limited to 20 atoms",
        ));
    }
    let mut total = Complex64::new(0.0, 0.0);
    let mut occ = vec![0u32; psi.len()];
    compositions(n_atoms, 0, &mut occ, &mut |occ| {
        let a = occupation_amplitude(psi, occ, n_atoms);
        let b = occupation_amplitude(phi, occ, n_atoms);
        total += a.conj() * b;
    });
    Ok(total)
}

fn compositions(remaining: u32, k: usize, occ: &mut [u32], f: &mut impl FnMut(&[u32])) {
    if k + 1 == occ.len() {
        occ[k] = remaining;
        f(occ);
        return;
    }
    for n in 0..=remaining {
        occ[k] = n;
        compositions(remaining - n, k + 1, occ, f);
    }
}

/// `sqrt(n! / prod n_x!) prod psi_x^{n_x}`.
fn occupation_amplitude(psi: &[Complex64], occ: &[u32], n: u32) -> Complex64 {
    let ln_fact = |m: u32| (1..=m).map(|k| (k as f64).ln()).sum::<f64>();
    let ln_multinomial = ln_fact(n) - occ.iter().map(|&m| ln_fact(m)).sum::<f64>();
    let prod: Complex64 = psi.iter().zip(occ).map(|(c, &m)| c.powu(m)).product();
    prod * (0.5 * ln_multinomial).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CondensateParams {
    pub n_atoms: f64,
    /// Interaction strength `U`; `g = U N` when `homogeneous`.
    pub interaction: f64,
    pub g: f64,
    pub homogeneous: bool,
}

impl CondensateParams {
    pub fn homogeneous(n_atoms: f64, interaction: f64) -> Result<Self> {
        check_atoms(n_atoms)?;
        if !(interaction > 0.0 && interaction.is_finite()) {
            return Err(invalid(
                "interaction",
                format!("must be positive, got {interaction}"),
            ));
        }
        Ok(Self {
            n_atoms,
            interaction,
            g: interaction * n_atoms,
            homogeneous: true,
        })
    }

    pub fn with_strength(n_atoms: f64, g: f64) -> Result<Self> {
        check_atoms(n_atoms)?;
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("g", format!("must be positive, got {g}")));
        }
        Ok(Self {
            n_atoms,
            interaction: g / n_atoms,
            g,
            homogeneous: false,
        })
    }
}

fn check_atoms(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() && n.fract() == 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "n_atoms",
            format!("must be an integer >= 2, got {n}"),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityTime {
    pub params: CondensateParams,
    pub target_overlap: f64,
    pub t_star: f64,
    /// `t_star * N / ln N`, reported for homogeneous parameters.
    pub scaled: Option<f64>,
}

/// Time for the optimal Gross-Pitaevskii protocol to take states at overlap
/// `1 - 1/N` to orthogonality: `(2/g) atanh(1 - 1/N)`.
pub fn gp_validity_time(p: &CondensateParams) -> Result<ValidityTime> {
    gp_validity_time_to(p, 0.0)
}

/// As [`gp_validity_time`] but stopping at `target_overlap` (for example
/// `1/sqrt 2` for constant advantage).
pub fn gp_validity_time_to(p: &CondensateParams, target_overlap: f64) -> Result<ValidityTime> {
    check_atoms(p.n_atoms)?;
    let eps = 1.0 / p.n_atoms;
    let t_star = if target_overlap == 0.0 {
        // atanh(1 - eps) without cancellation
        (1.0 / p.g) * ((2.0 - eps) / eps).ln()
    } else {
        gp_time_to_overlap(p.g, alpha_from_epsilon(eps)?, target_overlap)?
    };
    Ok(ValidityTime {
        params: *p,
        target_overlap,
        t_star,
        scaled: p.homogeneous.then(|| t_star * p.n_atoms / p.n_atoms.ln()),
    })
}

/// Informational line printed next to validity reports.
pub const SHARPER_WINDOW_NOTE: &str =
    "note: direct analysis of the condensate dynamics is expected to give the sharper window U*t << 1/N_atoms (not computed)";

/// Columns `N_atoms,g,t_star,t_star_times_N_over_logN`.
pub fn validity_table(rows: &[ValidityTime]) -> Table {
    let mut t = Table::new(&["N_atoms", "g", "t_star", "t_star_times_N_over_logN"]);
    for r in rows {
        t.push(vec![
            r.params.n_atoms.into(),
            r.params.g.into(),
            r.t_star.into(),
            r.scaled.unwrap_or(f64::NAN).into(),
        ]);
    }
    t
}
