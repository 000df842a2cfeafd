use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use nlqsim_core::bounds::{bounds_report, bounds_table, DEFAULT_GRID};
use nlqsim_core::discrimination::{
    alpha_from_epsilon, fig3a_table, fig3b_table, fig4_table, time_to_overlap_with,
    DiscriminationOptions, OrientationPolicy,
};
use nlqsim_core::meanfield::{
    gp_validity_time, validity_table, CondensateParams, SHARPER_WINDOW_NOTE,
};
use nlqsim_core::optimizer::{optimality_gap_scan, optimize_orientation_with, OptimizerOptions};
use nlqsim_core::search::{
    audit_table, lower_bound_audit, run_search, search_table, AuditOptions, DecisionMode,
    HamiltonianSchedule, SearchInstance,
};
use nlqsim_core::table::{Cell, Table};
use nlqsim_core::Kind;

use crate::config::{Cli, Command, RunConfig};
use crate::validate::Suite;

/// Execute one invocation. CSV goes to `--out` or `out`; progress and notes
/// go to `err`. Returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    let cfg = &cli.config;
    let table = match cli.command {
        Command::Discriminate => discriminate(cfg, err)?,
        Command::Bounds => bounds(cfg)?,
        Command::Search => search(cfg)?,
        Command::Audit => audit(cfg, err)?,
        Command::Optimize => optimize(cfg)?,
        Command::GpValidity => {
            writeln!(err, "{SHARPER_WINDOW_NOTE}")?;
            gp_validity(cfg)?
        }
        Command::Figures => return figures(cfg, err).map(|_| 0),
        Command::Validate => {
            let checks = Suite::from_config(cfg).run();
            let failed: Vec<_> = checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect();
            emit(&Suite::table(&checks), cfg.out.as_deref(), out)?;
            if failed.is_empty() {
                writeln!(err, "all {} checks passed", checks.len())?;
                return Ok(0);
            }
            writeln!(err, "failed: {}", failed.join(", "))?;
            return Ok(1);
        }
    };
    emit(&table, cfg.out.as_deref(), out)?;
    Ok(0)
}

fn emit(table: &Table, path: Option<&Path>, out: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => table.save(p)?,
        None => out.write_all(table.to_csv().as_bytes())?,
    }
    Ok(())
}

fn alpha0(cfg: &RunConfig, default: f64) -> anyhow::Result<f64> {
    Ok(match (cfg.epsilon, cfg.alpha0) {
        (Some(e), _) => alpha_from_epsilon(e)?,
        (None, Some(a)) => a,
        (None, None) => default,
    })
}

fn discriminate(cfg: &RunConfig, err: &mut dyn Write) -> anyhow::Result<Table> {
    let kappa = cfg.kappa()?;
    let policy = match kappa.kind() {
        Kind::GrossPitaevskii => OrientationPolicy::FixedOptimalGp,
        _ => OrientationPolicy::reoptimized(),
    };
    let opts = DiscriminationOptions {
        rtol: cfg.tol,
        ..DiscriminationOptions::default()
    };
    let res = time_to_overlap_with(&kappa.reduce(), alpha0(cfg, 0.1)?, 0.0, policy, &opts)?;
    writeln!(
        err,
        "{kappa}: alpha0 = {}, policy = {policy}, t_perp = {}",
        res.alpha0, res.t_perp
    )?;
    let tr = &res.trace;
    let mut t = Table::new(&["t", "alpha", "overlap", "phi", "theta", "omega"]);
    for i in 0..tr.times.len() {
        let (phi, theta) = tr.orientation[i];
        let omega = res.control.get(i).copied().unwrap_or(f64::NAN);
        t.push(vec![
            tr.times[i].into(),
            tr.alpha[i].into(),
            tr.overlap[i].into(),
            phi.into(),
            theta.into(),
            omega.into(),
        ]);
    }
    Ok(t)
}

fn bounds(cfg: &RunConfig) -> anyhow::Result<Table> {
    let kbar = cfg.kappa()?.reduce();
    let grid = if cfg.quick { 1000 } else { DEFAULT_GRID };
    let rows = bounds_report(
        &kbar,
        &[0.0, 0.25, 0.5, 0.75],
        0.1,
        grid,
        alpha0(cfg, 1e-3)?,
        0.1,
        cfg.growth_rate.into(),
    )?;
    Ok(bounds_table(&rows))
}

fn search(cfg: &RunConfig) -> anyhow::Result<Table> {
    let kappa = cfg.kappa()?;
    let instances: Vec<SearchInstance> = match cfg.n {
        Some(n) => vec![SearchInstance::new(n, cfg.marked)?],
        None => (3..=8)
            .flat_map(|k| {
                let n = 1usize << (2 * k);
                [None, Some(cfg.marked.unwrap_or(0))].map(|m| SearchInstance::new(n, m))
            })
            .collect::<Result<_, _>>()?,
    };
    let reports = instances
        .iter()
        .map(|i| run_search(i, &kappa, cfg.t1, DecisionMode::Exact))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(search_table(&reports))
}

fn audit(cfg: &RunConfig, err: &mut dyn Write) -> anyhow::Result<Table> {
    let kappa = cfg.kappa()?;
    let n = cfg.n.unwrap_or(16);
    let g = kappa.strength();
    let root = (n as f64).sqrt();
    let t1 = cfg.t1.resolve(n, g);
    // the bound reaches zero at this time
    let duration = root / (1.0 + 2.0 * g * root);
    let opts = AuditOptions {
        samples: if cfg.quick { 21 } else { 101 },
        tol: cfg.tol,
        ..AuditOptions::default()
    };
    let rep = lower_bound_audit(
        &kappa,
        &HamiltonianSchedule::search(n, t1),
        n,
        duration,
        &opts,
    )?;
    writeln!(
        err,
        "N = {n}, sup|kappa| = {}, holds = {}, min margin = {}, derivative identity error = {}",
        rep.g, rep.holds, rep.min_margin, rep.derivative_error
    )?;
    Ok(audit_table(&rep))
}

fn optimize(cfg: &RunConfig) -> anyhow::Result<Table> {
    let kappa = cfg.kappa()?;
    let alpha = alpha0(cfg, 0.5)?;
    let opts = OptimizerOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..OptimizerOptions::default()
    };
    let Some(dim) = cfg.dim else {
        let dims: Vec<usize> = if cfg.quick {
            (2..=4).collect()
        } else {
            (2..=6).collect()
        };
        return Ok(optimality_gap_scan(&kappa, &[alpha], &dims, &opts)?);
    };
    let r = optimize_orientation_with(&kappa, alpha, dim, &opts)?;
    let (phi, theta) = r.qubit.map_or((f64::NAN, f64::NAN), |q| (q.phi, q.theta));
    let mut t = Table::new(&[
        "alpha",
        "dim",
        "restarts",
        "seed",
        "best_rate",
        "separating",
        "phi",
        "theta",
    ]);
    t.push(vec![
        r.alpha.into(),
        Cell::Int(r.dim as i64),
        Cell::Int(r.restarts as i64),
        Cell::Text(r.seed.to_string()),
        r.best_rate.into(),
        r.separating.into(),
        phi.into(),
        theta.into(),
    ]);
    Ok(t)
}

fn gp_validity(cfg: &RunConfig) -> anyhow::Result<Table> {
    let u = cfg.interaction.unwrap_or(1e-3);
    let atoms: Vec<f64> = match cfg.atoms {
        Some(n) => vec![n],
        None => vec![1e3, 1e4, 1e5, 1e6],
    };
    let rows = atoms
        .iter()
        .map(|&n| gp_validity_time(&CondensateParams::homogeneous(n, u)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(validity_table(&rows))
}

fn figures(cfg: &RunConfig, err: &mut dyn Write) -> anyhow::Result<()> {
    let dir = cfg.out.clone().unwrap_or_else(|| "figures".into());
    if dir.exists() && !dir.is_dir() {
        bail!("{} exists and is not a directory", dir.display());
    }
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let tables = [
        ("fig3a.csv", fig3a_table(alpha0(cfg, 0.1)?, 7.5, 512)?),
        ("fig3b.csv", fig3b_table(512)?),
        ("fig4.csv", fig4_table(512)),
    ];
    for (name, table) in tables {
        let path = dir.join(name);
        table.save(&path)?;
        writeln!(err, "wrote {}", path.display())?;
    }
    Ok(())
}
