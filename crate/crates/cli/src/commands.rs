use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;

use gradgraph::asymptotics::{fit_expansion, fit_radial, manufacture_rhs, Expansion, FitReport};
use gradgraph::ftau::{calibrate_diagonal, calibrate_isotropic, f_tau_mat, matrix_p, tau_params};
use gradgraph::io::{read_field_csv, read_profile_csv, write_field_csv, write_profile_csv};
use gradgraph::poisson::{laplacian_residual, solve_poisson, PoissonOptions};
use gradgraph::radial::{integrate_radial, PerturbedRhs, RadialInit};
use gradgraph::suite::run_suite;
use gradgraph::{AnnulusGrid, AsymptoticCoefficients, AsymptoticsError, ScalarField, SymMat2, TauParams};

use crate::config::{self, RunConfig};
use crate::{Cli, CliError, Command, Format};

const DEFAULT_SEED: u64 = 11;

/// Runs the selected subcommand. `Ok(false)` means the suite ran but failed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = config::load(cli.config.as_deref())?;
    let mut out = open_output(cli, &cfg)?;
    let passed = match cli.command {
        Command::Calibrate => calibrate(&cfg, cli.format, &mut out).map(|_| true),
        Command::Poisson => poisson(&cfg, cli.format, &mut out).map(|_| true),
        Command::Radial => radial(&cfg, cli.format, &mut out).map(|_| true),
        Command::Manufacture => manufacture(&cfg, cli.format, &mut out).map(|_| true),
        Command::Extract => extract(&cfg, cli.format, &mut out).map(|_| true),
        Command::VerifySuite => verify_suite(cli, &cfg, &mut out),
    }?;
    out.flush()?;
    Ok(passed)
}

fn open_output(cli: &Cli, cfg: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    let path = cli.out.clone().or_else(|| cfg.output.as_ref().map(Into::into));
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(&p).map_err(|e| {
                CliError::Config(format!("cannot create '{}': {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn tau_of(cfg: &RunConfig) -> Result<TauParams<f64>, CliError> {
    Ok(tau_params(cfg.tau.radians()?)?)
}

fn f_inf_of(cfg: &RunConfig, tau: &TauParams<f64>) -> Result<f64, CliError> {
    match cfg.f_inf {
        Some(v) if !v.is_finite() => Err(CliError::Config(format!("f_inf = {v} must be finite"))),
        Some(v) => Ok(v),
        None => Ok(f_tau_mat(&coefficients_of(cfg).a, tau)?),
    }
}

fn grid_of(cfg: &RunConfig) -> Result<AnnulusGrid<f64>, CliError> {
    let g = &cfg.grid;
    Ok(AnnulusGrid::new(g.r_min, g.r_max, g.n_r, g.n_theta)?)
}

/// Writes one flat record as a single-row CSV or a JSON object.
fn emit<S: Serialize>(out: &mut dyn Write, format: Format, record: &S) -> Result<(), CliError> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, record)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.serialize(record)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrateRecord {
    tau: f64,
    branch: &'static str,
    f_inf: f64,
    lam1: f64,
    lam2: f64,
    #[serde(rename = "A11")]
    a11: f64,
    #[serde(rename = "A12")]
    a12: f64,
    #[serde(rename = "A22")]
    a22: f64,
    #[serde(rename = "P11")]
    p11: f64,
    #[serde(rename = "P12")]
    p12: f64,
    #[serde(rename = "P22")]
    p22: f64,
    range_lo: f64,
    range_hi: f64,
}

fn calibrate(cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let tau = tau_of(cfg)?;
    let f_inf = f_inf_of(cfg, &tau)?;
    let (lam1, lam2) = match cfg.lam1 {
        Some(l1) => (l1, calibrate_diagonal(&tau, f_inf, l1)?),
        None => {
            let l = calibrate_isotropic(&tau, f_inf)?;
            (l, l)
        }
    };
    let a = SymMat2::diag(lam1, lam2);
    let p = matrix_p(&a, &tau)?;
    let range = tau.attainable_range();
    emit(
        out,
        format,
        &CalibrateRecord {
            tau: tau.tau(),
            branch: tau.branch().name(),
            f_inf,
            lam1,
            lam2,
            a11: a.m11,
            a12: a.m12,
            a22: a.m22,
            p11: p.m11,
            p12: p.m12,
            p22: p.m22,
            range_lo: range.lo,
            range_hi: range.hi,
        },
    )
}

#[derive(Serialize)]
struct FieldSummary {
    r_min: f64,
    r_max: f64,
    n_r: usize,
    n_theta: usize,
    k1: f64,
    k2: f64,
    residual: f64,
}

fn poisson(cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = grid_of(cfg)?;
    let s = &cfg.source;
    if !(s.power.is_finite() && s.log_power.is_finite() && s.amp.is_finite()) {
        return Err(CliError::Config("source parameters must be finite".into()));
    }
    let k = f64::from(s.harmonic);
    let g = ScalarField::from_polar(grid, |r: f64, t: f64| {
        s.amp * r.powf(-s.power) * r.ln().powf(s.log_power) * (k * t).cos()
    });
    let sol = solve_poisson(&g, &PoissonOptions::default())?;
    match format {
        Format::Csv => write_field_csv(out, &sol.v)?,
        Format::Json => emit(
            out,
            format,
            &FieldSummary {
                r_min: grid.r_min(),
                r_max: grid.r_max(),
                n_r: grid.n_r(),
                n_theta: grid.n_theta(),
                k1: sol.class.k1(),
                k2: sol.class.k2(),
                residual: laplacian_residual(&sol.v, &g)?,
            },
        )?,
    }
    Ok(())
}

#[derive(Serialize)]
struct RadialSummary {
    branch: &'static str,
    lambda: f64,
    nodes: usize,
    r0: f64,
    r_max: f64,
    u_end: f64,
    du_end: f64,
    w_end: f64,
    admissible: bool,
}

fn radial(cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let tau = tau_of(cfg)?;
    let f_inf = f_inf_of(cfg, &tau)?;
    let rc = &cfg.radial;
    let rhs = PerturbedRhs::new(f_inf, cfg.rhs.amp, cfg.rhs.zeta)?;
    rhs.check_range(&tau, rc.r0)?;
    let lambda = calibrate_isotropic(&tau, f_inf)?;
    let base = RadialInit::on_quadratic(lambda, rc.r0, rc.slope_shift);
    let init = RadialInit {
        r0: rc.r0,
        u0: rc.u0.unwrap_or(base.u0),
        du0: rc.du0.unwrap_or(base.du0),
    };
    let profile = integrate_radial(&tau, &rhs, init, rc.r_max, rc.n_steps).map_err(|f| f.error)?;
    match format {
        Format::Csv => write_profile_csv(out, &profile)?,
        Format::Json => {
            let last = profile.len() - 1;
            emit(
                out,
                format,
                &RadialSummary {
                    branch: profile.branch.name(),
                    lambda: profile.lambda,
                    nodes: profile.len(),
                    r0: profile.r[0],
                    r_max: profile.r[last],
                    u_end: profile.u[last],
                    du_end: profile.du[last],
                    w_end: profile.w[last],
                    admissible: profile.is_admissible(&tau),
                },
            )?
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ManufactureSummary {
    f_inf: f64,
    #[serde(rename = "P11")]
    p11: f64,
    #[serde(rename = "P12")]
    p12: f64,
    #[serde(rename = "P22")]
    p22: f64,
    k1: Option<f64>,
    k2: Option<f64>,
}

fn coefficients_of(cfg: &RunConfig) -> AsymptoticCoefficients<f64> {
    let c = &cfg.coefficients;
    AsymptoticCoefficients {
        a: SymMat2::new(c.a[0], c.a[1], c.a[2]),
        b: c.b,
        c: c.c,
        d: c.d,
        d1: c.d1,
        d2: c.d2,
    }
}

fn manufacture(cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let tau = tau_of(cfg)?;
    let grid = grid_of(cfg)?;
    let cf = coefficients_of(cfg);
    let m = manufacture_rhs(&cf, &tau, &grid)?;
    if let Some(path) = &cfg.samples {
        let ex = Expansion::canonical(cf, &tau)?;
        let u = ScalarField::from_cartesian(grid, |x| ex.value(x));
        let file = File::create(path).map_err(|e| CliError::Config(format!("cannot create '{path}': {e}")))?;
        write_field_csv(BufWriter::new(file), &u)?;
    }
    match format {
        Format::Csv => write_field_csv(out, &m.f)?,
        Format::Json => emit(
            out,
            format,
            &ManufactureSummary {
                f_inf: m.f_inf,
                p11: m.p.m11,
                p12: m.p.m12,
                p22: m.p.m22,
                k1: m.decay.as_ref().map(|d| d.k1),
                k2: m.decay.as_ref().map(|d| d.k2),
            },
        )?,
    }
    Ok(())
}

/// Outer two decades of `[first, last]` unless the config names a window.
fn window_of(cfg: &RunConfig, first: f64, last: f64) -> (f64, f64) {
    match cfg.window {
        Some([lo, hi]) => (lo, hi),
        None => ((last / 100.0).max(first), last),
    }
}

fn extract(cfg: &RunConfig, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("extract needs an 'input' CSV path".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read '{path}': {e}")))?;
    let header = text.lines().next().unwrap_or_default().trim();
    let tau = tau_of(cfg)?;
    let report: FitReport<f64> = if header == "r,theta,value" {
        let field: ScalarField<f64> = read_field_csv(text.as_bytes())?;
        let g = field.grid();
        let f_inf = f_inf_of(cfg, &tau)?;
        fit_expansion(&field, &tau, f_inf, window_of(cfg, g.r_min(), g.r_max()))?
    } else if header == "r,u,du,ddu" {
        let rows = read_profile_csv(text.as_bytes())?;
        let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
            return Err(AsymptoticsError::InvalidInput("empty profile".into()).into());
        };
        let window = window_of(cfg, first.r, last.r);
        let lambda = match cfg.f_inf {
            Some(_) => calibrate_isotropic(&tau, f_inf_of(cfg, &tau)?)?,
            None => last.du / last.r,
        };
        let mut profile = gradgraph::RadialProfile {
            branch: tau.branch(),
            lambda,
            r: Vec::with_capacity(rows.len()),
            u: Vec::with_capacity(rows.len()),
            du: Vec::with_capacity(rows.len()),
            ddu: Vec::with_capacity(rows.len()),
            w: Vec::with_capacity(rows.len()),
            dw: Vec::with_capacity(rows.len()),
            ddw: Vec::with_capacity(rows.len()),
        };
        for row in &rows {
            profile.r.push(row.r);
            profile.u.push(row.u);
            profile.du.push(row.du);
            profile.ddu.push(row.ddu);
            profile.w.push(row.u - 0.5 * lambda * row.r * row.r);
            profile.dw.push(row.du - lambda * row.r);
            profile.ddw.push(row.ddu - lambda);
        }
        fit_radial(&profile, &tau, window)?
    } else {
        return Err(CliError::Config(format!(
            "'{path}' has header '{header}'; expected r,theta,value or r,u,du,ddu"
        )));
    };
    emit(out, format, &report.to_record())
}

fn verify_suite(cli: &Cli, cfg: &RunConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let result = run_suite(seed, cli.only.as_deref())?;
    match cli.format {
        Format::Csv => out.write_all(result.to_csv()?.as_bytes())?,
        Format::Json => writeln!(out, "{}", result.to_json()?)?,
    }
    Ok(result.passed())
}
