//! One function per subcommand. Each is a pure function of the
//! configuration and its input files; human-readable reports go to the
//! supplied writer, timing to the log.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::PathBuf;
use std::time::Instant;

use bie_core::assembly::{
    assemble_galerkin, interpolate_nodal, navier_residual, solve_galerkin, solve_nystrom, BieProblem, FieldCoeffs,
    ProblemKind, Shape,
};
use bie_core::boundary::BoundaryCurve;
use bie_core::datagen::{
    export_csv, forward_generate, generate_boundaries_with, generate_elastostatic, generate_helmholtz,
    generate_potential_flow, read_boundaries, read_dataset, roundtrip_errors, sample_densities, sample_field_params,
    sample_uniform_values, split, write_boundaries, write_dataset, Dataset, ProblemFamily,
};
use bie_core::fields::{
    elastic_field, error_map, laplace_field, scattered_field, velocity_field, write_field_csv, write_field_png,
    EvalGrid, FieldResult, Side,
};
use bie_core::neuralops::{
    evaluate, project_rows, train_from, write_training_log, AdamParams, Checkpoint, DeepOnetSpec, OperatorData,
    OperatorModel, Schedule, TdoNetSpec, TrainConfig, Trained,
};
use bie_core::trigseries::{CoeffVec, ComplexCoeffVec};
use ndarray::Array2;

use crate::config::RunConfig;
use crate::{at, CliError};

type Out<'a> = &'a mut dyn Write;

/// Seed streams, fixed so that changing one consumer never shifts another.
mod stream {
    pub const BOUNDARIES: u64 = 0;
    pub const DENSITIES: u64 = 1;
    pub const SPEEDS: u64 = 2;
    pub const FIELDS: u64 = 3;
    pub const WAVENUMBERS: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const INIT: u64 = 6;
}

fn create(path: &std::path::Path) -> Result<BufWriter<File>, CliError> {
    at(path, File::create(path).map(BufWriter::new).map_err(Into::into))
}

fn ensure_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Config(format!("{}: {e}", cfg.out.display())))
}

pub fn parse_family(s: &str) -> Result<ProblemFamily, CliError> {
    let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
    Ok(ProblemFamily::parse(&norm)?)
}

// ---------------------------------------------------------------------------
// gen-boundaries

pub fn gen_boundaries(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let c = &cfg.boundaries;
    let start = Instant::now();
    let (curves, stats) = generate_boundaries_with(
        c.count,
        c.order,
        &c.rhos,
        c.curvature_cap,
        cfg.stream_seed(stream::BOUNDARIES),
        c.min_acceptance,
    )?;
    let path = cfg.path(&c.file);
    at(&path, write_boundaries(&path, c.order, &curves))?;
    log::info!("generated {} boundaries in {:.2?}", curves.len(), start.elapsed());
    writeln!(out, "wrote {} boundaries of order {} to {}", curves.len(), c.order, path.display())?;
    writeln!(
        out,
        "attempts {}  accepted {}  acceptance rate {:.4}%",
        stats.attempts,
        stats.accepted,
        100.0 * stats.acceptance_rate()
    )?;
    writeln!(
        out,
        "rejected: curvature {}  not simple {}  degenerate {}",
        stats.rejected_curvature, stats.rejected_not_simple, stats.rejected_degenerate
    )?;
    writeln!(out, "max |curvature| histogram:")?;
    for (i, n) in stats.curvature_histogram(c.curvature_cap).iter().enumerate() {
        writeln!(out, "  [{i:>2}, {:>2})  {n}", i + 1)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-dataset

fn load_boundaries(cfg: &RunConfig, file: &Option<PathBuf>) -> Result<(usize, Vec<BoundaryCurve>), CliError> {
    let path = cfg.path(file.as_ref().unwrap_or(&cfg.boundaries.file));
    let (n, curves) = at(&path, read_boundaries(&path))?;
    if curves.is_empty() {
        return Err(bie_core::error::Error::Empty("boundary file").into());
    }
    Ok((n, curves))
}

/// `count` curves picked at an even stride, so every decay rate stays represented.
fn strided(curves: Vec<BoundaryCurve>, count: Option<usize>) -> Vec<BoundaryCurve> {
    match count {
        Some(m) if m < curves.len() && m > 0 => {
            let len = curves.len();
            (0..m).map(|i| curves[i * len / m].clone()).collect()
        }
        _ => curves,
    }
}

pub fn build_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let d = &cfg.dataset;
    let family = parse_family(&d.problem)?;
    let (_, curves) = load_boundaries(cfg, &d.boundary_file)?;
    let ds = match family {
        ProblemFamily::Idp | ProblemFamily::Edp | ProblemFamily::Inp | ProblemFamily::Enp => {
            let kind = family.kind(&[])?;
            let dens = sample_densities(d.densities, d.order, d.decay, cfg.stream_seed(stream::DENSITIES))?;
            forward_generate(&curves, &dens, kind, d.order, d.quadrature)?
        }
        ProblemFamily::PotentialFlow => {
            let v0s = sample_uniform_values(d.v0_count, d.v0_min, d.v0_max, cfg.stream_seed(stream::SPEEDS));
            generate_potential_flow(&curves, &v0s, d.order, d.quadrature)?
        }
        ProblemFamily::Elastostatic => {
            let params = sample_field_params(d.field_count, cfg.stream_seed(stream::FIELDS));
            generate_elastostatic(&curves, &params, d.shear_modulus, d.poisson, d.order)?
        }
        ProblemFamily::Helmholtz => {
            let ks = sample_uniform_values(d.k_count, d.k_min, d.k_max, cfg.stream_seed(stream::WAVENUMBERS));
            let curves = strided(curves, d.helmholtz_boundaries);
            generate_helmholtz(&curves, &ks, d.direction, d.helmholtz_order, d.helmholtz_quadrature)?
        }
    };
    Ok(ds)
}

pub fn gen_dataset(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let start = Instant::now();
    let ds = build_dataset(cfg)?;
    log::info!("generated {} records in {:.2?}", ds.len(), start.elapsed());
    let path = cfg.path(&cfg.dataset.file);
    at(&path, write_dataset(&path, &ds))?;
    writeln!(
        out,
        "wrote {} {} records (n_b = {}, n_f = {}) to {}",
        ds.len(),
        ds.family.name(),
        ds.n_b,
        ds.n_f,
        path.display()
    )?;
    match ds.family {
        ProblemFamily::Elastostatic | ProblemFamily::Helmholtz => {
            writeln!(out, "round-trip: not applicable (densities come from closed forms or direct solves)")?
        }
        _ => {
            let errs = roundtrip_errors(&ds, cfg.dataset.quadrature)?;
            let max = errs.iter().fold(0.0_f64, |a, &b| a.max(b));
            let mean = errs.iter().sum::<f64>() / errs.len().max(1) as f64;
            writeln!(out, "round-trip relative error: max {max:.3e}  mean {mean:.3e}")?;
        }
    }
    if let Some(csv_path) = &cfg.dataset.csv {
        let p = cfg.path(csv_path);
        export_csv(&ds, create(&p)?)?;
        writeln!(out, "exported CSV to {}", p.display())?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// solve

fn solve_boundary(cfg: &RunConfig) -> Result<BoundaryCurve, CliError> {
    let s = &cfg.solve;
    Ok(match s.shape.as_str() {
        "circle" => BoundaryCurve::circle([0.0, 0.0], s.radius, 1)?,
        "ellipse" => BoundaryCurve::ellipse(s.axes[0], s.axes[1], 1)?,
        "kite" => BoundaryCurve::kite(2)?,
        "file" => {
            let (_, curves) = load_boundaries(cfg, &None)?;
            curves
                .get(s.boundary_index)
                .cloned()
                .ok_or_else(|| CliError::Config(format!("boundary index {} out of range", s.boundary_index)))?
        }
        other => return Err(CliError::Config(format!("unknown shape '{other}'"))),
    })
}

fn solve_data(cfg: &RunConfig) -> Result<CoeffVec, CliError> {
    let s = &cfg.solve;
    let n = s.order;
    if s.f_cos.len() > n || s.f_sin.len() > n {
        return Err(CliError::Config(format!("boundary data has more than {n} harmonics")));
    }
    let mut f = CoeffVec::constant(n, s.f_const);
    for (k, &a) in s.f_cos.iter().enumerate() {
        f.set_cos(k + 1, a);
    }
    for (k, &b) in s.f_sin.iter().enumerate() {
        f.set_sin(k + 1, b);
    }
    Ok(f)
}

pub fn solve_problem(cfg: &RunConfig) -> Result<BieProblem, CliError> {
    let s = &cfg.solve;
    let b = solve_boundary(cfg)?;
    let family = parse_family(&s.problem)?;
    Ok(match family {
        ProblemFamily::Idp | ProblemFamily::Edp | ProblemFamily::Inp | ProblemFamily::Enp => {
            BieProblem::laplace(family.kind(&[])?, b, solve_data(cfg)?)?
        }
        ProblemFamily::PotentialFlow => BieProblem::potential_flow(b, s.v0)?,
        ProblemFamily::Helmholtz => BieProblem::helmholtz(b, s.k, s.direction)?,
        ProblemFamily::Elastostatic => {
            let v = bie_core::datagen::linear_displacement(&b, s.displacement);
            BieProblem::elastostatic(b, s.shear_modulus, s.poisson, v.map(|c| c.resize(s.order)))?
        }
    })
}

fn coefficient_names(n: usize) -> Vec<String> {
    std::iter::once("c0".to_string())
        .chain((1..=n).map(|k| format!("a{k}")))
        .chain((1..=n).map(|k| format!("b{k}")))
        .collect()
}

fn block_names(shape: Shape) -> [&'static str; 2] {
    match shape {
        Shape::Complex => ["re", "im"],
        _ => ["1", "2"],
    }
}

fn write_density_csv(density: &FieldCoeffs, path: &std::path::Path) -> Result<(), CliError> {
    let n = density.order();
    let names = coefficient_names(n);
    let stacked = density.stacked();
    let mut w = create(path)?;
    writeln!(w, "block,coefficient,value")?;
    let blocks: Vec<&str> = match density.shape() {
        Shape::Real => vec!["0"],
        s => block_names(s).to_vec(),
    };
    for (bi, block) in blocks.iter().enumerate() {
        for (i, name) in names.iter().enumerate() {
            writeln!(w, "{block},{name},{:e}", stacked[bi * names.len() + i])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

pub fn solve(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let s = &cfg.solve;
    let p = solve_problem(cfg)?;
    let q = s.quadrature.unwrap_or_else(|| p.kind.min_galerkin_quadrature(s.order));
    let sys = assemble_galerkin(&p, s.order, q)?;
    let sol = solve_galerkin(&sys)?;
    writeln!(out, "{} on a {} boundary, n = {}, Q = {q}", p.kind.name(), s.shape, s.order)?;
    writeln!(out, "condition estimate {:.3e}", sol.condition)?;
    writeln!(out, "Galerkin relative residual {:.3e}", sol.residual)?;
    let names = coefficient_names(s.order);
    let stacked = sol.density.stacked();
    let show = names.len().min(7);
    let blocks = stacked.len() / names.len();
    for bi in 0..blocks {
        let head: Vec<String> = (0..show)
            .map(|i| format!("{}={:.6e}", names[i], stacked[bi * names.len() + i]))
            .collect();
        writeln!(out, "density[{bi}]: {} ...", head.join(" "))?;
    }
    if s.cross_check {
        match (&p.kind, &p.data) {
            (ProblemKind::Elastostatic { g, nu }, bie_core::assembly::BoundaryData::Displacement(v)) => {
                let FieldCoeffs::Pair(t) = &sol.density else {
                    unreachable!("elastostatic densities are pairs")
                };
                let r = navier_residual(&p.boundary, *g, *nu, v, t, s.nystrom_quadrature)?;
                writeln!(out, "collocation residual {r:.3e}")?;
            }
            _ => {
                let nodal = solve_nystrom(&p, s.nystrom_quadrature)?;
                let fine = interpolate_nodal(&nodal)?;
                let coarse = match fine {
                    FieldCoeffs::Real(c) => FieldCoeffs::Real(c.resize(s.order)),
                    FieldCoeffs::Complex(c) => FieldCoeffs::Complex(ComplexCoeffVec::new(
                        c.re.resize(s.order),
                        c.im.resize(s.order),
                    )?),
                    FieldCoeffs::Pair(_) => unreachable!("scalar problems"),
                };
                let d = relative_l2(&coarse.stacked(), &stacked);
                writeln!(out, "Nystrom discrepancy (relative l2) {d:.3e}")?;
            }
        }
    }
    let path = cfg.path(&s.output);
    write_density_csv(&sol.density, &path)?;
    writeln!(out, "wrote density to {}", path.display())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train / eval

pub fn schedule(cfg: &RunConfig, model: &str) -> Result<Schedule, CliError> {
    let t = &cfg.train;
    let name = match t.schedule.as_str() {
        "auto" if model == "deeponet" => "staircase",
        "auto" => "plateau",
        s => s,
    };
    Ok(match name {
        "plateau" => Schedule::PlateauHalve {
            patience_fraction: t.decay_fraction,
            factor: t.decay_factor,
        },
        "staircase" => Schedule::InverseTimeStaircase {
            period_fraction: t.decay_fraction,
            factor: t.decay_factor,
        },
        "constant" => Schedule::Constant,
        other => return Err(CliError::Config(format!("unknown schedule '{other}'"))),
    })
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig, CliError> {
    let t = &cfg.train;
    Ok(TrainConfig {
        batch_size: t.batch_size,
        epochs: t.epochs,
        lr0: t.lr0,
        schedule: schedule(cfg, &t.model)?,
        adam: AdamParams::default(),
        seed: cfg.stream_seed(stream::INIT),
    })
}

pub fn build_model(cfg: &RunConfig, ds: &Dataset) -> Result<OperatorModel, CliError> {
    let t = &cfg.train;
    Ok(match t.model.as_str() {
        "tdonet" => {
            let (g, f) = (ds.gamma_len(), ds.field_len());
            let r = t.rank.unwrap_or(f);
            OperatorModel::TdoNet(TdoNetSpec::uniform(g, f, f, r, &t.hidden, t.output_scale)?)
        }
        "deeponet" => OperatorModel::DeepOnet(DeepOnetSpec::uniform(t.points, t.latent, &t.hidden)?),
        other => return Err(CliError::Config(format!("unknown model '{other}'"))),
    })
}

/// Training inputs in the model's native form: coefficients for TDONet,
/// point samples for DeepONet.
pub fn model_data(model: &OperatorModel, ds: &Dataset) -> Result<OperatorData, CliError> {
    Ok(match model {
        OperatorModel::TdoNet(_) => OperatorData::coefficients(ds)?,
        OperatorModel::DeepOnet(s) => OperatorData::samples(ds, s.points())?,
    })
}

pub fn split_dataset(cfg: &RunConfig, ds: &Dataset) -> Result<(Dataset, Dataset), CliError> {
    Ok(split(ds, cfg.train.train_fraction, cfg.stream_seed(stream::SPLIT))?)
}

fn dataset_path(cfg: &RunConfig, specific: &Option<PathBuf>) -> PathBuf {
    cfg.path(specific.as_ref().unwrap_or(&cfg.dataset.file))
}

pub fn train(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let path = dataset_path(cfg, &cfg.train.dataset);
    let ds = at(&path, read_dataset(&path))?;
    let (tr, te) = split_dataset(cfg, &ds)?;
    let model = build_model(cfg, &ds)?;
    let (a, b) = (model_data(&model, &tr)?, model_data(&model, &te)?);
    let tc = train_config(cfg)?;
    writeln!(
        out,
        "{} with {} parameters on {} {} records ({} train / {} test)",
        model.name(),
        model.param_count(),
        ds.len(),
        ds.family.name(),
        tr.len(),
        te.len()
    )?;
    let start = Instant::now();
    let report = (tc.epochs / 20).max(1);
    let r = train_from(&model, model.init(tc.seed), &a, &b, &tc, |e| {
        if e.epoch % report == 0 {
            log::info!(
                "epoch {} train {:.4e} test {:.4e} lr {:.2e} ({:.1?})",
                e.epoch,
                e.train_loss,
                e.test_loss,
                e.lr,
                start.elapsed()
            );
        }
        ControlFlow::Continue(())
    })?;
    let log_path = cfg.path(&cfg.train.log);
    write_training_log(&r.log, create(&log_path)?)?;
    let ck = Checkpoint {
        model,
        params: r.best_params,
        epochs_run: r.log.len() as u64,
        best_epoch: r.best_epoch as u64,
        best_test_loss: r.best_test_loss,
    };
    let ck_path = cfg.path(&cfg.train.checkpoint);
    at(&ck_path, ck.write(&ck_path))?;
    let last = r.log.last().expect("at least one epoch");
    writeln!(
        out,
        "final epoch {}: train {:.4e} test {:.4e}",
        last.epoch, last.train_loss, last.test_loss
    )?;
    writeln!(out, "best test loss {:.4e} at epoch {}", r.best_test_loss, r.best_epoch)?;
    writeln!(out, "wrote {} and {}", ck_path.display(), log_path.display())?;
    Ok(())
}

fn checkpoint_path(cfg: &RunConfig, specific: &Option<PathBuf>) -> PathBuf {
    cfg.path(specific.as_ref().unwrap_or(&cfg.train.checkpoint))
}

pub fn eval(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let path = checkpoint_path(cfg, &cfg.eval.checkpoint);
    let ck = at(&path, Checkpoint::read(&path))?;
    let path = dataset_path(cfg, &cfg.eval.dataset);
    let ds = at(&path, read_dataset(&path))?;
    let subset = match cfg.eval.split.as_str() {
        "test" => split_dataset(cfg, &ds)?.1,
        "all" => ds.clone(),
        other => return Err(CliError::Config(format!("unknown split '{other}'"))),
    };
    let data = model_data(&ck.model, &subset)?;
    let (metrics, _) = evaluate(
        &Trained {
            model: &ck.model,
            params: &ck.params,
        },
        &data,
    )?;
    let table = metrics.table(ds.family.name(), ck.model.name());
    write!(out, "{table}")?;
    let path = cfg.path(&cfg.eval.table);
    fs::write(&path, &table)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// field

/// Density coefficients predicted for one record, in the record's layout.
pub fn predict_density(ck: &Checkpoint, ds: &Dataset, index: usize) -> Result<Vec<f64>, CliError> {
    let one = ds.with_records(vec![ds.records[index].clone()]);
    let data = model_data(&ck.model, &one)?;
    let pred = ck.model.forward(&ck.params, &data.gamma, &data.f)?;
    let coeffs: Array2<f64> = match ck.model {
        OperatorModel::TdoNet(_) => pred,
        OperatorModel::DeepOnet(_) => project_rows(&pred, ds.n_f)?,
    };
    Ok(coeffs.row(0).to_vec())
}

fn problem_for_record(ds: &Dataset, index: usize) -> Result<BieProblem, CliError> {
    let r = &ds.records[index];
    let kind = ds.family.kind(&r.meta)?;
    let b = r.boundary()?;
    let rhs = ds.rhs(r)?;
    Ok(match (kind, rhs) {
        (ProblemKind::PotentialFlow { v0 }, _) => BieProblem::potential_flow(b, v0)?,
        (ProblemKind::Helmholtz { k, d, .. }, _) => BieProblem::helmholtz(b, k, d)?,
        (ProblemKind::Elastostatic { g, nu }, FieldCoeffs::Pair(v)) => BieProblem::elastostatic(b, g, nu, v)?,
        (kind, FieldCoeffs::Real(ft)) => {
            // f̃ = ±2f; the field needs only the kind, but keep f faithful.
            let s = match kind {
                ProblemKind::Idp | ProblemKind::Enp => -0.5,
                _ => 0.5,
            };
            BieProblem::laplace(kind, b, ft.scale(s))?
        }
        (kind, _) => {
            return Err(CliError::Config(format!(
                "record {index} has the wrong right-hand side shape for {}",
                kind.name()
            )))
        }
    })
}

fn field_of(p: &BieProblem, density: &FieldCoeffs, grid: &EvalGrid) -> Result<FieldResult, CliError> {
    Ok(match (&p.kind, density) {
        (ProblemKind::PotentialFlow { .. }, FieldCoeffs::Real(c)) => velocity_field(p, c, grid)?,
        (ProblemKind::Elastostatic { .. }, FieldCoeffs::Pair(t)) => elastic_field(p, t, grid)?,
        (ProblemKind::Helmholtz { .. }, FieldCoeffs::Complex(c)) => scattered_field(p, c, grid)?,
        (_, FieldCoeffs::Real(c)) => laplace_field(p, c, grid)?,
        _ => return Err(CliError::Config("density shape does not match the problem".into())),
    })
}

pub fn field(cfg: &RunConfig, out: Out) -> Result<(), CliError> {
    ensure_out(cfg)?;
    let f = &cfg.field;
    let path = dataset_path(cfg, &f.dataset);
    let ds = at(&path, read_dataset(&path))?;
    if f.record >= ds.len() {
        return Err(CliError::Config(format!(
            "record {} out of range ({} records)",
            f.record,
            ds.len()
        )));
    }
    let p = problem_for_record(&ds, f.record)?;
    let truth = ds.density(&ds.records[f.record])?;
    let predicted = match &f.checkpoint {
        Some(path) => {
            let path = cfg.path(path);
            let ck = at(&path, Checkpoint::read(&path))?;
            let v = predict_density(&ck, &ds, f.record)?;
            FieldCoeffs::from_stacked(ds.family.shape(), ds.n_f, &v)?
        }
        None => truth.clone(),
    };
    let side = match p.kind {
        ProblemKind::Idp | ProblemKind::Inp | ProblemKind::Elastostatic { .. } => Side::Interior,
        _ => Side::Exterior,
    };
    let margin = if side == Side::Interior { 0.0 } else { f.margin };
    let q = f.quadrature.max((2 * ds.n_f + 2).next_power_of_two());
    let grid = EvalGrid::lattice(&p.boundary, side, f.nx, f.ny, margin, f.clearance)?.with_quadrature(q)?;
    let pred = field_of(&p, &predicted, &grid)?;
    let reference = field_of(&p, &truth, &grid)?;
    let em = error_map(&pred, &reference)?;
    let base = cfg.path(std::path::Path::new(&f.prefix));
    let with = |suffix: &str| PathBuf::from(format!("{}{suffix}", base.display()));
    write_field_csv(&em, create(&with(".csv"))?)?;
    write_field_png(&grid, &pred.values.plot_channel(), &with("_u.png"))?;
    write_field_png(&grid, &reference.values.plot_channel(), &with("_reference.png"))?;
    write_field_png(&grid, em.abs_error.as_deref().unwrap_or_default(), &with("_error.png"))?;
    writeln!(
        out,
        "{} record {}: {} points, max abs error {:.3e}",
        ds.family.name(),
        f.record,
        grid.len(),
        em.max_abs_error().unwrap_or(0.0)
    )?;
    writeln!(out, "wrote {}.csv and {}_{{u,reference,error}}.png", base.display(), base.display())?;
    Ok(())
}
