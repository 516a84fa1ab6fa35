use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use cwaft::bootstrap::bootstrap_se;
use cwaft::curves::{aalen_johansen_cif, default_grid, kaplan_meier, model_cif, overall_survival};
use cwaft::em::{fit, FitConfig, InitStrategy};
use cwaft::selection::score;
use cwaft::sim::{generate, SimScenario};
use cwaft::{Dataset, SurvivalRecord};

use crate::ingest::{ingest, Ingested};
use crate::report::{BootstrapBlock, Manifest, Report, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    LabelSeeded,
    RandomSoft,
}

impl From<InitArg> for InitStrategy {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::LabelSeeded => InitStrategy::LabelSeeded,
            InitArg::RandomSoft => InitStrategy::RandomSoft,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Input CSV with header `time,status,<covariates>`.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of mixture components (at least the largest cause label).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub groups: u32,
    /// Aitken stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub restarts: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub variance_floor: f64,
    #[arg(long, value_enum, default_value_t = InitArg::LabelSeeded)]
    pub init: InitArg,
    /// Center and scale each covariate column before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            n_restarts: self.restarts as usize,
            seed: self.seed,
            variance_floor: self.variance_floor,
            init: self.init.into(),
        }
    }

    fn run_config(&self, replicates: Option<usize>) -> RunConfig {
        RunConfig {
            groups: self.groups as usize,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            restarts: self.restarts as usize,
            variance_floor: self.variance_floor,
            init: self.init.into(),
            standardize: self.standardize,
            replicates,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(2..))]
    pub replicates: u32,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON scenario overriding the built-in two-group design.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub n_total: Option<usize>,
    #[arg(long)]
    pub n_censored: Option<usize>,
    #[arg(long)]
    pub censor_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Data CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional CSV with the latent group and uncensored failure time per row.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Report written by `fit` or `bootstrap`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_points: u32,
    #[arg(long)]
    pub output_dir: PathBuf,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(args: &FitArgs) -> Result<Ingested> {
    let data = ingest(&args.input, args.standardize)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    Ok(data)
}

/// Fits the full data and builds the report; the caller stamps wall time.
fn fitted_report(args: &FitArgs, command: &str, replicates: Option<usize>) -> Result<(Report, Dataset)> {
    let input = load(args)?;
    let result = fit(&input.dataset, args.groups as usize, &args.config())?;
    // the fit may have widened the cause range to the requested groups
    let data = input.dataset.relabel_causes(args.groups as usize)?;
    let sc = score(&result, &data)?;
    let manifest = Manifest {
        command: command.to_string(),
        input: args.input.display().to_string(),
        seed: args.seed,
        config: args.run_config(replicates),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: 0.0,
    };
    let report = Report::new(
        manifest,
        input.standardization,
        &data,
        input.covariate_names,
        &result,
        &sc,
    );
    Ok((report, data))
}

pub fn run_fit(args: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let (mut report, _) = fitted_report(args, "fit", None)?;
    report.manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_text(args.output.as_deref(), &report.to_json())
}

pub fn run_bootstrap(args: &BootstrapArgs) -> Result<()> {
    let start = Instant::now();
    let b = args.replicates as usize;
    let (mut report, data) = fitted_report(&args.fit, "bootstrap", Some(b))?;
    let boot = bootstrap_se(&data, args.fit.groups as usize, &args.fit.config(), b)?;
    if boot.n_failed > 0 {
        eprintln!("warning: {} of {b} bootstrap replicates failed", boot.n_failed);
    }
    report.bootstrap = Some(BootstrapBlock::from_report(&boot));
    report.manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    write_text(args.fit.output.as_deref(), &report.to_json())
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let mut scenario = match &args.scenario {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SimScenario>(&text)
                .map_err(|e| crate::UsageError(format!("scenario {}: {e}", p.display())))?
        }
        None => SimScenario::default(),
    };
    if let Some(n) = args.n_total {
        scenario.n_total = n;
    }
    if let Some(c) = args.n_censored {
        scenario.n_censored = c;
    }
    if let Some(s) = args.censor_scale {
        scenario.censor_scale = s;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let out = generate(&scenario)?;
    let d = out.data.dim();

    let mut w = BufWriter::new(
        File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?,
    );
    write!(w, "time,status")?;
    for j in 1..=d {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    for r in out.data.records() {
        write_record(&mut w, r)?;
    }
    w.flush()?;

    if let Some(path) = &args.truth {
        let mut w = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        writeln!(w, "index,group,failure_time,time,status")?;
        for (t, r) in out.truth.iter().zip(out.data.records()) {
            writeln!(
                w,
                "{},{},{},{},{}",
                t.index,
                t.group,
                t.failure_time,
                r.time,
                r.status.code()
            )?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_record<W: Write>(w: &mut W, r: &SurvivalRecord) -> std::io::Result<()> {
    write!(w, "{},{}", r.time, r.status.code())?;
    for x in &r.covariates {
        write!(w, ",{x}")?;
    }
    writeln!(w)
}

pub fn run_curves(args: &CurvesArgs) -> Result<()> {
    let report = crate::report::Report::load(&args.model)?;
    let model = report
        .model()
        .map_err(|e| crate::UsageError(format!("model report {}: {e}", args.model.display())))?;
    let input = ingest(&args.input, false)?;
    let g_count = model.n_components();
    if input.dataset.n_causes() > g_count {
        return Err(crate::UsageError(format!(
            "input has cause label {} but the model has {g_count} components",
            input.dataset.n_causes()
        ))
        .into());
    }
    if input.dataset.dim() != model.dim() {
        return Err(crate::UsageError(format!(
            "input has {} covariates but the model expects {}",
            input.dataset.dim(),
            model.dim()
        ))
        .into());
    }
    // evaluate on the scale the model was fitted on
    let records = input
        .dataset
        .records()
        .iter()
        .map(|r| {
            let x = match &report.standardization {
                Some(s) => s.apply(&r.covariates),
                None => r.covariates.clone(),
            };
            SurvivalRecord::new(x, r.time, r.status)
        })
        .collect();
    let data = Dataset::with_causes(records, g_count)?;

    fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("creating {}", args.output_dir.display()))?;
    let save = |name: String, curve: &cwaft::curves::StepFunction| -> Result<()> {
        let path = args.output_dir.join(name);
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        curve.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    };
    let grid = default_grid(&data, args.grid_points as usize);
    save("overall_survival.csv".into(), &overall_survival(&model, &data, &grid)?)?;
    save("km.csv".into(), &kaplan_meier(&data))?;
    for g in 1..=g_count {
        save(format!("cif_model_{g}.csv"), &model_cif(&model, &data, g, &grid)?)?;
        save(format!("cif_aj_{g}.csv"), &aalen_johansen_cif(&data, g)?)?;
    }
    Ok(())
}
