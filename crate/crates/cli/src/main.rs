//! `randcrowns` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randcrowns::experiments::{GridRange, Metric};
use randcrowns::io::{load_config, RunConfig};
use randcrowns::matching::{PenaltyMode, Strategy};
use randcrowns::{Error, PlotFrame};

#[derive(Parser, Debug)]
#[command(
    name = "randcrowns",
    version,
    about = "Score crown delineations against imprecise targets"
)]
struct Cli {
    /// Run configuration (TOML, or JSON when the extension is .json).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Log per-crown skips and clipped edge rings to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags overriding the matching config keys.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// frame.x_min
    #[arg(
        long,
        global = true,
        allow_hyphen_values = true,
        help_heading = "Config overrides"
    )]
    x_min: Option<f64>,
    /// frame.y_min
    #[arg(
        long,
        global = true,
        allow_hyphen_values = true,
        help_heading = "Config overrides"
    )]
    y_min: Option<f64>,
    /// frame.x_max
    #[arg(
        long,
        global = true,
        allow_hyphen_values = true,
        help_heading = "Config overrides"
    )]
    x_max: Option<f64>,
    /// frame.y_max
    #[arg(
        long,
        global = true,
        allow_hyphen_values = true,
        help_heading = "Config overrides"
    )]
    y_max: Option<f64>,
    /// frame.resolution_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    resolution: Option<f64>,
    /// params.alpha_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    alpha: Option<f64>,
    /// params.omega_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    omega: Option<f64>,
    /// params.gamma
    #[arg(long, global = true, help_heading = "Config overrides")]
    gamma: Option<f64>,
    /// params.delta_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    delta: Option<f64>,
    /// params.ratio_tol
    #[arg(long, global = true, help_heading = "Config overrides")]
    ratio_tol: Option<f64>,
    /// metric (rand_crowns, iou, iou_crowns)
    #[arg(long, global = true, value_parser = parse_metric, help_heading = "Config overrides")]
    metric: Option<Metric>,
    /// matching.strategy (max_iou, nearest_center)
    #[arg(long, global = true, value_parser = parse_strategy, help_heading = "Config overrides")]
    strategy: Option<Strategy>,
    /// matching.penalty (min_of_ties, mean_divided_by_count)
    #[arg(long, global = true, value_parser = parse_penalty, help_heading = "Config overrides")]
    penalty: Option<PenaltyMode>,
    /// grouping.tolerance
    #[arg(long, global = true, help_heading = "Config overrides")]
    tolerance: Option<f64>,
    /// sweep.alpha as LOW,STEP,HIGH
    #[arg(long, global = true, value_parser = parse_range, help_heading = "Config overrides")]
    sweep_alpha: Option<GridRange>,
    /// sweep.omega as LOW,STEP,HIGH
    #[arg(long, global = true, value_parser = parse_range, help_heading = "Config overrides")]
    sweep_omega: Option<GridRange>,
    /// sweep.gamma as LOW,STEP,HIGH
    #[arg(long, global = true, value_parser = parse_range, help_heading = "Config overrides")]
    sweep_gamma: Option<GridRange>,
    /// seed
    #[arg(long, global = true, help_heading = "Config overrides")]
    seed: Option<u64>,
    /// synth.plots
    #[arg(long, global = true, help_heading = "Config overrides")]
    plots: Option<usize>,
    /// synth.crowns_per_plot
    #[arg(long, global = true, help_heading = "Config overrides")]
    crowns_per_plot: Option<usize>,
    /// synth.annotators
    #[arg(long, global = true, help_heading = "Config overrides")]
    annotators: Option<usize>,
    /// synth.min_size_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    min_size: Option<f64>,
    /// synth.max_size_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    max_size: Option<f64>,
    /// synth.translation_m
    #[arg(long, global = true, help_heading = "Config overrides")]
    translation: Option<f64>,
    /// synth.scale
    #[arg(long, global = true, help_heading = "Config overrides")]
    scale: Option<f64>,
    /// synth.rotation_deg
    #[arg(long, global = true, help_heading = "Config overrides")]
    rotation: Option<f64>,
    /// synth.polygons
    #[arg(long, global = true, help_heading = "Config overrides")]
    polygons: Option<bool>,
    /// synth.retry_budget
    #[arg(long, global = true, help_heading = "Config overrides")]
    retry_budget: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Match delineations to targets and score every pair.
    Score {
        /// GeoJSON of desired targets.
        #[arg(long, value_name = "PATH")]
        targets: PathBuf,
        /// GeoJSON of delineations to score.
        #[arg(long, value_name = "PATH")]
        delineations: PathBuf,
        /// Score table; `.json` keeps the global score too, anything else is CSV.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Write the region sets of every target as GeoJSON.
    Regions {
        /// GeoJSON of desired targets.
        #[arg(long, value_name = "PATH")]
        targets: PathBuf,
        /// Finalize each set against its matched delineation.
        #[arg(long, value_name = "PATH")]
        delineations: Option<PathBuf>,
        /// GeoJSON with one feature per region and role.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Leave-one-annotator-out variance over an annotator ensemble.
    Crossval {
        /// Annotation files; crowns are grouped across all of them.
        #[arg(long = "annotations", value_name = "PATH", required = true, num_args = 1..)]
        annotations: Vec<PathBuf>,
        /// JSON report.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Cross-validation variance at every point of the sweep grid.
    Sweep {
        /// Annotation files; crowns are grouped across all of them.
        #[arg(long = "annotations", value_name = "PATH", required = true, num_args = 1..)]
        annotations: Vec<PathBuf>,
        /// CSV table, one row per grid point.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Generate a seeded synthetic annotator ensemble as GeoJSON.
    Synth {
        /// GeoJSON with every annotator's crowns.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Pair delineations with targets and print the result as JSON.
    Match {
        /// GeoJSON of desired targets.
        #[arg(long, value_name = "PATH")]
        targets: PathBuf,
        /// GeoJSON of delineations.
        #[arg(long, value_name = "PATH")]
        delineations: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown value {s:?}"))
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    parse_enum(s)
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    parse_enum(s)
}

fn parse_penalty(s: &str) -> Result<PenaltyMode, String> {
    parse_enum(s)
}

fn parse_range(s: &str) -> Result<GridRange, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [low, step, high] => GridRange::new(low, step, high).map_err(|e| e.to_string()),
        [v] => Ok(GridRange::single(v)),
        _ => Err("expected LOW,STEP,HIGH or a single value".into()),
    }
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) -> Result<(), Error> {
        let frame_flags = [
            self.x_min,
            self.y_min,
            self.x_max,
            self.y_max,
            self.resolution,
        ];
        if frame_flags.iter().any(Option::is_some) {
            let base = c.frame;
            let pick = |flag: Option<f64>, from: fn(&PlotFrame) -> f64, key: &str| {
                flag.or(base.as_ref().map(from)).ok_or_else(|| {
                    Error::Validation(format!("frame override needs frame.{key} as well"))
                })
            };
            c.frame = Some(PlotFrame::new(
                pick(self.x_min, PlotFrame::x_min, "x_min")?,
                pick(self.y_min, PlotFrame::y_min, "y_min")?,
                pick(self.x_max, PlotFrame::x_max, "x_max")?,
                pick(self.y_max, PlotFrame::y_max, "y_max")?,
                pick(self.resolution, PlotFrame::resolution, "resolution_m")?,
            )?);
        }
        let p = &mut c.params;
        set(&mut p.alpha_m, self.alpha);
        set(&mut p.omega_m, self.omega);
        set(&mut p.gamma, self.gamma);
        if self.delta.is_some() {
            p.delta_m = self.delta;
        }
        if self.ratio_tol.is_some() {
            p.ratio_tol = self.ratio_tol;
        }
        if self.metric.is_some() {
            c.metric = self.metric;
        }
        set(&mut c.matching.strategy, self.strategy);
        set(&mut c.matching.penalty, self.penalty);
        set(&mut c.grouping.tolerance, self.tolerance);
        set(&mut c.sweep.alpha, self.sweep_alpha);
        set(&mut c.sweep.omega, self.sweep_omega);
        set(&mut c.sweep.gamma, self.sweep_gamma);
        set(&mut c.seed, self.seed);
        let s = &mut c.synth;
        set(&mut s.plots, self.plots);
        set(&mut s.crowns_per_plot, self.crowns_per_plot);
        set(&mut s.annotators, self.annotators);
        set(&mut s.min_size_m, self.min_size);
        set(&mut s.max_size_m, self.max_size);
        set(&mut s.translation_m, self.translation);
        set(&mut s.scale, self.scale);
        set(&mut s.rotation_deg, self.rotation);
        set(&mut s.polygons, self.polygons);
        set(&mut s.retry_budget, self.retry_budget);
        c.validate()
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut config)?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Validation("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Score {
            targets,
            delineations,
            out,
        } => commands::score(&config, &targets, &delineations, &out),
        Command::Regions {
            targets,
            delineations,
            out,
        } => commands::regions(&config, &targets, delineations.as_deref(), &out),
        Command::Crossval { annotations, out } => commands::crossval(&config, &annotations, &out),
        Command::Sweep { annotations, out } => commands::sweep(&config, &annotations, &out),
        Command::Synth { out } => commands::synth(&config, &out),
        Command::Match {
            targets,
            delineations,
            out,
        } => commands::matching(&config, &targets, &delineations, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
