//! Command-line front end: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 data error, 2 configuration or usage error,
//! 3 numerical failure (only with `rates --strict`).

use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::aggregate::{
    effective_rates, thermal_rates, thermal_rates_with_weights, Completeness, ExpectedFinals,
    MissingFinalPolicy, MissingInitialPolicy, ThermalOptions,
};
use crate::compare::{
    agreement_report, common_temperatures, dalitz_points, match_tables, scaling_ratios,
    AgreementOptions, KeyedTable, StateMapping, TargetIndexed,
};
use crate::dataio::{
    self, agreement_csv, dalitz_csv, detect_format, load_config, load_effective, load_levels,
    load_mapping, load_rates, load_thermal, load_weights, load_xsec, pairs_csv, save_effective,
    save_populations, save_rates, save_thermal, scaling_csv, write_file, write_smoothness,
    PipelineConfig,
};
use crate::error::{Error, Result};
use crate::ratecalc::rate_table;
use crate::states::{population_table, PopulationMode, Symmetry};
use crate::xsec::MissingReversePolicy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rotrates", version, about = "Rotational collision rate coefficients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// State-to-state rate coefficients from cross sections.
    Rates(RatesArgs),
    /// Sum state-to-state rates over final projectile states.
    Effective(EffectiveArgs),
    /// Average effective rates over initial projectile states.
    Thermal(ThermalArgs),
    /// Boltzmann populations of a level list.
    Populations(PopulationsArgs),
    /// Compare two or three rate tables.
    Compare(CompareArgs),
    /// Effective rates relative to a reference projectile state.
    Scaling(ScalingArgs),
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Cross-section file.
    #[arg(long)]
    pub xsec: PathBuf,
    /// Target level file.
    #[arg(long)]
    pub levels_target: PathBuf,
    /// Projectile level file.
    #[arg(long)]
    pub levels_projectile: PathBuf,
    /// Pipeline configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Temperatures in K, comma-separated; overrides the configuration.
    #[arg(long)]
    pub temps: Option<String>,
    /// Output rate file.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write a per-pair smoothness report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with status 3 if any pair fails numerically.
    #[arg(long)]
    pub strict: bool,
    /// one-sided | require-both; overrides the configuration.
    #[arg(long)]
    pub reverse_policy: Option<MissingReversePolicy>,
}

#[derive(Debug, Args)]
pub struct EffectiveArgs {
    /// State-to-state rate file.
    #[arg(long)]
    pub rates: PathBuf,
    /// Output effective-rate file.
    #[arg(long)]
    pub out: PathBuf,
    /// Projectile levels defining the complete set of final states.
    /// Without it, the final states seen in the input are expected.
    #[arg(long)]
    pub levels_projectile: Option<PathBuf>,
    /// flag | strict
    #[arg(long, default_value_t = MissingFinalPolicy::Flag)]
    pub policy: MissingFinalPolicy,
}

#[derive(Debug, Args)]
pub struct ThermalArgs {
    /// Effective-rate file.
    #[arg(long)]
    pub effective: PathBuf,
    /// Projectile level file.
    #[arg(long)]
    pub levels_projectile: PathBuf,
    /// para | ortho
    #[arg(long)]
    pub symmetry: Symmetry,
    /// error | renormalize | substitute-highest | zero; overrides the configuration.
    #[arg(long)]
    pub policy: Option<MissingInitialPolicy>,
    /// Output thermal-rate file.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Custom projectile weights used instead of Boltzmann weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PopulationsArgs {
    /// Level file.
    #[arg(long)]
    pub levels: PathBuf,
    /// Temperatures in K, comma-separated.
    #[arg(long)]
    pub temps: String,
    /// per-symmetry | combined
    #[arg(long, default_value_t = PopulationMode::PerSymmetry)]
    pub mode: PopulationMode,
    /// Output population file.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline configuration file (physical constants).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Two or three tables of one kind, comma-separated; the second is the reference.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub tables: Vec<PathBuf>,
    /// Target-state mapping file.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Agreement factor.
    #[arg(long, default_value_t = 2.0)]
    pub factor: f64,
    /// Minimum reference rate in cm3/s counted by the agreement statistic, or `none`.
    #[arg(long, default_value = "1e-11")]
    pub threshold: String,
    /// Prefix for the CSV outputs.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Debug, Args)]
pub struct ScalingArgs {
    /// Effective-rate file.
    #[arg(long)]
    pub effective: PathBuf,
    /// Reference projectile j (0 for para, 1 for ortho).
    #[arg(long)]
    pub reference_j2: u32,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Projectile levels mapping state index to j; without it the index is j.
    #[arg(long)]
    pub levels_projectile: Option<PathBuf>,
}

/// Result of one subcommand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl CommandOutcome {
    fn fail(&mut self, code: i32, message: impl Into<String>) {
        self.exit_code = self.exit_code.max(code);
        self.errors.push(message.into());
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

pub fn run(cli: Cli) -> CommandOutcome {
    let mut outcome = CommandOutcome::default();
    let result = match cli.command {
        Command::Rates(a) => rates(&a, &mut outcome),
        Command::Effective(a) => effective(&a, &mut outcome),
        Command::Thermal(a) => thermal(&a, &mut outcome),
        Command::Populations(a) => populations(&a, &mut outcome),
        Command::Compare(a) => compare(&a, &mut outcome),
        Command::Scaling(a) => scaling(&a, &mut outcome),
    };
    if let Err(e) = result {
        outcome.fail(exit_code(&e), e.to_string());
    }
    outcome
}

fn config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_config(p).map_err(|e| match e {
            e @ Error::Io { .. } => e,
            e => Error::Config(e.to_string()),
        }),
        None => Ok(PipelineConfig::default()),
    }
}

fn temps_arg(s: &str) -> Result<Vec<f64>> {
    let temps: Vec<f64> = dataio::config::parse_list(s)
        .ok_or_else(|| Error::Config(format!("invalid temperature list {s:?}")))?;
    dataio::config::validate_temperatures(&temps)?;
    Ok(temps)
}

fn rates(a: &RatesArgs, out: &mut CommandOutcome) -> Result<()> {
    let mut cfg = config(a.config.as_deref())?;
    if let Some(t) = &a.temps {
        cfg.temperatures = temps_arg(t)?;
    }
    if let Some(p) = a.reverse_policy {
        cfg.reverse_policy = p;
    }
    let target = load_levels(&a.levels_target)?;
    let projectile = load_levels(&a.levels_projectile)?;
    let table = load_xsec(&a.xsec, &target, &projectile)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    log::info!(
        "{} cross-section rows on {} energies, {} threads",
        table.len(),
        table.grid().len(),
        pool.current_num_threads()
    );
    let run = pool.install(|| rate_table(&table, &cfg.temperatures, &cfg))?;

    let (numerical, data): (Vec<_>, Vec<_>) =
        run.failures.iter().partition(|f| f.error.is_numerical());
    for f in &data {
        out.fail(EXIT_DATA, format!("{}: {}", f.pair, f.error));
    }
    if !data.is_empty() {
        return Ok(());
    }
    for f in &numerical {
        let msg = format!("{}: {}", f.pair, f.error);
        if a.strict {
            out.fail(EXIT_NUMERICAL, msg);
        } else {
            out.warnings.push(msg);
        }
    }
    save_rates(&a.out, &run.table)?;
    log::info!("wrote {}", a.out.display());
    if let Some(path) = &a.report {
        write_file(path, &write_smoothness(&run.reports))?;
    }
    out.summary.push(format!(
        "{} transitions, {} pairs, {} temperatures, {} failed pairs",
        run.table.len(),
        run.reports.len(),
        cfg.temperatures.len(),
        run.failures.len()
    ));
    Ok(())
}

fn effective(a: &EffectiveArgs, out: &mut CommandOutcome) -> Result<()> {
    let rates = load_rates(&a.rates)?;
    let levels = a.levels_projectile.as_deref().map(load_levels).transpose()?;
    let expected = match &levels {
        Some(l) => ExpectedFinals::Levels(l),
        None => ExpectedFinals::Observed,
    };
    let eff = effective_rates(&rates, expected, a.policy)?;
    let mut partial = 0;
    for (key, entry) in eff.entries() {
        if let Completeness::Partial(missing) = &entry.completeness {
            partial += 1;
            out.warnings
                .push(format!("{key}: partial sum, missing final states {missing:?}"));
        }
    }
    save_effective(&a.out, &eff)?;
    out.summary
        .push(format!("{} effective rates, {partial} partial", eff.len()));
    Ok(())
}

fn thermal(a: &ThermalArgs, out: &mut CommandOutcome) -> Result<()> {
    let cfg = config(a.config.as_deref())?;
    let eff = load_effective(&a.effective)?;
    let levels = load_levels(&a.levels_projectile)?;
    let opts = ThermalOptions {
        policy: a.policy.unwrap_or(cfg.initial_policy),
        weight_floor: cfg.weight_floor,
        included_j2: cfg.included_j2.clone(),
    };
    let table = match &a.weights {
        Some(path) => {
            thermal_rates_with_weights(&eff, &load_weights(path)?, &levels, a.symmetry, &opts)?
        }
        None => thermal_rates(&eff, &levels, a.symmetry, &opts, &cfg.constants)?,
    };
    save_thermal(&a.out, &table)?;
    out.summary
        .push(format!("{} {} thermal rates", table.len(), a.symmetry));
    Ok(())
}

fn populations(a: &PopulationsArgs, out: &mut CommandOutcome) -> Result<()> {
    let cfg = config(a.config.as_deref())?;
    let temps = temps_arg(&a.temps)?;
    let levels = load_levels(&a.levels)?;
    let table = population_table(&levels, &temps, a.mode, &cfg.constants)?;
    save_populations(&a.out, &table)?;
    out.summary.push(format!(
        "{} levels at {} temperatures ({})",
        table.rows.len(),
        temps.len(),
        a.mode
    ));
    Ok(())
}

fn compare(a: &CompareArgs, out: &mut CommandOutcome) -> Result<()> {
    if !(2..=3).contains(&a.tables.len()) {
        return Err(Error::Config(format!(
            "--tables needs 2 or 3 files, got {}",
            a.tables.len()
        )));
    }
    let threshold = match a.threshold.as_str() {
        "none" => None,
        s => Some(
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid threshold {s:?}")))?,
        ),
    };
    let opts = AgreementOptions {
        factor: a.factor,
        threshold,
        ..Default::default()
    };
    let mapping = match &a.map {
        Some(p) => load_mapping(p)?,
        None => StateMapping::default(),
    };
    let texts = a
        .tables
        .iter()
        .map(|p| dataio::read_file(p))
        .collect::<Result<Vec<_>>>()?;
    let kind = detect_format(&texts[0]).unwrap_or_default().to_string();
    for (text, path) in texts.iter().zip(&a.tables) {
        if detect_format(text) != Some(kind.as_str()) {
            return Err(Error::Format {
                path: path.clone(),
                expected: kind.clone(),
                found: text.lines().next().unwrap_or_default().to_string(),
            });
        }
    }
    match kind.as_str() {
        "rates" => {
            let tables = load_all(&a.tables, |p| load_rates(p).map(|t| KeyedTable::from(&t)))?;
            compare_tables(tables, &mapping, &opts, &a.out_prefix, out)
        }
        "effective" => {
            let tables =
                load_all(&a.tables, |p| load_effective(p).map(|t| KeyedTable::from(&t)))?;
            compare_tables(tables, &mapping, &opts, &a.out_prefix, out)
        }
        "thermal" => {
            let tables = load_all(&a.tables, |p| load_thermal(p).map(|t| KeyedTable::from(&t)))?;
            compare_tables(tables, &mapping, &opts, &a.out_prefix, out)
        }
        _ => Err(Error::Format {
            path: a.tables[0].clone(),
            expected: "rates, effective or thermal".into(),
            found: texts[0].lines().next().unwrap_or_default().to_string(),
        }),
    }
}

fn load_all<K>(
    paths: &[PathBuf],
    load: impl Fn(&Path) -> Result<KeyedTable<K>>,
) -> Result<Vec<KeyedTable<K>>> {
    paths.iter().map(|p| load(p)).collect()
}

fn compare_tables<K: Ord + Clone + Display + TargetIndexed>(
    tables: Vec<KeyedTable<K>>,
    mapping: &StateMapping,
    opts: &AgreementOptions,
    prefix: &str,
    out: &mut CommandOutcome,
) -> Result<()> {
    let mut mapped = Vec::with_capacity(tables.len());
    for (i, t) in tables.iter().enumerate() {
        let (m, dropped) = mapping.apply(i, t);
        if dropped > 0 {
            out.warnings
                .push(format!("table {i}: {dropped} rows without a mapping dropped"));
        }
        mapped.push(m);
    }
    let refs: Vec<&KeyedTable<K>> = mapped.iter().collect();
    let matched = match_tables(&refs)?;
    if matched.is_empty() {
        out.warnings.push("tables have no transitions in common".into());
    }
    let temps = common_temperatures(&refs);
    if temps.is_empty() {
        out.warnings.push("tables share no temperatures".into());
    }
    out.summary
        .push(format!("{} matched keys, {} shared temperatures", matched.len(), temps.len()));

    let (a, b) = (&mapped[0], &mapped[1]);
    let report = agreement_report(a, b, opts)?;
    for e in &report {
        out.summary.push(format!(
            "T = {} K: {}/{} within factor {}",
            e.t, e.within, e.total, e.factor
        ));
    }
    write_file(Path::new(&format!("{prefix}agreement.csv")), &agreement_csv(&report)?)?;

    let ti = |t: &KeyedTable<K>, x: f64| t.temp_index(x).expect("shared temperature");
    let pairs: Vec<(f64, Vec<(K, f64, f64)>)> = temps
        .iter()
        .map(|&t| {
            let (ia, ib) = (ti(a, t), ti(b, t));
            let rows = matched
                .iter()
                .map(|k| (k.clone(), a.rows[k][ia], b.rows[k][ib]))
                .collect();
            (t, rows)
        })
        .collect();
    write_file(Path::new(&format!("{prefix}pairs.csv")), &pairs_csv(&pairs)?)?;

    if let [a, b, c] = refs.as_slice() {
        let points = temps
            .iter()
            .map(|&t| Ok((t, dalitz_points(a, b, c, t)?)))
            .collect::<Result<Vec<_>>>()?;
        write_file(Path::new(&format!("{prefix}dalitz.csv")), &dalitz_csv(&points)?)?;
    }
    Ok(())
}

fn scaling(a: &ScalingArgs, out: &mut CommandOutcome) -> Result<()> {
    let eff = load_effective(&a.effective)?;
    let levels = a.levels_projectile.as_deref().map(load_levels).transpose()?;
    let result = scaling_ratios(&eff, levels.as_ref(), a.reference_j2)?;
    for ((n1, n1p), reason) in &result.skipped {
        out.warnings.push(format!("{n1}->{n1p}: {reason}"));
    }
    write_file(&a.out, &scaling_csv(&result.rows)?)?;
    out.summary.push(format!(
        "{} ratios, {} transitions skipped",
        result.rows.len(),
        result.skipped.len()
    ));
    Ok(())
}
