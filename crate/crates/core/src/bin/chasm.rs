use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chasm::harness::{check_heavy, convergence_table, run_experiment, write_table, RunConfig, SweepParam};
use chasm::Error;

#[derive(Parser)]
#[command(name = "chasm", version, about = "Semi-Lagrangian Wigner solver experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its error series.
    Run(Common),
    /// Repeat an experiment over parameter values and print a convergence table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        vary: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    closure: Option<String>,
    #[arg(long)]
    nnb: Option<usize>,
    #[arg(long)]
    patches: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    allow_heavy: bool,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> chasm::Result<RunConfig> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|source| Error::Io { path: self.config.clone(), source })?;
        let mut map = chasm::harness::parse_key_values(&text)?;
        let mut extra = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            extra.insert(k.to_string(), v);
        };
        if let Some(v) = &self.scheme {
            put("scheme", v.clone());
        }
        if let Some(v) = &self.closure {
            put("closure", v.clone());
        }
        if let Some(v) = self.nnb {
            put("nnb", v.to_string());
        }
        if let Some(v) = self.patches {
            put("patches", v.to_string());
        }
        if let Some(v) = self.workers {
            put("workers", v.to_string());
        }
        if let Some(v) = &self.out {
            put("out", v.display().to_string());
        }
        if self.allow_heavy {
            put("allow_heavy", "true".into());
        }
        for kv in &self.set {
            let text = kv.replacen('=', " = ", 1);
            extra.extend(chasm::harness::parse_key_values(&text)?);
        }
        if extra.contains_key("nx") {
            map.remove("dx");
        }
        if extra.contains_key("dx") {
            map.remove("nx");
        }
        map.extend(extra);
        RunConfig::from_map(&map)
    }
}

fn run(cli: Cli) -> chasm::Result<()> {
    match cli.cmd {
        Cmd::Run(common) => {
            let cfg = common.load()?;
            let est = check_heavy(&cfg)?;
            if est.is_heavy() {
                eprintln!("heavy run: {est}");
            }
            let series = run_experiment(&cfg)?;
            let last = series.len() - 1;
            println!(
                "t = {}  eps_inf = {:.6e}  eps_2 = {:.6e}  eps_mass = {:.6e}  min_marginal = {:.6e}",
                series.times[last],
                series.eps_inf[last],
                series.eps2[last],
                series.eps_mass[last],
                series.min_marginal[last]
            );
        }
        Cmd::Sweep { common, vary, values } => {
            let mut base = common.load()?;
            let out = base.out.take();
            let rows = convergence_table(&base, vary, &values)?;
            write_table(&rows, vary, std::io::stdout()).map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
            if let Some(path) = out {
                let file = std::fs::File::create(&path).map_err(|source| Error::Io { path: path.clone(), source })?;
                write_table(&rows, vary, file).map_err(|source| Error::Io { path, source })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Unstable { .. }) => {
            eprintln!("aborted: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
