use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ppclab::experiment::{run, ExperimentConfig};
use ppclab::Error;

/// Pair correlations, additive energy and Bohr-set experiments.
///
/// Exit codes: 0 success, 2 configuration or parse error, 3 failed
/// precondition, 4 budget refusal. PPCLAB_THREADS caps worker threads.
#[derive(Parser)]
#[command(name = "ppclab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Sequence source: a file, a classic family, or a block construction.
#[derive(Args, Default)]
struct SeqArgs {
    /// Sequence file (one integer per line).
    #[arg(long)]
    seq: Option<PathBuf>,
    /// identity | power(d) | primes | lacunary(q)
    #[arg(long)]
    family: Option<String>,
    /// Number of terms of --family.
    #[arg(long)]
    count: Option<String>,
    /// Growth function for an in-memory block build, e.g. ilog(1).
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    jmax: Option<String>,
}

#[derive(Args, Default)]
struct Common {
    /// CSV output; a manifest is written to <csv>.manifest.json.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Refuse runs whose estimated pair count exceeds this.
    #[arg(long)]
    budget: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a block sequence and write it as a sequence file.
    BuildSeq {
        #[arg(long)]
        f: String,
        #[arg(long)]
        beta: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        jmax: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Additive energy of the first N elements.
    Energy {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        n: Option<String>,
        /// hashmap | fingerprint | merge
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Normalized energy at block checkpoints.
    Scaling {
        #[command(flatten)]
        seq: SeqArgs,
        /// a..b or a comma list
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Pair correlation R([-s, s], alpha, N).
    Pc {
        #[command(flatten)]
        seq: SeqArgs,
        /// p/q, a decimal, or fixed(k, L) for k/2^L
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        n: Option<String>,
        /// One value or a comma list.
        #[arg(long)]
        s: String,
        #[command(flatten)]
        common: Common,
    },
    /// Pair correlation at block checkpoints for a fixed alpha.
    Probe {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        levels: String,
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// j=<level> [rank=<index>] [scale=<t>]: perturbed regular-system point
        #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
        alpha_from_regular_system: Option<Vec<String>>,
        /// one_plus_log | pow(b)
        #[arg(long)]
        theta: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo pair correlation over random alpha.
    Mc {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        trials: String,
        /// Comma list of N.
        #[arg(long)]
        schedule: String,
        /// Comma list of s.
        #[arg(long)]
        s: String,
        #[arg(long)]
        seed: String,
        /// Report the fraction of trials with R > (1 + delta) 2s.
        #[arg(long)]
        delta: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// The Bohr set {x in [0, 1] : ||d x|| <= delta}.
    Bohr {
        #[arg(long)]
        d: String,
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        common: Common,
    },
    /// (sum of measures)^2 / sum of pairwise intersection measures.
    BcRatio {
        /// Interval-set files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Energy table for f = ilog(r) at every level up to jmax.
    Corollary {
        #[arg(long)]
        r: String,
        #[arg(long)]
        jmax: String,
        #[arg(long)]
        eps: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment described by a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

type Items = Vec<(&'static str, String, &'static str)>;

fn push(items: &mut Items, key: &'static str, flag: &'static str, value: Option<String>) {
    if let Some(v) = value {
        items.push((key, v, flag));
    }
}

fn path_str(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

fn seq_items(items: &mut Items, s: SeqArgs) {
    push(items, "seq.file", "--seq", path_str(s.seq));
    push(items, "seq.family", "--family", s.family);
    push(items, "seq.count", "--count", s.count);
    push(items, "seq.f", "--f", s.f);
    push(items, "seq.beta", "--beta", s.beta);
    push(items, "seq.gamma", "--gamma", s.gamma);
    push(items, "seq.jmax", "--jmax", s.jmax);
}

fn common_items(items: &mut Items, c: Common) {
    push(items, "out.csv", "--csv", path_str(c.csv));
    push(items, "budget", "--budget", c.budget);
}

fn config_for(command: Command) -> Result<ExperimentConfig, Error> {
    let mut items: Items = Vec::new();
    let name = match command {
        Command::Run { config } => return ExperimentConfig::read(config),
        Command::BuildSeq { f, beta, gamma, jmax, out, common } => {
            seq_items(
                &mut items,
                SeqArgs {
                    f: Some(f),
                    beta,
                    gamma,
                    jmax: Some(jmax),
                    ..SeqArgs::default()
                },
            );
            push(&mut items, "out.seq", "--out", path_str(out));
            common_items(&mut items, common);
            "build-seq"
        }
        Command::Energy { seq, n, method, common } => {
            seq_items(&mut items, seq);
            push(&mut items, "energy.n", "--n", n);
            push(&mut items, "energy.method", "--method", method);
            common_items(&mut items, common);
            "energy"
        }
        Command::Scaling { seq, levels, method, common } => {
            seq_items(&mut items, seq);
            push(&mut items, "scaling.levels", "--levels", levels);
            push(&mut items, "energy.method", "--method", method);
            common_items(&mut items, common);
            "scaling"
        }
        Command::Pc { seq, alpha, n, s, common } => {
            seq_items(&mut items, seq);
            push(&mut items, "pc.alpha", "--alpha", Some(alpha));
            push(&mut items, "pc.n", "--n", n);
            push(&mut items, "pc.s", "--s", Some(s));
            common_items(&mut items, common);
            "pc"
        }
        Command::Probe { seq, levels, s, alpha, alpha_from_regular_system, theta, common } => {
            seq_items(&mut items, seq);
            push(&mut items, "pc.levels", "--levels", Some(levels));
            push(&mut items, "pc.s", "--s", s);
            push(&mut items, "pc.alpha", "--alpha", alpha);
            push(&mut items, "theta", "--theta", theta);
            for kv in alpha_from_regular_system.unwrap_or_default() {
                let flag = "--alpha-from-regular-system";
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
                    at: flag.into(),
                    msg: format!("expected KEY=VALUE, got `{kv}`"),
                })?;
                let key = match k.trim() {
                    "j" => "pc.regular_j",
                    "rank" => "pc.rank",
                    "scale" => "pc.scale",
                    other => {
                        return Err(Error::Config {
                            at: flag.into(),
                            msg: format!("unknown key `{other}` (expected j, rank or scale)"),
                        })
                    }
                };
                items.push((key, v.to_string(), flag));
            }
            common_items(&mut items, common);
            "probe"
        }
        Command::Mc { seq, trials, schedule, s, seed, delta, common } => {
            seq_items(&mut items, seq);
            push(&mut items, "mc.trials", "--trials", Some(trials));
            push(&mut items, "mc.schedule", "--schedule", Some(schedule));
            push(&mut items, "mc.s", "--s", Some(s));
            push(&mut items, "seed", "--seed", Some(seed));
            push(&mut items, "mc.delta", "--delta", delta);
            common_items(&mut items, common);
            "mc"
        }
        Command::Bohr { d, delta, common } => {
            push(&mut items, "bohr.d", "--d", Some(d));
            push(&mut items, "bohr.delta", "--delta", Some(delta));
            common_items(&mut items, common);
            "bohr"
        }
        Command::BcRatio { files, common } => {
            let list: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
            if let Some(bad) = list.iter().find(|p| p.contains(',')) {
                return Err(Error::Config {
                    at: "FILES".into(),
                    msg: format!("file names may not contain commas: `{bad}`"),
                });
            }
            push(&mut items, "bc.files", "FILES", Some(list.join(",")));
            common_items(&mut items, common);
            "bc-ratio"
        }
        Command::Corollary { r, jmax, eps, common } => {
            push(&mut items, "corollary.r", "--r", Some(r));
            push(&mut items, "seq.jmax", "--jmax", Some(jmax));
            push(&mut items, "corollary.eps", "--eps", eps);
            common_items(&mut items, common);
            "corollary"
        }
    };
    items.push(("experiment", name.to_string(), "<subcommand>"));
    ExperimentConfig::from_flags(items)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PPCLAB_THREADS") else {
        return Ok(());
    };
    let bad = || Error::Config {
        at: "PPCLAB_THREADS".into(),
        msg: format!("expected a positive integer, got `{v}`"),
    };
    let n: usize = v.trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config {
            at: "PPCLAB_THREADS".into(),
            msg: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let cfg = config_for(cli.command)?;
        run(&cfg)
    });
    match result {
        Ok((outcome, manifest)) => {
            print!("{}", outcome.summary);
            if let Some(m) = manifest {
                for o in &m.outputs {
                    eprintln!("wrote {}", o.path);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
