use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Arg, ArgAction, ArgMatches, Command};

use batchscale::cli::{self, RunConfig, KEYS};
use batchscale::kvfile::KvFile;

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("train", "train the configured MLP to the step budget"),
    ("estimate-gns", "estimate the gradient noise scale and recommend a batch size"),
    ("sweep", "train once per batch size until the target validation loss"),
    ("verify-quadratic", "compare the estimators against a quadratic with known noise scale"),
    ("group-transforms", "group augmentation tuples by Fréchet distance"),
];

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn command() -> Command {
    let mut cmd = Command::new("batchscale")
        .about("Gradient noise scale estimation, batch-size advice and augmentation grouping")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let mut sub = Command::new(*name).about(*about).arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("run-config file of `key = value` lines"),
        );
        sub = sub.arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override any config key"),
        );
        for (key, help) in KEYS {
            let long = flag_name(key);
            let mut arg = Arg::new(*key)
                .long(long.clone())
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help(*help);
            if long != *key {
                arg = arg.alias(*key);
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn build_config(m: &ArgMatches) -> anyhow::Result<RunConfig> {
    let mut kv = match m.get_one::<PathBuf>("config") {
        Some(path) => KvFile::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => KvFile::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            kv.set(key, v.clone());
        }
    }
    for pair in m.get_many::<String>("set").into_iter().flatten() {
        let Some((k, v)) = pair.split_once('=') else {
            bail!("--set expects KEY=VALUE, got `{pair}`");
        };
        kv.set(k.trim(), v.trim());
    }
    Ok(RunConfig::from_kv(&kv)?.with_env())
}

fn run(name: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    match name {
        "train" => {
            let s = cli::cmd_train(cfg)?;
            println!("steps           {}", s.steps);
            println!("epochs          {}", s.epochs);
            println!("initial loss    {:.6}", s.initial_loss);
            println!("train loss      {:.6}", s.final_train_loss);
            println!("train accuracy  {:.4}", s.train_acc);
            if let (Some(l), Some(a)) = (s.val_loss, s.val_acc) {
                println!("val loss        {l:.6}");
                println!("val accuracy    {a:.4}");
            }
        }
        "estimate-gns" => {
            let r = cli::cmd_estimate_gns(cfg)?;
            println!("b_noise_hat     {:.6}", r.report.b_noise_hat);
            if let Some(o) = r.oracle {
                println!("b_simple (true) {:.6}", o.b_simple);
                println!("b_noise (true)  {:.6}", o.b_noise);
                println!("relative error  {:.4}", o.relative_error);
            }
            println!("steps used      {}", r.report.steps_used);
            println!("recommendation  {} ({})", r.report.recommendation, r.report.policy);
            if r.tradeoff_degenerate {
                println!("note: noise scale is not positive; tradeoff curve is flat");
            }
        }
        "sweep" => {
            let r = cli::cmd_sweep(cfg)?;
            println!("{}", r.note);
            println!("{:>7} {:>12} {:>9} {:>8} {:>10}", "batch", "lr", "converged", "steps", "vs base");
            for row in &r.rows {
                let steps = row.steps.map_or("-".to_string(), |s| s.to_string());
                let rel = row.steps_vs_baseline.map_or("-".to_string(), |v| format!("{v:.3}"));
                println!(
                    "{:>7} {:>12.6} {:>9} {:>8} {:>10}",
                    row.batch, row.learning_rate, row.converged, steps, rel
                );
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        "verify-quadratic" => {
            let r = cli::cmd_verify_quadratic(cfg)?;
            print!("{}", cli::format_table(&r));
            println!("{}", if r.all_passed { "all checks passed" } else { "some checks failed" });
        }
        "group-transforms" => {
            let r = cli::cmd_group_transforms(cfg)?;
            print!("{}", cli::format_groups(&r));
            if r.fewer_groups {
                println!("note: ties left fewer groups than requested");
            }
        }
        other => bail!("unknown subcommand `{other}`"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = build_config(sub).and_then(|cfg| run(name, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
