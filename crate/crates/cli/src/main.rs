use std::process::ExitCode;

use clap::Parser;
use liplab_cli::{exit_code_for, run, Cli, RunConfig, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_PASS};

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LIPLAB_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("LIPLAB_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("LIPLAB_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = (|| -> anyhow::Result<i32> {
        init_threads()?;
        let (cfg, save) = RunConfig::from_cli(cli)?;
        if let Some(path) = save {
            liplab::construct::write_atomic(&path, &cfg.to_json())?;
        }
        let outcome = match run(&cfg) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("error: {e:#}");
                return Ok(exit_code_for(&e));
            }
        };
        if let Some(text) = &outcome.stdout {
            print!("{text}");
        }
        let failures = outcome.failures();
        for f in &failures {
            eprintln!("certificate failed: {f}");
        }
        Ok(if failures.is_empty() { EXIT_PASS } else { EXIT_CERTIFICATE })
    })();
    match code {
        Ok(c) => ExitCode::from(c as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
