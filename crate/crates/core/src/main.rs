use std::process::ExitCode;

use clap::Parser;
use online_dawid_skene::cli::{run, thread_count, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_count(cli.threads).and_then(|threads| {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| online_dawid_skene::Error::InvalidParameter(e.to_string()))?;
        }
        run(&cli, &mut std::io::stdout().lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ods: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
