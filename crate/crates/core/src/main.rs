use std::process::ExitCode;

use clap::Parser;
use shrinkflow::cli::{self, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match cli::execute(&parsed) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            for n in &outcome.notes {
                eprintln!("warning: {n}");
            }
            if outcome.counterexample {
                eprintln!("counterexample found");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
