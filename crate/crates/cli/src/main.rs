use std::io::Write;
use std::process;

use clap::Parser;
use ea_cli::commands;
use ea_cli::opts::Cli;

fn main() {
    // Clap reports usage problems itself with exit code 2, matching the
    // parameter-error convention used in commands::execute.
    let cli = Cli::parse();
    match commands::execute(cli) {
        Ok(emission) => {
            for line in &emission.stderr {
                eprintln!("diagnostic: {line}");
            }
            let written = match &emission.out {
                Some(path) => std::fs::write(path, &emission.bytes)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => std::io::stdout()
                    .write_all(&emission.bytes)
                    .map_err(|e| format!("cannot write output: {e}")),
            };
            if let Err(message) = written {
                eprintln!("error: {message}");
                process::exit(2);
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            process::exit(err.exit_code());
        }
    }
}
