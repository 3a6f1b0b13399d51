use clap::Parser;
use panotrack::cli::{self, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own usage code (2) would collide with the I/O exit code
            std::process::exit(if e.use_stderr() { cli::EXIT_CONFIG } else { cli::EXIT_OK });
        }
    };
    std::process::exit(cli::run(cli));
}
