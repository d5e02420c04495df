use clap::Parser;
use crack_lattice::cli::{init_threads, run, Cli};

fn main() {
    // usage errors share exit code 1 with invalid configurations
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let code = if e.use_stderr() { 1 } else { 0 };
        let _ = e.print();
        std::process::exit(code);
    });
    init_threads();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
