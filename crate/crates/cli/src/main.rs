use clap::Parser;
use lendfair_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(artifacts) => {
            for path in artifacts {
                println!("wrote {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
