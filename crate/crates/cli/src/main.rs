use clap::Parser;

fn main() {
    let cli = ckren_cli::Cli::parse();
    match ckren_cli::run(&cli, |k| std::env::var(k).ok()) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
