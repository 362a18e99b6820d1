use clap::Parser;

fn main() {
    let cli = wind_esn::Cli::parse();
    if let Err(e) = wind_esn::run(cli) {
        eprintln!("{}", e.report());
        std::process::exit(1);
    }
}
