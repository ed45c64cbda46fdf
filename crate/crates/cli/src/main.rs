use clap::Parser;

fn main() {
    let cli = bai_cli::args::Cli::parse();
    let code = bai_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
