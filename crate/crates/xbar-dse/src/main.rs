fn main() {
    let code = xbar_dse::cli::main_with(std::env::args().collect(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
