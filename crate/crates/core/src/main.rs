use std::io;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let code = faasforge::cli::run_cli(&argv, &mut io::stdout(), &mut io::stderr(), &mut io::stdin().lock());
    std::process::exit(code);
}
