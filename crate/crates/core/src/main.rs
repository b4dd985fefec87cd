use std::io;

fn main() {
    let code = tamatrack::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
