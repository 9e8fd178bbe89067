use std::process::exit;

fn main() {
    exit(condpanel::cli::run(std::env::args_os()));
}
