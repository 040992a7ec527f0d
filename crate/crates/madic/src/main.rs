use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = madic::cli::run(&args, &mut out);
    out.flush().ok();
    std::process::exit(code);
}
