use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let code = simulmt_cli::run(std::env::args_os(), &mut stdin, &mut stdout, &mut stderr);
    ExitCode::from(code)
}
