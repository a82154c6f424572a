use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CPD_LOG", "warn")).init();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let status = cp_dilatation::cli::run(std::env::args_os(), &mut out);
    let _ = out.flush();
    ExitCode::from(status.clamp(0, 255) as u8)
}
