use std::process::ExitCode;

fn main() -> ExitCode {
    match rbvar::cli::main_with_args(std::env::args_os(), &mut std::io::stdout()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
