use std::panic;
use std::process::ExitCode;

use demandkit::cli::{run, EXIT_ERROR};

fn main() -> ExitCode {
    // exact arithmetic panics on 128-bit overflow; report it as an ordinary error
    panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| info.payload().downcast_ref::<&str>().copied())
            .unwrap_or("internal error");
        eprintln!("error: {msg}");
    }));
    let code = panic::catch_unwind(|| run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr()))
        .unwrap_or(EXIT_ERROR);
    ExitCode::from(code as u8)
}
