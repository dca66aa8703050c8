use std::process::ExitCode;

use qhj_cli::{execute, parse_args, ParseError};

fn main() -> ExitCode {
    let cfg = match parse_args(std::env::args_os()) {
        Ok(cfg) => cfg,
        Err(ParseError::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(ParseError::Usage(e)) => {
            eprintln!("qhj: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(bundle) => {
            for check in bundle.report["checks"].as_array().into_iter().flatten() {
                let mark = if check["pass"] == true { "ok  " } else { "FAIL" };
                println!("{mark} {} = {} (tolerance {})", check["name"].as_str().unwrap_or(""), check["value"], check["tolerance"]);
            }
            if let Some(outcome) = bundle.report["result"].get("outcome") {
                println!("outcome: {}", outcome.as_str().unwrap_or(""));
            }
            println!("wrote {} files to {}", bundle.files.len() + 1, bundle.dir.display());
            if bundle.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("qhj: {} failed: {e}", cfg.scenario.name());
            ExitCode::from(1)
        }
    }
}
