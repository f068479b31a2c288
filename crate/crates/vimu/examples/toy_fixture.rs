//! Writes a labeled toy-humanoid fixture and a matching config.
//!
//! ```text
//! cargo run -p vimu --example toy_fixture -- fixture/
//! cargo run -p vimu -- --config fixture/config.toml --out run synth
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use vimu::fixture::{write_toy_fixture, FixtureSpec};

fn main() -> ExitCode {
    let dir = std::env::args_os().nth(1).map_or_else(|| PathBuf::from("fixture"), PathBuf::from);
    match write_toy_fixture(&dir, &FixtureSpec::default()) {
        Ok(cfg) => {
            println!("wrote {}", cfg.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
