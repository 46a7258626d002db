//! Prints the default scenario in file units (mm, degrees, N, s), or loads
//! and validates a given scenario file.
//!
//! `cargo run --release --example scenario_file -- [path.toml]`

use snapfit::scenario::Scenario;

fn main() {
    match std::env::args().nth(1) {
        None => print!("{}", Scenario::default_scenario().to_toml()),
        Some(path) => match Scenario::load(path.as_ref()) {
            Ok(s) => println!("ok: {} (sha256 {})", path, s.hash),
            Err(e) => {
                eprintln!("{e}");
                std::process::exit(2);
            }
        },
    }
}
