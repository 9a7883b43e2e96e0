//! Print the built-in default run configuration as JSON, ready to be edited
//! and passed back via `--config`.

use freqbin_core::RunConfig;

fn main() {
    let config = RunConfig::default();
    println!("{}", serde_json::to_string_pretty(&config).unwrap());
}
