//! Runs a classification sweep from an inline TOML config and prints the
//! resulting table; the same config drives `semilinear-heat sweep`.

use semilinear_heat::config::ExperimentConfig;
use semilinear_heat::experiment::run;
use semilinear_heat::{Error, Result};

const CONFIG: &str = r#"
[experiment]
kind = "sweep"
id = "power-sweep-2d"

[grid]
dim = 2

[nonlinearity]
builtin = "power"
params = [1.5]

[sweep]
kind = "classify"
param = 0
values = [1.5, 1.8, 1.95, 2.0, 2.05, 2.5]
"#;

fn main() -> Result<()> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    config.validate()?;
    let out = std::env::temp_dir().join("semilinear-heat-sweep");
    let report = run(&config, &out, 0)?;
    let table = out.join("sweep.csv");
    let csv = std::fs::read_to_string(&table).map_err(|source| Error::Io { path: table, source })?;
    print!("{csv}");
    println!("artifacts in {}; passed: {}", out.display(), report.passed);
    Ok(())
}
