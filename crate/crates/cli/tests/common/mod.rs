#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

pub const SUBCOMMANDS: [&str; 9] = [
    "fields-check",
    "conditions",
    "lyapunov",
    "moment-lyapunov",
    "two-point",
    "correlation",
    "mixing",
    "spde",
    "sweep",
];

const KRAICHNAN: &str = r#"
[field]
kind = "kraichnan"
d = 2
alpha = 4.0
zmax = 4
"#;

/// A fast config exercising `cmd`.
pub fn small_config(cmd: &str) -> String {
    let body = match cmd {
        "lyapunov" => "[field]\nkind = \"br\"\n[dynamics]\ndt = 0.05\nt_end = 50.0\n[ensemble]\nrealizations = 8\n".to_string(),
        "moment-lyapunov" => format!("{KRAICHNAN}[dynamics]\ndt = 0.02\nt_end = 2.0\n[ensemble]\nparticles = 1000\n"),
        "two-point" => format!(
            "{KRAICHNAN}[dynamics]\ndt = 0.02\nt_end = 2.0\n[ensemble]\nrealizations = 32\n[diagnostics]\np_grid = [0.25, 0.5]\nx = [1.0, 2.0]\ny = [1.01, 2.0]\nfit_window = [0.5, 2.0]\n"
        ),
        "correlation" => format!(
            "{KRAICHNAN}[dynamics]\ndt = 0.02\nt_end = 2.0\n[ensemble]\nrealizations = 32\n[diagnostics]\nx = [0.0, 0.0]\ny = [1.0, 0.5]\n"
        ),
        "mixing" => format!(
            "{KRAICHNAN}[dynamics]\nkappa = 0.01\ndt = 0.05\nt_end = 1.0\n[ensemble]\nrealizations = 2\ninner_samples = 2\n[diagnostics]\nquadrature = 16\nz_cut = 3\ns_values = [0.5, 1.0]\n"
        ),
        "spde" => format!("{KRAICHNAN}[dynamics]\nkappa = 0.05\ndt = 0.01\nt_end = 0.5\n[diagnostics]\ngrid = 32\n"),
        "sweep" => format!(
            "{KRAICHNAN}[dynamics]\nkappa = 0.01\ndt = 0.01\nt_end = 0.5\nspde_scheme = \"exponential\"\n[ensemble]\nrealizations = 3\n[diagnostics]\ngrid = 32\namplitudes = [0.0, 1.0, 2.0]\n"
        ),
        "conditions" => "[field]\nkind = \"br\"\n[dynamics]\ndt = 0.01\nt_end = 1.0\n[diagnostics]\nsamples = 40\n".to_string(),
        _ => format!("{KRAICHNAN}[dynamics]\ndt = 0.01\nt_end = 1.0\n[diagnostics]\nsamples = 40\n"),
    };
    format!("seed = 2024\n{body}")
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub csvs: BTreeMap<String, Vec<u8>>,
    pub files: BTreeMap<String, String>,
}

pub fn run_cli(cmd: &str, config: &str, workers: usize) -> CliRun {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    run_cli_at(cmd, &cfg, &dir.path().join("out"), Some(workers))
}

pub fn run_cli_at(cmd: &str, cfg: &Path, out: &Path, workers: Option<usize>) -> CliRun {
    let mut c = Command::new(env!("CARGO_BIN_EXE_transportlab"));
    c.arg(cmd).arg("--config").arg(cfg).arg("--out").arg(out);
    if let Some(w) = workers {
        c.arg("--workers").arg(w.to_string());
    }
    let o = c.output().unwrap();
    let mut csvs = BTreeMap::new();
    let mut files = BTreeMap::new();
    if let Ok(entries) = std::fs::read_dir(out) {
        for e in entries {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            let bytes = std::fs::read(&p).unwrap();
            if name.ends_with(".csv") {
                csvs.insert(name.clone(), bytes.clone());
            }
            files.insert(name, String::from_utf8(bytes).unwrap());
        }
    }
    CliRun {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        csvs,
        files,
    }
}
