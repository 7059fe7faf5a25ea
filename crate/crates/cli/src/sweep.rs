//! Scenario sweeps: a manifest lists one run per line,
//!
//! ```text
//! # scenario  config            out_dir        [seed]
//! simulate    runs/base.cfg     out/base
//! simulate    runs/base.cfg     out/seed7      7
//! ```
//!
//! Relative paths resolve against the manifest's directory. Each run is a
//! separate `ekp` process with its own output directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::{Invocation, EXIT_INVALID};

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<Invocation>, String> {
    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut runs = Vec::new();
    let mut outs = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("manifest line {}: expected `scenario config out_dir [seed]`", i + 1));
        }
        let seed = match parts.get(3) {
            Some(s) => Some(s.parse::<u64>().map_err(|e| format!("manifest line {}: seed `{s}`: {e}", i + 1))?),
            None => None,
        };
        let out = resolve(parts[2]);
        if !outs.insert(out.clone()) {
            return Err(format!("manifest line {}: output directory {} is used twice", i + 1, out.display()));
        }
        runs.push(Invocation {
            scenario: parts[0].to_string(),
            config: resolve(parts[1]),
            out: Some(out),
            seed,
        });
    }
    Ok(runs)
}

/// Runs every manifest entry with `exe`, at most `workers` at a time, and
/// returns the exit code of each run in manifest order.
pub fn run_sweep(exe: &Path, runs: &[Invocation], workers: usize) -> Vec<i32> {
    let next = AtomicUsize::new(0);
    let codes = Mutex::new(vec![EXIT_INVALID; runs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, runs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(run) = runs.get(k) else { break };
                let mut cmd = Command::new(exe);
                cmd.arg(&run.scenario).arg("--config").arg(&run.config);
                if let Some(out) = &run.out {
                    cmd.arg("--out").arg(out);
                }
                if let Some(seed) = run.seed {
                    cmd.arg("--seed").arg(seed.to_string());
                }
                let code = cmd.status().ok().and_then(|s| s.code()).unwrap_or(EXIT_INVALID);
                codes.lock().expect("no worker panics while holding the lock")[k] = code;
            });
        }
    });
    codes.into_inner().expect("workers joined")
}
