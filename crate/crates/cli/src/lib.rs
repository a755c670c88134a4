//! Library half of the `bandflow` command-line tool.
//!
//! Every subcommand is a plain function returning data plus the CSV it
//! would print, so tests can drive the same code paths as the binary.

pub mod compare;
pub mod error;
pub mod fig1;
pub mod flow_cmd;
pub mod output;
pub mod spectrum;

pub use error::{CliError, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_TRUNCATION};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "BANDFLOW_THREADS";

/// Parses a level selection: `5`, `0,2,7`, `0..5` (exclusive) or `0..=5`.
pub fn parse_levels(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Input(format!("invalid level list `{s}`"));
    let s = s.trim();
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let (b, inclusive) = match b.strip_prefix('=') {
                Some(b) => (b, true),
                None => (b, false),
            };
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            let end = if inclusive { b + 1 } else { b };
            if end <= a {
                return Err(bad());
            }
            out.extend(a..end);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Parses a comma-separated list of numbers.
pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| CliError::Input(format!("invalid {what} `{p}`"))))
        .collect()
}
