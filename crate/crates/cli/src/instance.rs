//! Instance sources: a JSON file or individual flags.

use std::path::PathBuf;

use cacheopt::model::zipf_popularity;
use cacheopt::Instance;
use clap::Args;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Instance JSON: {"users", "cache", "popularity" | "files" + "zipf", "sizes"?}.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["popularity", "zipf"])]
    pub instance: Option<PathBuf>,
    /// Number of files (required with --zipf).
    #[arg(long, short = 'N')]
    pub files: Option<usize>,
    /// Number of users.
    #[arg(long, short = 'K')]
    pub users: Option<usize>,
    /// Cache size per user, in files (or size units with --sizes).
    #[arg(long, short = 'M')]
    pub cache: Option<f64>,
    /// Zipf exponent.
    #[arg(long, conflicts_with = "popularity")]
    pub zipf: Option<f64>,
    /// Popularity as a JSON array; reordered by decreasing popularity if needed.
    #[arg(long, value_name = "JSON")]
    pub popularity: Option<String>,
    /// File sizes as a JSON array, in the order of --popularity.
    #[arg(long, value_name = "JSON")]
    pub sizes: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    users: usize,
    cache: f64,
    files: Option<usize>,
    popularity: Option<Vec<f64>>,
    zipf: Option<f64>,
    sizes: Option<Vec<f64>>,
}

/// Instance with files sorted by decreasing popularity.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub instance: Instance,
    /// `order[i]` is the caller's 0-based index of sorted file `i`.
    pub order: Vec<usize>,
}

impl Resolved {
    pub fn is_reordered(&self) -> bool {
        self.order.iter().enumerate().any(|(i, &o)| i != o)
    }

    /// 1-based caller indices, present only when files were reordered.
    pub fn file_order(&self) -> Option<Vec<usize>> {
        self.is_reordered().then(|| self.order.iter().map(|o| o + 1).collect())
    }
}

fn parse_array(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::Input(format!("--{flag}: {e}")))
}

fn build(
    users: usize,
    cache: f64,
    files: Option<usize>,
    popularity: Option<Vec<f64>>,
    zipf: Option<f64>,
    sizes: Option<Vec<f64>>,
) -> Result<Resolved, CliError> {
    let popularity = match (popularity, zipf) {
        (Some(_), Some(_)) => return Err(CliError::Input("give either popularity or zipf, not both".into())),
        (Some(p), None) => {
            if files.is_some_and(|n| n != p.len()) {
                return Err(CliError::Input(format!("files = {} but popularity has {} entries", files.unwrap(), p.len())));
            }
            p
        }
        (None, Some(theta)) => {
            let n = files.ok_or_else(|| CliError::Input("zipf popularity needs the number of files".into()))?;
            if !(theta >= 0.0 && theta.is_finite()) {
                return Err(CliError::Input(format!("Zipf exponent {theta} must be >= 0")));
            }
            zipf_popularity(n, theta)
        }
        (None, None) => return Err(CliError::Input("missing popularity: give --zipf or --popularity".into())),
    };
    let (instance, order) = Instance::from_unsorted(users, cache, popularity, sizes)?;
    Ok(Resolved { instance, order })
}

impl InstanceArgs {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        if let Some(path) = &self.instance {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let f: InstanceFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let cache = self.cache.unwrap_or(f.cache);
            let users = self.users.unwrap_or(f.users);
            return build(users, cache, f.files, f.popularity, f.zipf, f.sizes);
        }
        let users = self.users.ok_or_else(|| CliError::Input("missing --users".into()))?;
        let cache = self.cache.ok_or_else(|| CliError::Input("missing --cache".into()))?;
        let popularity = self.popularity.as_deref().map(|s| parse_array("popularity", s)).transpose()?;
        let sizes = self.sizes.as_deref().map(|s| parse_array("sizes", s)).transpose()?;
        build(users, cache, self.files, popularity, self.zipf, sizes)
    }

    /// Same source with a different cache size or Zipf exponent.
    pub fn resolve_at(&self, cache: Option<f64>, theta: Option<f64>) -> Result<Resolved, CliError> {
        let mut args = self.clone();
        if cache.is_some() {
            args.cache = cache;
        }
        if theta.is_some() {
            if args.instance.is_some() || args.popularity.is_some() {
                return Err(CliError::Input("a theta sweep needs --files and --zipf".into()));
            }
            args.zipf = theta;
        }
        args.resolve()
    }
}
