//! Optional JSON config files. Keys are the long flag names without the
//! leading dashes (`"train-emb"`, `"seed-count"`, ...); list-valued flags
//! take JSON arrays. Values given on the command line always win.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

pub const RNG_SEED_ENV: &str = "COARSESET_RNG_SEED";

/// Fills unset fields of `self` from a config file.
pub trait Merge: Sized {
    fn merge(self, file: Self) -> Self;
}

#[macro_export]
macro_rules! impl_merge {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::config::Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self {
                    $($field: self.$field.or(file.$field),)*
                    ..self
                }
            }
        }
    };
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
}

/// Applies the config file, if one was named, under the flags.
pub fn resolve<T: Merge + DeserializeOwned>(args: T, config: Option<&Path>) -> Result<T, CliError> {
    match config {
        Some(p) => Ok(args.merge(load(p)?)),
        None => Ok(args),
    }
}

/// Seed precedence: flag or config value, then the environment, then 0.
pub fn rng_seed(explicit: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(RNG_SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{RNG_SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}
