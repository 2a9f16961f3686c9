use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use vidsum::data::{load_dataset, subsample, write_atomic, Dataset};

pub const DATA_ROOT_VAR: &str = "VIDSUM_DATA_ROOT";

/// `--out` when given, otherwise `<root>/<verb>-<timestamp>-seed<seed>`
/// under `$VIDSUM_DATA_ROOT` or `./runs`.
pub fn run_dir(verb: &str, seed: u64, out: Option<&Path>) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(DATA_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"));
            let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
            let base = root.join(format!("{verb}-{stamp}-seed{seed}"));
            let mut dir = base.clone();
            let mut n = 1;
            while dir.exists() {
                dir = PathBuf::from(format!("{}-{n}", base.display()));
                n += 1;
            }
            dir
        }
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Copy of the resolved command options, written beside the outputs.
pub fn write_options<T: Serialize>(dir: &Path, verb: &str, options: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Record<'a, T> {
        verb: &'a str,
        version: &'a str,
        options: &'a T,
    }
    write_json(
        dir.join("options.json"),
        &Record {
            verb,
            version: env!("CARGO_PKG_VERSION"),
            options,
        },
    )
}

/// Loads a manifest and brings every video down to at most `fps`.
pub fn load_at_rate(manifest: &Path, fps: f64) -> Result<Dataset> {
    let mut ds = load_dataset(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    for v in &mut ds.videos {
        if v.fps > fps {
            *v = subsample(v, fps).with_context(|| format!("subsampling video {}", v.id))?;
        }
    }
    Ok(ds)
}
