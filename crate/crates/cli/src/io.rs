use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use qsgauc_core::{
    parse_libsvm, CoefficientHistory, LabeledDataset, SemiSupervisedDataset, SplitManifest, TestSet,
};
use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Writes through a temporary file in the destination directory, then renames
/// it into place, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    let mut out = BufWriter::new(tmp);
    fill(&mut out)?;
    out.flush().map_err(|e| CliError::io(path, e))?;
    let tmp = out
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| CliError::io(path, e))
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn read_libsvm(path: &Path) -> Result<LabeledDataset> {
    parse_libsvm(open(path)?).map_err(|e| CliError::core(path.display().to_string(), e))
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest> {
    SplitManifest::read(open(path)?).map_err(|e| CliError::core(path.display().to_string(), e))
}

pub fn read_model(path: &Path) -> Result<CoefficientHistory> {
    CoefficientHistory::load(open(path)?).map_err(|e| CliError::core(path.display().to_string(), e))
}

/// Loads a data file and materializes the pools its manifest lists. A nonzero
/// `dim` widens the inferred dimension; it may not shrink it.
pub fn read_problem(
    data: &Path,
    split: &Path,
    dim: usize,
) -> Result<(SemiSupervisedDataset, TestSet)> {
    let mut ds = read_libsvm(data)?;
    if dim > 0 {
        if dim < ds.dim {
            return Err(CliError::Config(format!(
                "dim = {dim} but {} has feature index {}",
                data.display(),
                ds.dim
            )));
        }
        ds.dim = dim;
    }
    let manifest = read_manifest(split)?;
    manifest
        .apply(&ds, &data.display().to_string())
        .map_err(|e| CliError::core(split.display().to_string(), e))
}
