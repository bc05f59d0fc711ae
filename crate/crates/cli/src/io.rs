use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aglab_core::fields::{rasterize, read_binary, write_binary, write_csv, Discretization, ScalarField};
use aglab_core::{ConvexDomain, Shape};
use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Suffix carried by every output file name; bumped when a format changes.
pub const FORMAT_VERSION: &str = "v1";

pub fn versioned(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{FORMAT_VERSION}.{ext}"))
}

/// Write through a temporary file in the target directory, then rename.
/// The temporary file is removed if writing fails or the process unwinds.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    let tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot create a file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn write_field(dir: &Path, stem: &str, u: &ScalarField) -> Result<(PathBuf, PathBuf)> {
    let bin = versioned(dir, stem, "bin");
    let csv = versioned(dir, stem, "csv");
    write_atomic(&bin, |w| Ok(write_binary(u, w)?))?;
    write_atomic(&csv, |w| Ok(write_csv(u, w)?))?;
    Ok((bin, csv))
}

pub fn load_shape(path: &Path) -> Result<Shape> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read domain file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed domain file {}", path.display()))
}

pub fn load_domain(path: &Path) -> Result<ConvexDomain> {
    let shape = load_shape(path)?;
    ConvexDomain::new(shape).with_context(|| format!("invalid domain in {}", path.display()))
}

/// Values of a binary snapshot, placed on the grid that `domain` induces at
/// the snapshot's spacing. Non-finite values at active nodes are kept.
pub fn load_field(path: &Path, domain: &ConvexDomain) -> Result<ScalarField> {
    let file = fs::File::open(path).with_context(|| format!("cannot read field file {}", path.display()))?;
    let (grid, values) = read_binary(std::io::BufReader::new(file))
        .with_context(|| format!("malformed field file {}", path.display()))?;
    let disc: Arc<Discretization> = rasterize(domain, grid.h)?;
    if disc.grid != grid {
        bail!(
            "field {} does not lie on the grid of the domain at h = {} (file {}x{}, domain {}x{})",
            path.display(),
            grid.h,
            grid.nx,
            grid.ny,
            disc.grid.nx,
            disc.grid.ny
        );
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| if disc.is_active(k) { v } else { f64::NAN })
        .collect();
    Ok(ScalarField { disc, values })
}
