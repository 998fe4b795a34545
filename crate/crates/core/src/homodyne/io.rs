use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetMeta, HomodyneDataset};
use crate::error::{Error, Result};

const META_FILE: &str = "metadata.json";
const CURRENT_FILE: &str = "photocurrent.bin";
const TRIALS_FILE: &str = "trials.csv";
const FORMAT: &str = "sqzmem-homodyne-v1";

#[derive(Serialize, Deserialize)]
struct MetaFile {
    format: String,
    n_trials: usize,
    n_bins: usize,
    /// Layout of the binary photocurrent file.
    photocurrent_layout: String,
    #[serde(flatten)]
    meta: DatasetMeta,
}

/// Writes `metadata.json`, `photocurrent.bin` (little-endian f64, row-major
/// trials x bins) and `trials.csv` into `dir`.
pub fn save_dataset(dataset: &HomodyneDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = MetaFile {
        format: FORMAT.into(),
        n_trials: dataset.n_trials(),
        n_bins: dataset.n_bins(),
        photocurrent_layout: "f64 little-endian, row-major [trial][bin]".into(),
        meta: dataset.meta.clone(),
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;

    let mut w = BufWriter::new(fs::File::create(dir.join(CURRENT_FILE))?);
    for v in &dataset.photocurrent {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;

    let mut w = BufWriter::new(fs::File::create(dir.join(TRIALS_FILE))?);
    writeln!(w, "trial,fringe,lo_phase_true,bright_phase_true")?;
    for i in 0..dataset.n_trials() {
        writeln!(
            w,
            "{i},{},{},{}",
            dataset.fringes[i], dataset.lo_phases[i], dataset.bright_phases[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, what: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::MissingArtifact(format!("{TRIALS_FILE} line {line}: bad {what} '{s}'")))
}

pub fn load_dataset(dir: &Path) -> Result<HomodyneDataset> {
    let read = |name: &str| -> Result<Vec<u8>> {
        fs::read(dir.join(name)).map_err(|e| Error::MissingArtifact(format!("{}: {e}", dir.join(name).display())))
    };
    let meta: MetaFile = serde_json::from_slice(&read(META_FILE)?)?;
    if meta.format != FORMAT {
        return Err(Error::MissingArtifact(format!("unknown dataset format '{}'", meta.format)));
    }
    let bytes = read(CURRENT_FILE)?;
    if bytes.len() != meta.n_trials * meta.n_bins * 8 {
        return Err(Error::MissingArtifact(format!(
            "{CURRENT_FILE} has {} bytes, expected {}",
            bytes.len(),
            meta.n_trials * meta.n_bins * 8
        )));
    }
    let photocurrent = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let file = fs::File::open(dir.join(TRIALS_FILE))
        .map_err(|e| Error::MissingArtifact(format!("{TRIALS_FILE}: {e}")))?;
    let mut fringes = Vec::with_capacity(meta.n_trials);
    let mut lo_phases = Vec::with_capacity(meta.n_trials);
    let mut bright_phases = Vec::with_capacity(meta.n_trials);
    for (ln, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::MissingArtifact(format!("{TRIALS_FILE} line {}: expected 4 columns", ln + 1)));
        }
        fringes.push(parse_f64(cols[1], "fringe", ln + 1)?);
        lo_phases.push(parse_f64(cols[2], "phase", ln + 1)?);
        bright_phases.push(parse_f64(cols[3], "phase", ln + 1)?);
    }
    if fringes.len() != meta.n_trials {
        return Err(Error::MissingArtifact(format!(
            "{TRIALS_FILE} has {} trials, metadata says {}",
            fringes.len(),
            meta.n_trials
        )));
    }
    Ok(HomodyneDataset {
        meta: meta.meta,
        photocurrent,
        fringes,
        lo_phases,
        bright_phases,
    })
}
