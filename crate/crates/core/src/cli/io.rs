//! File helpers shared by the subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::datagen;
use crate::error::{Error, Result};
use crate::estimators::{self, LabeledSample, UnlabeledSample};

/// Stream used to subsample the larger of two samples to a common size.
const SUBSAMPLE_STREAM: u64 = 0x5ab5;
/// Stream used to draw a stump pool.
pub(super) const POOL_STREAM: u64 = 0x9001;

pub(super) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Pretty JSON with a trailing newline.
pub(super) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub(super) fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn read_labeled(path: &Path) -> Result<LabeledSample> {
    estimators::read_labeled_csv(BufReader::new(File::open(path)?))
}

pub(super) fn read_unlabeled(path: &Path) -> Result<UnlabeledSample> {
    estimators::read_unlabeled_csv(BufReader::new(File::open(path)?))
}

pub(super) fn write_labeled(path: &Path, sample: &LabeledSample) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    estimators::write_labeled_csv(sample, &mut out)?;
    out.flush()?;
    Ok(())
}

pub(super) fn write_unlabeled(path: &Path, sample: &UnlabeledSample) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    estimators::write_unlabeled_csv(sample, &mut out)?;
    out.flush()?;
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    if a == b {
        return true;
    }
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Refuses to overwrite any of the inputs.
pub(super) fn ensure_distinct(out: &Path, inputs: &[&Option<PathBuf>]) -> Result<()> {
    for input in inputs.iter().filter_map(|p| p.as_ref()) {
        if same_file(out, input) {
            return Err(Error::Config(format!(
                "output {} would overwrite an input",
                out.display()
            )));
        }
    }
    Ok(())
}

/// Sidecar path `<out>.summary.json`.
pub(super) fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Record of a subsampling step applied to reach `m_S = m_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub(super) struct Subsample {
    pub side: &'static str,
    pub from: usize,
    pub to: usize,
}

/// Subsamples the larger sample without replacement, keeping row order,
/// so both have `min(m_S, m_T)` rows.
pub(super) fn equalize(
    source: LabeledSample,
    target: UnlabeledSample,
    seed: Option<u64>,
) -> Result<(LabeledSample, UnlabeledSample, Option<Subsample>)> {
    let (ms, mt) = (source.len(), target.len());
    if ms == mt {
        return Ok((source, target, None));
    }
    let seed = super::require_seed(seed, "subsampling unequal samples")?;
    let m = ms.min(mt);
    let mut rng = datagen::rng_from_seed(datagen::derive_seed(seed, SUBSAMPLE_STREAM));
    let pick = |len: usize, rng: &mut datagen::SeededRng| {
        let mut idx = index::sample(rng, len, m).into_vec();
        idx.sort_unstable();
        idx
    };
    if ms > mt {
        let idx = pick(ms, &mut rng);
        log::info!("subsampling source from {ms} to {m} rows");
        Ok((
            source.select(&idx)?,
            target,
            Some(Subsample {
                side: "source",
                from: ms,
                to: m,
            }),
        ))
    } else {
        let idx = pick(mt, &mut rng);
        log::info!("subsampling target from {mt} to {m} rows");
        Ok((
            source,
            target.select(&idx)?,
            Some(Subsample {
                side: "target",
                from: mt,
                to: m,
            }),
        ))
    }
}
