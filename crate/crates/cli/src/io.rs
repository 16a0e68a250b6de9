use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use perceptual_space::factor::PerceptualSpace;
use perceptual_space::lsi::{load_metadata_space, MetadataSpace, METADATA_TAG};
use perceptual_space::space::{self, ItemEmbedding, SPACE_TAG};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from the single `--seed`.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Train = 1,
    Sample = 2,
    Crowd = 3,
}

pub fn sub_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.next_u64()
}

/// Output files held in memory until every computation has succeeded.
#[derive(Default)]
pub struct Outputs {
    pending: Vec<(PathBuf, String)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: String) {
        self.pending.push((path.into(), contents));
    }

    /// Writes each file through a sibling temporary and a rename; on failure
    /// files already written by this call are removed again.
    pub fn commit(self) -> Result<()> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, contents) in self.pending {
            if let Err(e) = write_atomic(&path, &contents) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

/// A perceptual space or an LSI metadata space, told apart by the header tag.
pub enum AnySpace {
    Perceptual(PerceptualSpace),
    Metadata(MetadataSpace),
}

impl AnySpace {
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).with_context(|| format!("cannot open space file {}", path.display()))?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first)?;
        let tag = first.split('\t').next().unwrap_or("").trim();
        Ok(match tag {
            SPACE_TAG => AnySpace::Perceptual(space::load(path)?),
            METADATA_TAG => AnySpace::Metadata(load_metadata_space(path)?),
            other => bail!("{}: unknown space file tag `{other}`", path.display()),
        })
    }

    pub fn embedding(&self) -> &dyn ItemEmbedding {
        match self {
            AnySpace::Perceptual(s) => s,
            AnySpace::Metadata(s) => s,
        }
    }
}
