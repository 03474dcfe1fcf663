//! Discretized modulation functions and their on-disk form.
//!
//! The sensor is tiled into blocks of `bx x by` spatial pixels. Each block
//! captures `nu * nv * bx * by` angular samples on the same number of sensor
//! pixels, so every block matrix is square. Column `c` of a block is the
//! sample `(u, v, dx, dy)` with `c = (dx * nu + u) * (by * nv) + dy * nv + v`,
//! which is also the sensor pixel `(dx * nu + u, dy * nv + v)` a lenslet
//! would route it to. The pinhole matrix is therefore the identity.
//!
//! File layout (`.mtx`): magic `DPMX`, u32 version, u32 header length, a JSON
//! header, then every block as row-major little-endian `f32`.

use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPMX";
pub const VERSION: u32 = 1;

/// Attempts before a random generator gives up on `max_condition`.
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Pinhole,
    RandomBinary,
    RandomGaussian,
    User,
}

impl FromStr for Generator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinhole" => Ok(Self::Pinhole),
            "random-binary" => Ok(Self::RandomBinary),
            "random-gaussian" => Ok(Self::RandomGaussian),
            "user" => Ok(Self::User),
            _ => Err(Error::InvalidArgument(format!("unknown modulation generator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMatrix {
    pub generator: Generator,
    pub views: (usize, usize),
    pub block: (usize, usize),
    /// One matrix shared by every block, or one per block in row-major block
    /// order.
    pub blocks: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    pub seed: u64,
    /// Redraw until the condition number is below this.
    pub max_condition: Option<f64>,
    /// Scale each row to sum to one.
    pub row_normalize: bool,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { seed: 0, max_condition: None, row_normalize: false }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    generator: Generator,
    nu: usize,
    nv: usize,
    bx: usize,
    by: usize,
    size: usize,
    blocks: usize,
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

impl ModulationMatrix {
    pub fn new(generator: Generator, views: (usize, usize), block: (usize, usize), blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if views.0 == 0 || views.1 == 0 || block.0 == 0 || block.1 == 0 {
            return Err(Error::InvalidArgument(format!("views {views:?} and block {block:?} must be positive")));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("modulation matrix has no blocks".into()));
        }
        let n = views.0 * views.1 * block.0 * block.1;
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::Shape(format!("block {i} is {:?}, expected ({n}, {n})", b.shape())));
            }
            if let Some(w) = b.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
                return Err(Error::InvalidArgument(format!("block {i} has weight {w}; weights must be finite and >= 0")));
            }
        }
        Ok(Self { generator, views, block, blocks })
    }

    /// Angular samples (and sensor pixels) per block.
    pub fn size(&self) -> usize {
        self.views.0 * self.views.1 * self.block.0 * self.block.1
    }

    pub fn shared(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn block_matrix(&self, b: usize) -> &DMatrix<f64> {
        if self.shared() {
            &self.blocks[0]
        } else {
            &self.blocks[b]
        }
    }

    /// Column (and pinhole row) of sample `(u, v, dx, dy)` within a block.
    pub fn column(&self, u: usize, v: usize, dx: usize, dy: usize) -> usize {
        let (nu, nv) = self.views;
        (dx * nu + u) * (self.block.1 * nv) + dy * nv + v
    }

    /// Sensor pixel, relative to the block origin, of row `r`.
    pub fn sensor_offset(&self, r: usize) -> (usize, usize) {
        let w = self.block.1 * self.views.1;
        (r / w, r % w)
    }

    pub fn pinhole(views: (usize, usize), block: (usize, usize)) -> Result<Self> {
        let n = views.0 * views.1 * block.0 * block.1;
        Self::new(Generator::Pinhole, views, block, vec![DMatrix::identity(n, n)])
    }

    /// Entries drawn uniformly from `{0, 1}`.
    pub fn random_binary(views: (usize, usize), block: (usize, usize), opts: GeneratorOptions) -> Result<Self> {
        Self::random(Generator::RandomBinary, views, block, opts, |rng| if rng.random::<bool>() { 1.0 } else { 0.0 })
    }

    /// Entries `|z|` with `z` standard normal, keeping weights non-negative.
    pub fn random_gaussian(views: (usize, usize), block: (usize, usize), opts: GeneratorOptions) -> Result<Self> {
        Self::random(Generator::RandomGaussian, views, block, opts, |rng| {
            let z: f64 = StandardNormal.sample(rng);
            z.abs()
        })
    }

    pub fn generate(generator: Generator, views: (usize, usize), block: (usize, usize), opts: GeneratorOptions) -> Result<Self> {
        match generator {
            Generator::Pinhole => Self::pinhole(views, block),
            Generator::RandomBinary => Self::random_binary(views, block, opts),
            Generator::RandomGaussian => Self::random_gaussian(views, block, opts),
            Generator::User => Err(Error::InvalidArgument("user matrices are loaded from a file".into())),
        }
    }

    fn random(
        generator: Generator,
        views: (usize, usize),
        block: (usize, usize),
        opts: GeneratorOptions,
        mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
    ) -> Result<Self> {
        let n = views.0 * views.1 * block.0 * block.1;
        if n == 0 {
            return Err(Error::InvalidArgument(format!("views {views:?} and block {block:?} must be positive")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut best = f64::INFINITY;
        for _ in 0..MAX_DRAWS {
            let mut m = DMatrix::from_fn(n, n, |_, _| draw(&mut rng));
            if opts.row_normalize {
                normalize_rows(&mut m);
            }
            let cond = condition_number(&m);
            best = best.min(cond);
            if opts.max_condition.is_none_or(|limit| cond < limit) {
                return Self::new(generator, views, block, vec![m]);
            }
        }
        Err(Error::InvalidArgument(format!(
            "no {n}x{n} draw reached condition < {:?} in {MAX_DRAWS} tries (best {best:.1})",
            opts.max_condition.unwrap_or(f64::INFINITY)
        )))
    }

    pub fn condition_numbers(&self) -> Vec<f64> {
        self.blocks.iter().map(condition_number).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = FileHeader {
            generator: self.generator,
            nu: self.views.0,
            nv: self.views.1,
            bx: self.block.0,
            by: self.block.1,
            size: self.size(),
            blocks: self.blocks.len(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.size() * self.size() * self.blocks.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for b in &self.blocks {
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    out.extend_from_slice(&(b[(r, c)] as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("matrix file: {m}"));
        if bytes.len() < 12 {
            return Err(bad(format!("{} bytes is too short", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(bad(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header".into()))?;
        let h: FileHeader = serde_json::from_slice(body)?;
        let n = h.nu * h.nv * h.bx * h.by;
        if h.size != n {
            return Err(bad(format!("size {} does not match views and block ({n})", h.size)));
        }
        let data = &bytes[12 + len..];
        let need = h.blocks.checked_mul(n * n * 4).ok_or_else(|| bad("block count overflows".into()))?;
        if data.len() != need {
            return Err(bad(format!("expected {need} bytes of weights, found {}", data.len())));
        }
        let mut values = data.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        let blocks = (0..h.blocks).map(|_| DMatrix::from_row_iterator(n, n, values.by_ref().take(n * n))).collect();
        Self::new(h.generator, (h.nu, h.nv), (h.bx, h.by), blocks)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

fn normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row /= s;
        }
    }
}
