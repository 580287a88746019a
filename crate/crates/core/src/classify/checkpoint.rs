//! Binary model checkpoints.
//!
//! Layout (little-endian): the magic `XFBM`, a `u32` format version, a `u32`
//! kind tag, a `u64` tensor count, then each tensor as `u64` rows, `u64`
//! columns and `rows * cols` row-major `f64` values. Scalars and integer
//! metadata travel as small row tensors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::knn::KnnModel;
use super::mlp::{DaMlpModel, MlpModel};
use super::svm::{SvmClassifier, SvmKind, SvmModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"XFBM";
const VERSION: u32 = 1;
const MAX_ELEMENTS: u64 = 1 << 34;

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Knn(KnnModel),
    Svm(SvmClassifier),
    Mlp(MlpModel),
    DaMlp(DaMlpModel),
}

impl Checkpoint {
    fn tag(&self) -> u32 {
        match self {
            Checkpoint::Knn(_) => 1,
            Checkpoint::Svm(_) => 2,
            Checkpoint::Mlp(_) => 3,
            Checkpoint::DaMlp(_) => 4,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Checkpoint::Knn(_) => "knn",
            Checkpoint::Svm(_) => "svm",
            Checkpoint::Mlp(_) => "mlp",
            Checkpoint::DaMlp(_) => "da_mlp",
        }
    }

    fn tensors(&self) -> Vec<DMatrix<f64>> {
        let row = |v: &[f64]| DMatrix::from_row_slice(1, v.len(), v);
        let col = |v: &DVector<f64>| row(v.as_slice());
        match self {
            Checkpoint::Knn(m) => {
                let labels: Vec<f64> = m.labels().iter().map(|&l| l as f64).collect();
                vec![row(&[m.k() as f64]), m.coords().clone(), row(&labels)]
            }
            Checkpoint::Svm(c) => {
                let mut t = vec![row(&[c.n_classes() as f64, c.models().len() as f64])];
                for m in c.models() {
                    let kind = match m.kind() {
                        SvmKind::Linear => 0.0,
                        SvmKind::Rbf => 1.0,
                    };
                    t.push(row(&[kind, m.c(), m.gamma(), m.bias()]));
                    t.push(m.support_vectors().clone());
                    t.push(row(m.dual_coefs()));
                }
                t
            }
            Checkpoint::Mlp(m) => vec![m.w1.clone(), col(&m.b1), m.w2.clone(), col(&m.b2)],
            Checkpoint::DaMlp(m) => vec![
                m.base.w1.clone(),
                col(&m.base.b1),
                m.base.w2.clone(),
                col(&m.base.b2),
                m.wd.clone(),
                col(&m.bd),
                row(&[m.lambda_d]),
            ],
        }
    }

    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&self.tag().to_le_bytes())?;
        let tensors = self.tensors();
        out.write_all(&(tensors.len() as u64).to_le_bytes())?;
        for t in &tensors {
            out.write_all(&(t.nrows() as u64).to_le_bytes())?;
            out.write_all(&(t.ncols() as u64).to_le_bytes())?;
            for row in t.row_iter() {
                for v in row.iter() {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read(input: &mut impl Read) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a model checkpoint"));
        }
        let version = read_u32(input)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let tag = read_u32(input)?;
        let count = read_u64(input)?;
        if count > 1 << 20 {
            return Err(bad("implausible tensor count"));
        }
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let rows = read_u64(input)?;
            let cols = read_u64(input)?;
            if rows.checked_mul(cols).is_none_or(|n| n > MAX_ELEMENTS) {
                return Err(bad("implausible tensor shape"));
            }
            let mut values = Vec::with_capacity((rows * cols) as usize);
            for _ in 0..rows * cols {
                let mut b = [0u8; 8];
                input.read_exact(&mut b).map_err(|_| bad("truncated tensor"))?;
                values.push(f64::from_le_bytes(b));
            }
            tensors.push(DMatrix::from_row_slice(rows as usize, cols as usize, &values));
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().ok_or_else(|| bad("missing tensor"));
        let vector = |m: DMatrix<f64>| DVector::from_iterator(m.len(), m.transpose().iter().copied());
        let to_index = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
                Ok(v as usize)
            } else {
                Err(Error::Checkpoint(format!("{v} is not a count")))
            }
        };
        let ckpt = match tag {
            1 => {
                let k = to_index(next()?[0])?;
                let coords = next()?;
                let labels = next()?.iter().map(|&v| to_index(v)).collect::<Result<Vec<_>>>()?;
                Checkpoint::Knn(KnnModel::new(coords, labels, k)?)
            }
            2 => {
                let head = next()?;
                if head.len() != 2 {
                    return Err(bad("bad svm header"));
                }
                let n_classes = to_index(head[0])?;
                let n_models = to_index(head[1])?;
                let mut models = Vec::with_capacity(n_models);
                for _ in 0..n_models {
                    let meta = next()?;
                    if meta.len() != 4 {
                        return Err(bad("bad svm model header"));
                    }
                    let kind = match meta[0] {
                        0.0 => SvmKind::Linear,
                        1.0 => SvmKind::Rbf,
                        _ => return Err(bad("unknown svm kind")),
                    };
                    let sv = next()?;
                    let coefs = next()?.iter().copied().collect();
                    models.push(SvmModel::from_parts(kind, sv, coefs, meta[3], meta[1], meta[2])?);
                }
                Checkpoint::Svm(SvmClassifier::from_models(n_classes, models)?)
            }
            3 => Checkpoint::Mlp(MlpModel::new(next()?, vector(next()?), next()?, vector(next()?))?),
            4 => {
                let base = MlpModel::new(next()?, vector(next()?), next()?, vector(next()?))?;
                let wd = next()?;
                let bd = vector(next()?);
                let lambda = next()?[0];
                Checkpoint::DaMlp(DaMlpModel::new(base, wd, bd, lambda)?)
            }
            other => return Err(Error::Checkpoint(format!("unknown kind tag {other}"))),
        };
        if next().is_ok() {
            return Err(bad("trailing tensors"));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        self.write(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        Self::read(&mut r)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}
