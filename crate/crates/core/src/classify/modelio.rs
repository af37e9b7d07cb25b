//! Binary model container.
//!
//! Layout (little-endian): magic, `u32` version, `u8` kind, `u8` task,
//! labels, then a kind-specific body. Weights are stored as `f32`.

use std::io::{self, Read, Write};

use super::fasttext::{FastTextModel, FastTextParams};
use super::features::Vocab;
use super::linear::{LinearHyper, LinearModel, LossKind};
use super::{Body, Classifier, ModelKind, Task};
use crate::{Condition, Error, Result};

pub const MAGIC: &[u8; 8] = b"SMHDMODL";
pub const FORMAT_VERSION: u32 = 1;

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.0.write_all(b)
    }
    fn u8(&mut self, v: u8) -> io::Result<()> {
        self.bytes(&[v])
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn len(&mut self, n: usize) -> io::Result<()> {
        let n = u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "length exceeds u32"))?;
        self.u32(n)
    }
    fn f32s(&mut self, v: impl IntoIterator<Item = f32>) -> io::Result<()> {
        for x in v {
            self.bytes(&x.to_le_bytes())?;
        }
        Ok(())
    }
    fn str(&mut self, s: &str) -> io::Result<()> {
        self.len(s.len())?;
        self.bytes(s.as_bytes())
    }
    fn labels(&mut self, labels: &[Condition]) -> io::Result<()> {
        self.len(labels.len())?;
        for c in labels {
            self.u8(c.index() as u8)?;
        }
        Ok(())
    }
    fn vocab(&mut self, v: &Vocab) -> io::Result<()> {
        self.u32(v.n_docs())?;
        self.u64(v.min_count())?;
        self.len(v.len())?;
        for (t, &df) in v.tokens().iter().zip(v.doc_freqs()) {
            self.str(t)?;
            self.u32(df)?;
        }
        Ok(())
    }
}

struct In<R: Read>(R);

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

impl<R: Read> In<R> {
    fn exact<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.0.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => bad("truncated file"),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.exact::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.exact()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.exact()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.exact()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.exact()?))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut buf = vec![0u8; n.checked_mul(4).ok_or_else(|| bad("length overflow"))?];
        self.0.read_exact(&mut buf).map_err(|_| bad("truncated weights"))?;
        Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let mut buf = vec![0u8; n];
        self.0.read_exact(&mut buf).map_err(|_| bad("truncated string"))?;
        String::from_utf8(buf).map_err(|_| bad("string is not UTF-8"))
    }
    fn labels(&mut self) -> Result<Vec<Condition>> {
        let n = self.usize()?;
        (0..n)
            .map(|_| {
                let i = self.u8()? as usize;
                Condition::ALL.get(i).copied().ok_or_else(|| bad(format!("unknown condition index {i}")))
            })
            .collect()
    }
    fn vocab(&mut self) -> Result<Vocab> {
        let n_docs = self.u32()?;
        let min_count = self.u64()?;
        let n = self.usize()?;
        let mut tokens = Vec::with_capacity(n.min(1 << 20));
        let mut df = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            tokens.push(self.str()?);
            df.push(self.u32()?);
        }
        if tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("vocabulary is not sorted"));
        }
        Ok(Vocab::from_parts(tokens, df, n_docs, min_count))
    }
}

fn kind_code(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Logreg => 0,
        ModelKind::Svm => 1,
        ModelKind::Fasttext => 2,
    }
}

pub fn write_model<W: Write>(out: W, model: &Classifier) -> io::Result<()> {
    let mut o = Out(out);
    o.bytes(MAGIC)?;
    o.u32(FORMAT_VERSION)?;
    o.u8(kind_code(model.kind))?;
    o.u8(match model.task {
        Task::Binary => 0,
        Task::Multilabel => 1,
    })?;
    o.labels(&model.labels)?;
    match &model.body {
        Body::Linear { vocab, models } => {
            o.vocab(vocab)?;
            for m in models {
                o.f64(m.hyper.learning_rate)?;
                o.u64(m.hyper.epochs as u64)?;
                o.f64(m.hyper.l2)?;
                o.u64(m.seed)?;
                o.f32s([m.bias as f32])?;
                o.len(m.weights.len())?;
                o.f32s(m.weights.iter().map(|&w| w as f32))?;
            }
        }
        Body::FastText(models) => {
            o.len(models.len())?;
            for m in models {
                let p = &m.params;
                o.len(p.dim)?;
                o.len(p.min_n)?;
                o.len(p.max_n)?;
                o.u32(p.buckets)?;
                o.u64(p.epochs as u64)?;
                o.f64(p.learning_rate)?;
                o.u64(p.min_count)?;
                o.u64(m.seed)?;
                o.labels(&m.labels)?;
                o.vocab(&m.words)?;
                o.len(m.trained_rows.len())?;
                for &r in &m.trained_rows {
                    o.u32(r)?;
                }
                o.f32s(m.table.iter().copied())?;
                o.f32s(m.output.iter().copied())?;
                o.f32s(m.bias.iter().copied())?;
            }
        }
    }
    o.0.flush()
}

pub fn read_model<R: Read>(input: R) -> Result<Classifier> {
    let mut i = In(input);
    if &i.exact::<8>()? != MAGIC {
        return Err(bad("not a model file"));
    }
    let version = i.u32()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let kind = match i.u8()? {
        0 => ModelKind::Logreg,
        1 => ModelKind::Svm,
        2 => ModelKind::Fasttext,
        k => return Err(bad(format!("unknown model kind {k}"))),
    };
    let task = match i.u8()? {
        0 => Task::Binary,
        1 => Task::Multilabel,
        t => return Err(bad(format!("unknown task {t}"))),
    };
    let labels = i.labels()?;
    let body = match kind {
        ModelKind::Logreg | ModelKind::Svm => {
            let loss = if kind == ModelKind::Logreg { LossKind::Logistic } else { LossKind::Hinge };
            let vocab = i.vocab()?;
            let mut models = Vec::with_capacity(labels.len());
            for _ in &labels {
                let hyper = LinearHyper {
                    learning_rate: i.f64()?,
                    epochs: i.u64()? as usize,
                    l2: i.f64()?,
                };
                let seed = i.u64()?;
                let bias = i.f32()? as f64;
                let dim = i.usize()?;
                if dim != vocab.len() {
                    return Err(bad("weight dimension does not match the vocabulary"));
                }
                let weights = i.f32s(dim)?.into_iter().map(f64::from).collect();
                models.push(LinearModel {
                    weights,
                    bias,
                    loss,
                    hyper,
                    seed,
                    loss_history: Vec::new(),
                });
            }
            Body::Linear { vocab, models }
        }
        ModelKind::Fasttext => {
            let n = i.usize()?;
            let mut models = Vec::with_capacity(n.min(64));
            for _ in 0..n {
                let params = FastTextParams {
                    dim: i.usize()?,
                    min_n: i.usize()?,
                    max_n: i.usize()?,
                    buckets: i.u32()?,
                    epochs: i.u64()? as usize,
                    learning_rate: i.f64()?,
                    min_count: i.u64()?,
                };
                if params.dim == 0 || params.buckets == 0 || params.min_n == 0 || params.min_n > params.max_n {
                    return Err(bad("invalid subword parameters"));
                }
                let seed = i.u64()?;
                let m_labels = i.labels()?;
                let words = i.vocab()?;
                let rows = i.usize()?;
                let trained_rows = (0..rows).map(|_| i.u32()).collect::<Result<Vec<u32>>>()?;
                if trained_rows.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad("embedding rows are not sorted"));
                }
                let table = i.f32s(rows * params.dim)?;
                let output = i.f32s(m_labels.len() * params.dim)?;
                let bias = i.f32s(m_labels.len())?;
                models.push(FastTextModel {
                    params,
                    seed,
                    labels: m_labels,
                    words,
                    trained_rows,
                    table,
                    output,
                    bias,
                });
            }
            Body::FastText(models)
        }
    };
    let mut rest = [0u8; 1];
    if i.0.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes after model"));
    }
    Ok(Classifier { kind, task, labels, body })
}
