//! Model files.
//!
//! ```text
//! SLOTFILL-CNN v1
//! embed_dim=100
//! ...                       every NetConfig field as key=value
//! unk_threshold=K
//! vocab_size=N              always the last header key
//! <N words, one per line, in id order starting at the first non-reserved id>
//! BINARY
//! <little-endian f32 parameters in Params::tensors order>
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{Model, NetConfig, NetError, Params, Variant};
use crate::corpus::Vocabulary;

pub const MAGIC: &str = "SLOTFILL-CNN";
const VERSION: &str = "v1";
const BINARY_MARKER: &str = "BINARY";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a model file: expected `{MAGIC} {VERSION}`, found {found:?}")]
    BadMagic { found: String },
    #[error("unsupported model file version {found:?}, expected {VERSION}")]
    UnsupportedVersion { found: String },
    #[error("model header line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("model file ends inside the header")]
    TruncatedHeader,
    #[error("corrupt model: payload has {found} bytes, header requires {expected}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("corrupt model: {found} payload bytes, header requires only {expected}")]
    TrailingPayload { expected: usize, found: usize },
    #[error("corrupt model: non-finite parameter")]
    NonFinite,
    #[error("corrupt model: {0}")]
    Inconsistent(NetError),
}

impl From<NetError> for ModelFileError {
    fn from(e: NetError) -> Self {
        ModelFileError::Inconsistent(e)
    }
}

pub fn write_model<W: Write>(model: &Model<f32>, out: &mut W) -> io::Result<()> {
    let c = model.config();
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "embed_dim={}", c.embed_dim)?;
    writeln!(out, "feature_dim={}", c.feature_dim)?;
    writeln!(out, "context_length={}", c.context_length)?;
    writeln!(out, "filter_width={}", c.filter_width)?;
    writeln!(out, "num_filters={}", c.num_filters)?;
    writeln!(out, "num_labels={}", c.num_labels)?;
    writeln!(out, "variant={}", c.variant)?;
    writeln!(out, "use_features={}", c.use_features)?;
    writeln!(out, "seed={}", c.seed)?;
    writeln!(out, "learning_rate={}", c.learning_rate)?;
    writeln!(out, "epochs={}", c.epochs)?;
    writeln!(out, "batch_size={}", c.batch_size)?;
    writeln!(out, "unk_threshold={}", model.vocab().unk_threshold())?;
    writeln!(out, "vocab_size={}", model.vocab().len())?;
    for word in model.vocab().words() {
        writeln!(out, "{word}")?;
    }
    writeln!(out, "{BINARY_MARKER}")?;
    let mut bytes = Vec::with_capacity(model.params().len() * 4);
    for tensor in model.params().tensors() {
        for x in tensor {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&bytes)
}

pub fn save_model(model: &Model<f32>, path: &Path) -> io::Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    fs::write(path, buf)
}

pub fn load_model(path: &Path) -> Result<Model<f32>, ModelFileError> {
    read_model(&fs::read(path)?)
}

struct Lines<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, ModelFileError> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(ModelFileError::TruncatedHeader)?;
        self.pos += end + 1;
        self.line += 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| ModelFileError::Header {
            line: self.line,
            message: "invalid UTF-8".into(),
        })
    }
}

fn header_value<T: std::str::FromStr>(
    fields: &[(usize, String, String)],
    key: &str,
) -> Result<T, ModelFileError> {
    let (line, _, value) =
        fields
            .iter()
            .find(|(_, k, _)| k == key)
            .ok_or_else(|| ModelFileError::Header {
                line: 0,
                message: format!("missing key {key:?}"),
            })?;
    value.parse().map_err(|_| ModelFileError::Header {
        line: *line,
        message: format!("bad value {value:?} for {key}"),
    })
}

pub fn read_model(bytes: &[u8]) -> Result<Model<f32>, ModelFileError> {
    let mut lines = Lines {
        bytes,
        pos: 0,
        line: 0,
    };
    let first = match lines.next() {
        Ok(line) => line,
        Err(ModelFileError::TruncatedHeader) if !bytes.starts_with(MAGIC.as_bytes()) => {
            return Err(ModelFileError::BadMagic {
                found: String::from_utf8_lossy(&bytes[..bytes.len().min(32)]).into_owned(),
            })
        }
        Err(e) => return Err(e),
    };
    match first.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, other)) => {
            return Err(ModelFileError::UnsupportedVersion {
                found: other.to_string(),
            })
        }
        _ => {
            return Err(ModelFileError::BadMagic {
                found: first.to_string(),
            })
        }
    }

    const KEYS: [&str; 14] = [
        "embed_dim",
        "feature_dim",
        "context_length",
        "filter_width",
        "num_filters",
        "num_labels",
        "variant",
        "use_features",
        "seed",
        "learning_rate",
        "epochs",
        "batch_size",
        "unk_threshold",
        "vocab_size",
    ];
    let mut fields: Vec<(usize, String, String)> = Vec::new();
    loop {
        let line = lines.next()?;
        let (key, value) = line.split_once('=').ok_or_else(|| ModelFileError::Header {
            line: lines.line,
            message: format!("expected key=value, found {line:?}"),
        })?;
        if !KEYS.contains(&key) {
            return Err(ModelFileError::Header {
                line: lines.line,
                message: format!("unknown key {key:?}"),
            });
        }
        if fields.iter().any(|(_, k, _)| k == key) {
            return Err(ModelFileError::Header {
                line: lines.line,
                message: format!("duplicate key {key:?}"),
            });
        }
        fields.push((lines.line, key.to_string(), value.to_string()));
        if key == "vocab_size" {
            break;
        }
    }

    let config = NetConfig {
        embed_dim: header_value(&fields, "embed_dim")?,
        feature_dim: header_value(&fields, "feature_dim")?,
        context_length: header_value(&fields, "context_length")?,
        filter_width: header_value(&fields, "filter_width")?,
        num_filters: header_value(&fields, "num_filters")?,
        num_labels: header_value(&fields, "num_labels")?,
        variant: header_value::<Variant>(&fields, "variant")?,
        use_features: header_value(&fields, "use_features")?,
        seed: header_value(&fields, "seed")?,
        learning_rate: header_value(&fields, "learning_rate")?,
        epochs: header_value(&fields, "epochs")?,
        batch_size: header_value(&fields, "batch_size")?,
    };
    config.validate()?;
    let vocab_size: usize = header_value(&fields, "vocab_size")?;

    let mut words = Vec::with_capacity(vocab_size.min(1 << 20));
    for _ in 0..vocab_size {
        let word = lines.next()?;
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(ModelFileError::Header {
                line: lines.line,
                message: format!("bad vocabulary entry {word:?}"),
            });
        }
        words.push(word.to_string());
    }
    let marker = lines.next()?;
    if marker != BINARY_MARKER {
        return Err(ModelFileError::Header {
            line: lines.line,
            message: format!("expected {BINARY_MARKER}, found {marker:?}"),
        });
    }

    let vocab = Vocabulary::with_threshold(words, header_value(&fields, "unk_threshold")?);
    let mut params = Params::<f32>::zeros(&config, vocab.total_ids());
    let payload = &bytes[lines.pos..];
    let expected = params.len() * 4;
    if payload.len() < expected {
        return Err(ModelFileError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(ModelFileError::TrailingPayload {
            expected,
            found: payload.len(),
        });
    }
    let mut chunks = payload.chunks_exact(4);
    for tensor in params.tensors_mut() {
        for (x, chunk) in tensor.iter_mut().zip(&mut chunks) {
            *x = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
    }
    if !params.is_finite() {
        return Err(ModelFileError::NonFinite);
    }
    Ok(Model::from_parts(config, vocab, params)?)
}
