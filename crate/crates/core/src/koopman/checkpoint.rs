use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dynamics::{header_value, parse_field, parse_header};
use crate::error::{Error, Result};

use super::mlp::Activation;
use super::model::{KoopmanModel, ModelConfig};
use super::operator::FormKind;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"KOOPCK01";

/// Writes a model checkpoint:
///
/// ```text
/// 8 bytes   magic "KOOPCK01"
/// u32 LE    header length H
/// H bytes   UTF-8 header, one `key=value` per line: state_dim,
///           encoding_dim, form, activation, seed, hidden (comma separated),
///           params (total scalar count)
/// payload   every parameter tensor as f64 little-endian, in the order
///           encoder weights, encoder biases, operator, decoder weights,
///           decoder biases
/// ```
pub fn save_checkpoint(model: &KoopmanModel, path: &Path) -> Result<()> {
    let c = &model.config;
    let hidden: Vec<String> = c.hidden_widths().iter().map(|w| w.to_string()).collect();
    let header = format!(
        "state_dim={}\nencoding_dim={}\nform={}\nactivation={}\nseed={}\nhidden={}\nparams={}\n",
        c.state_dim,
        c.encoding_dim,
        c.form,
        c.activation,
        c.seed,
        hidden.join(","),
        model.param_count()
    );
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(CHECKPOINT_MAGIC)?;
    write(&(header.len() as u32).to_le_bytes())?;
    write(header.as_bytes())?;
    for p in model.params() {
        for v in p.values() {
            write(&v.to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<KoopmanModel> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint file"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < hlen {
        return Err(Error::format(path, "truncated header"));
    }
    let text = std::str::from_utf8(&body[..hlen])
        .map_err(|_| Error::format(path, "header is not UTF-8"))?;
    let fields = parse_header(text, path)?;
    let form: FormKind = header_value(&fields, "form", path)?
        .parse()
        .map_err(|_| Error::format(path, "unknown operator form"))?;
    let activation: Activation = header_value(&fields, "activation", path)?
        .parse()
        .map_err(|_| Error::format(path, "unknown activation"))?;
    let hidden = header_value(&fields, "hidden", path)?
        .split(',')
        .map(|w| w.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::format(path, "bad hidden widths"))?;
    let config = ModelConfig {
        state_dim: parse_field(&fields, "state_dim", path)?,
        encoding_dim: parse_field(&fields, "encoding_dim", path)?,
        form,
        hidden: Some(hidden),
        activation,
        seed: parse_field(&fields, "seed", path)?,
    };
    let count: usize = parse_field(&fields, "params", path)?;
    let mut model = KoopmanModel::new(config).map_err(|e| Error::format(path, e.to_string()))?;
    let payload = &body[hlen..];
    if count != model.param_count() || payload.len() != count * 8 {
        return Err(Error::format(
            path,
            format!("payload has {} bytes, model needs {}", payload.len(), model.param_count() * 8),
        ));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for p in model.params_mut() {
        for v in p.values_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok(model)
}
