//! Text and binary file formats.
//!
//! | kind | header | body |
//! |------|--------|------|
//! | generator | `M=<int>` | `M+1` rows of `M+1` reals, `L†[to][from]` |
//! | network | `MLP <sizes>` | little-endian `f64` parameters |
//! | dataset | `BDDATA M=<int> N=<int>` | one item per line, optional `\| weight` |
//! | samples | `BDSAMPLES M=<int> N=<int> COUNT=<int>` | one sample per line |

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use blackout_core::ctmc::Generator;
use blackout_core::predictor::{DiscreteDataset, MlpParams};
use blackout_core::StateSpace;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] blackout_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines<R: BufRead>(r: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Parse `KEY=<int>` fields of a header line after its tag.
fn header_fields(line: usize, text: &str, tag: Option<&str>, keys: &[&str]) -> Result<Vec<u64>> {
    let mut words = text.split_whitespace();
    if let Some(tag) = tag {
        if words.next() != Some(tag) {
            return Err(parse_err(line, format!("expected header starting with {tag}")));
        }
    }
    let mut values = Vec::with_capacity(keys.len());
    for key in keys {
        let word = words.next().ok_or_else(|| parse_err(line, format!("missing {key}=")))?;
        let value = word
            .strip_prefix(key)
            .and_then(|w| w.strip_prefix('='))
            .ok_or_else(|| parse_err(line, format!("expected {key}=<int>, got {word}")))?;
        values.push(value.parse().map_err(|_| parse_err(line, format!("bad integer in {word}")))?);
    }
    if let Some(extra) = words.next() {
        return Err(parse_err(line, format!("unexpected header field {extra}")));
    }
    Ok(values)
}

fn parse_u32s(line: usize, text: &str, max: u32) -> Result<Vec<u32>> {
    text.split_whitespace()
        .map(|w| {
            let v: u32 = w.parse().map_err(|_| parse_err(line, format!("bad label {w}")))?;
            if v > max {
                return Err(parse_err(line, format!("label {v} exceeds M={max}")));
            }
            Ok(v)
        })
        .collect()
}

fn to_u32(line: usize, v: u64) -> Result<u32> {
    u32::try_from(v).map_err(|_| parse_err(line, "value out of range"))
}

pub fn read_generator<R: BufRead>(r: R) -> Result<Generator> {
    let lines = content_lines(r)?;
    let (hl, header) = lines.first().ok_or_else(|| parse_err(1, "empty generator file"))?;
    let m = to_u32(*hl, header_fields(*hl, header, None, &["M"])?[0])?;
    let size = m as usize + 1;
    if lines.len() != size + 1 {
        return Err(parse_err(*hl, format!("expected {size} matrix rows, found {}", lines.len() - 1)));
    }
    let mut rows = Vec::with_capacity(size);
    for (line, text) in &lines[1..] {
        let row = text
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| parse_err(*line, format!("bad real {w}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != size {
            return Err(parse_err(*line, format!("expected {size} entries, found {}", row.len())));
        }
        rows.push(row);
    }
    Ok(Generator::from_rows(&rows)?)
}

pub fn write_generator<W: Write>(mut w: W, g: &Generator) -> io::Result<()> {
    writeln!(w, "M={}", g.max_label())?;
    for row in g.matrix().rows() {
        let words: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", words.join(" "))?;
    }
    Ok(())
}

pub fn read_mlp<R: Read>(r: R) -> Result<MlpParams> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut words = header.split_whitespace();
    if words.next() != Some("MLP") {
        return Err(parse_err(1, "expected header starting with MLP"));
    }
    let sizes = words
        .map(|w| w.parse::<usize>().map_err(|_| parse_err(1, format!("bad layer size {w}"))))
        .collect::<Result<Vec<_>>>()?;
    let expected = MlpParams::zeros(&sizes)?.num_params();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * expected {
        return Err(parse_err(2, format!("expected {} parameter bytes, found {}", 8 * expected, bytes.len())));
    }
    let flat: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(MlpParams::from_flat(&sizes, &flat)?)
}

pub fn write_mlp<W: Write>(mut w: W, p: &MlpParams) -> io::Result<()> {
    let sizes: Vec<String> = p.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "MLP {}", sizes.join(" "))?;
    for v in p.to_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<DiscreteDataset> {
    let lines = content_lines(r)?;
    let (hl, header) = lines.first().ok_or_else(|| parse_err(1, "empty dataset file"))?;
    let f = header_fields(*hl, header, Some("BDDATA"), &["M", "N"])?;
    let space = StateSpace::new(to_u32(*hl, f[0])?, f[1] as usize)?;
    let mut items = Vec::new();
    let mut weights = Vec::new();
    let mut weighted = None;
    for (line, text) in &lines[1..] {
        let (labels, weight) = match text.split_once('|') {
            Some((l, w)) => {
                let w: f64 = w.trim().parse().map_err(|_| parse_err(*line, format!("bad weight {}", w.trim())))?;
                (l, Some(w))
            }
            None => (text.as_str(), None),
        };
        if *weighted.get_or_insert(weight.is_some()) != weight.is_some() {
            return Err(parse_err(*line, "either every item carries a weight or none does"));
        }
        let item = parse_u32s(*line, labels, space.max_label())?;
        if item.len() != space.dims() {
            return Err(parse_err(*line, format!("expected {} components, found {}", space.dims(), item.len())));
        }
        items.push(item);
        weights.extend(weight);
    }
    let weights = (weighted == Some(true)).then_some(weights);
    Ok(DiscreteDataset::new(space, items, weights)?)
}

pub fn write_dataset<W: Write>(mut w: W, ds: &DiscreteDataset) -> io::Result<()> {
    let sp = ds.space();
    writeln!(w, "BDDATA M={} N={}", sp.max_label(), sp.dims())?;
    for (item, weight) in ds.items().iter().zip(ds.weights()) {
        writeln!(w, "{} | {}", join(item), weight)?;
    }
    Ok(())
}

fn join(x: &[u32]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_samples<W: Write>(mut w: W, space: &StateSpace, samples: &[Vec<u32>]) -> io::Result<()> {
    writeln!(w, "BDSAMPLES M={} N={} COUNT={}", space.max_label(), space.dims(), samples.len())?;
    for x in samples {
        writeln!(w, "{}", join(x))?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R) -> Result<(StateSpace, Vec<Vec<u32>>)> {
    let lines = content_lines(r)?;
    let (hl, header) = lines.first().ok_or_else(|| parse_err(1, "empty sample file"))?;
    let f = header_fields(*hl, header, Some("BDSAMPLES"), &["M", "N", "COUNT"])?;
    let space = StateSpace::new(to_u32(*hl, f[0])?, f[1] as usize)?;
    if lines.len() - 1 != f[2] as usize {
        return Err(parse_err(*hl, format!("header promises {} samples, found {}", f[2], lines.len() - 1)));
    }
    let samples = lines[1..]
        .iter()
        .map(|(line, text)| {
            let x = parse_u32s(*line, text, space.max_label())?;
            if x.len() != space.dims() {
                return Err(parse_err(*line, format!("expected {} components, found {}", space.dims(), x.len())));
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((space, samples))
}

/// Side length of a square image with `n` pixels.
pub fn square_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// One sample as an ASCII PGM (P2) image.
pub fn write_pgm<W: Write>(mut w: W, space: &StateSpace, sample: &[u32]) -> Result<()> {
    let side = square_side(space.dims())
        .ok_or_else(|| parse_err(0, format!("N={} is not a square", space.dims())))?;
    space.check_state(sample)?;
    writeln!(w, "P2\n{side} {side}\n{}", space.max_label())?;
    for row in sample.chunks(side) {
        writeln!(w, "{}", join(row))?;
    }
    Ok(())
}

/// CSV with a fixed header row.
pub fn write_csv<W: Write, S: AsRef<str>>(w: W, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_generator(path: &Path) -> Result<Generator> {
    read_generator(BufReader::new(File::open(path)?))
}

pub fn load_dataset(path: &Path) -> Result<DiscreteDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn load_mlp(path: &Path) -> Result<MlpParams> {
    read_mlp(File::open(path)?)
}

pub fn load_samples(path: &Path) -> Result<(StateSpace, Vec<Vec<u32>>)> {
    read_samples(BufReader::new(File::open(path)?))
}

/// Create `path` and hand a buffered writer to `f`.
pub fn save<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
