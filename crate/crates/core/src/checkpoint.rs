//! Versioned text format for trained weights.
//!
//! ```text
//! snn-stdp-weights 1 layers=784,200,10 blocks=input>hidden,hidden>output,output>hidden kernel=sin:20 rule=windowed:100 sign=post-pre
//! input>hidden 0.0123 0.0441 ...
//! hidden>output ...
//! output>hidden ...
//! ```
//!
//! Each block line lists the matrix row-major (one row per target neuron).
//! Values are written in the shortest form that parses back to the same
//! `f64`, so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{Connection, Topology};
use crate::stdp::StdpRule;
use crate::weights::{Block, Matrix, WeightStore};

pub const MAGIC: &str = "snn-stdp-weights";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub topology: Topology,
    pub rule: StdpRule,
    pub weights: WeightStore,
}

pub fn to_string(topology: &Topology, rule: &StdpRule, weights: &WeightStore) -> Result<String> {
    if !weights.matches(topology) {
        return Err(Error::contract("weights do not match the topology"));
    }
    let [a, b, c] = topology.sizes();
    let blocks: Vec<String> = topology.connections().iter().map(|c| c.to_string()).collect();
    let mut out = format!(
        "{MAGIC} {VERSION} layers={a},{b},{c} blocks={} kernel={} rule={} sign={}\n",
        blocks.join(","),
        rule.kernel,
        rule.pairing,
        rule.sign
    );
    for block in weights.blocks() {
        out.push_str(&block.connection.to_string());
        for w in block.matrix.as_slice() {
            write!(out, " {w}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn from_str(text: &str) -> Result<Checkpoint> {
    // every line is newline-terminated, which catches a cut inside the last number
    if !text.ends_with('\n') {
        return Err(Error::format("checkpoint is truncated"));
    }
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty checkpoint"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(Error::format("not a weight checkpoint"));
    }
    match fields.next().map(str::parse::<u32>) {
        Some(Ok(VERSION)) => {}
        other => return Err(Error::format(format!("unsupported checkpoint version {other:?}"))),
    }
    let mut layers = None;
    let mut blocks = None;
    let mut kernel = None;
    let mut pairing = None;
    let mut sign = None;
    for field in fields {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::format(format!("bad header field `{field}`")))?;
        match key {
            "layers" => {
                let sizes = value
                    .split(',')
                    .map(|s| s.parse::<usize>().map_err(|_| Error::format(format!("bad layer size `{s}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let sizes: [usize; 3] = sizes.try_into().map_err(|_| Error::format("expected three layer sizes"))?;
                layers = Some(sizes);
            }
            "blocks" => blocks = Some(value.split(',').map(str::parse).collect::<Result<Vec<Connection>>>()?),
            "kernel" => kernel = Some(value.parse()?),
            "rule" => pairing = Some(value.parse()?),
            "sign" => sign = Some(value.parse()?),
            other => return Err(Error::format(format!("unknown header field `{other}`"))),
        }
    }
    let missing = |name: &str| Error::format(format!("header lacks `{name}`"));
    let topology =
        Topology::with_connections(layers.ok_or_else(|| missing("layers"))?, blocks.ok_or_else(|| missing("blocks"))?)
            .map_err(|e| Error::format(e.to_string()))?;
    let rule = StdpRule {
        kernel: kernel.ok_or_else(|| missing("kernel"))?,
        pairing: pairing.ok_or_else(|| missing("rule"))?,
        sign: sign.ok_or_else(|| missing("sign"))?,
    };

    let mut parsed = Vec::new();
    for &connection in topology.connections() {
        let line = lines.next().ok_or_else(|| Error::format(format!("checkpoint ends before block {connection}")))?;
        let mut items = line.split_whitespace();
        let name = items.next().unwrap_or_default();
        if name != connection.to_string() {
            return Err(Error::format(format!("expected block {connection}, found `{name}`")));
        }
        let values = items
            .map(|s| match s.parse::<f64>() {
                Ok(w) if w.is_finite() => Ok(w),
                _ => Err(Error::format(format!("bad weight `{s}` in {connection}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let (rows, cols) = (topology.size(connection.target), topology.size(connection.source));
        if values.len() != rows * cols {
            return Err(Error::format(format!(
                "block {connection} has {} weights, expected {}",
                values.len(),
                rows * cols
            )));
        }
        parsed.push(Block { connection, matrix: Matrix::from_vec(rows, cols, values)? });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::format("trailing content after the last block"));
    }
    let weights = WeightStore::from_blocks(&topology, parsed)?;
    Ok(Checkpoint { topology, rule, weights })
}

/// Write atomically: the file only appears once fully written.
pub fn save(path: &Path, topology: &Topology, rule: &StdpRule, weights: &WeightStore) -> Result<()> {
    let text = to_string(topology, rule, weights)?;
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    from_str(&fs::read_to_string(path)?)
}
