//! Directed synaptic weights, one dense block per connection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{Connection, Layer, Topology};

/// Dense row-major matrix. Rows index the postsynaptic (target) neuron,
/// columns the presynaptic (source) neuron.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!("{} values do not fill a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// One connection block.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub connection: Connection,
    pub matrix: Matrix,
}

/// Uniform initialization range `[0, max]` for each kind of block.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightInit {
    pub input_hidden: f64,
    pub hidden_output: f64,
    pub output_hidden: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        Self { input_hidden: 0.003, hidden_output: 0.005, output_hidden: 0.002 }
    }
}

impl WeightInit {
    pub fn uniform(max: f64) -> Self {
        Self { input_hidden: max, hidden_output: max, output_hidden: max }
    }

    fn max_for(&self, c: Connection) -> f64 {
        match (c.source, c.target) {
            (Layer::Input, Layer::Hidden) => self.input_hidden,
            (Layer::Hidden, Layer::Output) => self.hidden_output,
            (Layer::Output, Layer::Hidden) => self.output_hidden,
            _ => self.input_hidden.max(self.hidden_output).max(self.output_hidden),
        }
    }
}

/// All synaptic weights of a network. `W_ij` and `W_ji` live in separate
/// blocks and never alias.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    blocks: Vec<Block>,
}

/// Accumulated STDP changes, shaped like the [`WeightStore`] they apply to.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightDelta {
    blocks: Vec<Block>,
}

fn zero_blocks(topology: &Topology) -> Vec<Block> {
    topology
        .connections()
        .iter()
        .map(|&c| Block { connection: c, matrix: Matrix::zeros(topology.size(c.target), topology.size(c.source)) })
        .collect()
}

impl WeightStore {
    pub fn zeros(topology: &Topology) -> Self {
        Self { blocks: zero_blocks(topology) }
    }

    /// Uniform random weights, reproducible from `seed`.
    pub fn random(topology: &Topology, init: &WeightInit, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::zeros(topology);
        for block in &mut store.blocks {
            let max = init.max_for(block.connection);
            for w in block.matrix.as_mut_slice() {
                *w = if max > 0.0 { rng.gen_range(0.0..=max) } else { 0.0 };
            }
        }
        store
    }

    pub fn from_blocks(topology: &Topology, blocks: Vec<Block>) -> Result<Self> {
        check_shape(topology, &blocks)?;
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn block(&self, connection: Connection) -> Option<&Matrix> {
        self.blocks.iter().find(|b| b.connection == connection).map(|b| &b.matrix)
    }

    pub fn block_mut(&mut self, connection: Connection) -> Option<&mut Matrix> {
        self.blocks.iter_mut().find(|b| b.connection == connection).map(|b| &mut b.matrix)
    }

    /// Whether this store has exactly the blocks and shapes of `topology`.
    pub fn matches(&self, topology: &Topology) -> bool {
        check_shape(topology, &self.blocks).is_ok()
    }
}

impl WeightDelta {
    pub fn zeros(topology: &Topology) -> Self {
        Self { blocks: zero_blocks(topology) }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn block(&self, connection: Connection) -> Option<&Matrix> {
        self.blocks.iter().find(|b| b.connection == connection).map(|b| &b.matrix)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.matrix.as_slice().iter().all(|&x| x == 0.0))
    }

    /// Entrywise sum, used to merge partial accumulations.
    pub fn add_assign(&mut self, other: &WeightDelta) -> Result<()> {
        if !same_layout(&self.blocks, &other.blocks) {
            return Err(Error::contract("weight delta shapes differ"));
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.matrix.as_mut_slice().iter_mut().zip(b.matrix.as_slice()) {
                *x += y;
            }
        }
        Ok(())
    }
}

fn same_layout(a: &[Block], b: &[Block]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.connection == y.connection && x.matrix.rows() == y.matrix.rows() && x.matrix.cols() == y.matrix.cols()
        })
}

fn check_shape(topology: &Topology, blocks: &[Block]) -> Result<()> {
    if !same_layout(blocks, &zero_blocks(topology)) {
        return Err(Error::contract("weight blocks do not match the topology"));
    }
    if blocks.iter().any(|b| b.matrix.as_slice().iter().any(|w| !w.is_finite())) {
        return Err(Error::contract("weights must be finite"));
    }
    Ok(())
}

/// `W <- W + alpha * dW`, optionally flooring the result at zero.
///
/// Entries whose delta is exactly zero are left untouched.
pub fn apply(weights: &mut WeightStore, delta: &WeightDelta, alpha: f64, clamp_nonneg: bool) -> Result<()> {
    if !same_layout(&weights.blocks, &delta.blocks) {
        return Err(Error::contract("weight delta does not match the weight store"));
    }
    if !alpha.is_finite() {
        return Err(Error::contract("learning rate must be finite"));
    }
    for (w, d) in weights.blocks.iter_mut().zip(&delta.blocks) {
        for (x, &dx) in w.matrix.as_mut_slice().iter_mut().zip(d.matrix.as_slice()) {
            if dx == 0.0 {
                continue;
            }
            *x += alpha * dx;
            if clamp_nonneg && *x < 0.0 {
                *x = 0.0;
            }
        }
    }
    Ok(())
}
