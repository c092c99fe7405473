//! Conditional frequency table: an order-1 model estimated by counting
//! symbol bigrams. Ignores conditioning; serves as a cheap baseline and a
//! debugging strategy for the coding chain.

use super::{ConditionalModel, ModelError, ModelSession, SymbolDistribution};
use crate::signal::mulaw;

#[derive(Debug, Clone)]
pub struct FreqTableModel {
    rows: Vec<SymbolDistribution>,
}

impl FreqTableModel {
    /// Counts transitions in the given symbol streams. Contexts that never
    /// occur fall back to the uniform distribution.
    pub fn fit(streams: &[&[u8]]) -> Self {
        let mut counts = vec![[0u64; 256]; 256];
        for stream in streams {
            let mut prev = mulaw::ZERO_CODE;
            for &s in *stream {
                counts[prev as usize][s as usize] += 1;
                prev = s;
            }
        }
        let rows = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    SymbolDistribution::uniform()
                } else {
                    let mut raw = [0.0f64; 256];
                    for (w, &c) in raw.iter_mut().zip(row) {
                        *w = c as f64;
                    }
                    SymbolDistribution::from_weights(&raw)
                }
            })
            .collect();
        Self { rows }
    }

    pub fn parse_params(bytes: &[u8]) -> Option<Self> {
        let mut off = 0usize;
        let mut rows = Vec::with_capacity(256);
        for _ in 0..256 {
            let mut probs = [0.0f64; 256];
            for p in probs.iter_mut() {
                *p = super::oracle::read_f64(bytes, &mut off)?;
            }
            rows.push(SymbolDistribution { probs });
        }
        Some(Self { rows })
    }
}

struct FreqTableSession<'a> {
    model: &'a FreqTableModel,
    prev: u8,
}

impl ModelSession for FreqTableSession<'_> {
    fn next_distribution(&mut self, _theta: &[f64]) -> Result<SymbolDistribution, ModelError> {
        Ok(self.model.rows[self.prev as usize].clone())
    }

    fn advance(&mut self, symbol: u8, _theta: &[f64]) {
        self.prev = symbol;
    }
}

impl ConditionalModel for FreqTableModel {
    fn kind(&self) -> &'static str {
        "freq-table"
    }

    fn conditioning_dim(&self) -> usize {
        0
    }

    fn receptive_field(&self) -> usize {
        1
    }

    fn start_session(&self) -> Box<dyn ModelSession + '_> {
        Box::new(FreqTableSession { model: self, prev: mulaw::ZERO_CODE })
    }

    fn write_params(&self, out: &mut Vec<u8>) {
        for row in &self.rows {
            for &p in row.probs() {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
    }
}
