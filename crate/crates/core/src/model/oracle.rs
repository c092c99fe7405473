//! Synthetic models with analytically known statistics, used to verify the
//! rate estimators and the coding chain against closed-form values.

use super::{ConditionalModel, ModelError, ModelSession, SymbolDistribution};
use crate::signal::mulaw;

/// A model whose conditional distribution is fixed analytically.
#[derive(Debug, Clone)]
pub enum OracleModel {
    /// Uniform over the full alphabet regardless of history.
    Uniform,
    /// Always the (floored) point mass on one code.
    PointMass(u8),
    /// Order-1 Markov chain: the distribution depends only on the previous
    /// symbol. Rows are stored for all 256 previous-symbol values.
    Markov { rows: Vec<SymbolDistribution> },
    /// Conditioning-driven switch between two fixed distributions: uses
    /// `below` while `theta[component] < threshold`, `above` otherwise.
    ThetaSwitch {
        component: usize,
        threshold: f64,
        below: SymbolDistribution,
        above: SymbolDistribution,
    },
}

impl OracleModel {
    /// Builds an order-1 chain over `alphabet` with the given transition
    /// matrix (`transition[i][j]` = P(alphabet[j] | alphabet[i])). Rows for
    /// symbols outside the alphabet fall back to uniform over the alphabet,
    /// which only affects the first step after a cold start.
    pub fn markov1(alphabet: &[u8], transition: &[Vec<f64>]) -> Self {
        assert_eq!(alphabet.len(), transition.len());
        let mut fallback_raw = [0.0f64; 256];
        for &s in alphabet {
            fallback_raw[s as usize] = 1.0;
        }
        let fallback = SymbolDistribution::from_weights(&fallback_raw);
        let mut rows = vec![fallback; 256];
        for (i, &prev) in alphabet.iter().enumerate() {
            let mut raw = [0.0f64; 256];
            for (j, &next) in alphabet.iter().enumerate() {
                raw[next as usize] = transition[i][j];
            }
            rows[prev as usize] = SymbolDistribution::from_weights(&raw);
        }
        OracleModel::Markov { rows }
    }

    /// The exact distribution the model emits after `prev` — the quantity
    /// closed-form entropy computations must use.
    pub fn row(&self, prev: u8) -> SymbolDistribution {
        match self {
            OracleModel::Uniform => SymbolDistribution::uniform(),
            OracleModel::PointMass(c) => SymbolDistribution::point_mass(*c),
            OracleModel::Markov { rows } => rows[prev as usize].clone(),
            OracleModel::ThetaSwitch { below, .. } => below.clone(),
        }
    }
}

struct OracleSession<'a> {
    model: &'a OracleModel,
    prev: u8,
}

impl ModelSession for OracleSession<'_> {
    fn next_distribution(&mut self, theta: &[f64]) -> Result<SymbolDistribution, ModelError> {
        Ok(match self.model {
            OracleModel::Uniform => SymbolDistribution::uniform(),
            OracleModel::PointMass(c) => SymbolDistribution::point_mass(*c),
            OracleModel::Markov { rows } => rows[self.prev as usize].clone(),
            OracleModel::ThetaSwitch { component, threshold, below, above } => {
                let v = theta.get(*component).copied().unwrap_or(0.0);
                if v < *threshold {
                    below.clone()
                } else {
                    above.clone()
                }
            }
        })
    }

    fn advance(&mut self, symbol: u8, _theta: &[f64]) {
        self.prev = symbol;
    }
}

impl ConditionalModel for OracleModel {
    fn kind(&self) -> &'static str {
        "oracle"
    }

    fn conditioning_dim(&self) -> usize {
        // Oracles accept any conditioning vector; the switch variant reads
        // one component if present.
        0
    }

    fn receptive_field(&self) -> usize {
        match self {
            OracleModel::Markov { .. } => 1,
            _ => 0,
        }
    }

    fn start_session(&self) -> Box<dyn ModelSession + '_> {
        Box::new(OracleSession { model: self, prev: mulaw::ZERO_CODE })
    }

    fn write_params(&self, out: &mut Vec<u8>) {
        match self {
            OracleModel::Uniform => out.push(0),
            OracleModel::PointMass(c) => {
                out.push(1);
                out.push(*c);
            }
            OracleModel::Markov { rows } => {
                out.push(2);
                for row in rows {
                    for &p in row.probs() {
                        out.extend_from_slice(&p.to_le_bytes());
                    }
                }
            }
            OracleModel::ThetaSwitch { component, threshold, below, above } => {
                out.push(3);
                out.extend_from_slice(&(*component as u32).to_le_bytes());
                out.extend_from_slice(&threshold.to_le_bytes());
                for &p in below.probs() {
                    out.extend_from_slice(&p.to_le_bytes());
                }
                for &p in above.probs() {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
        }
    }
}

pub(crate) fn read_f64(bytes: &[u8], off: &mut usize) -> Option<f64> {
    let v = bytes.get(*off..*off + 8)?;
    *off += 8;
    Some(f64::from_le_bytes(v.try_into().unwrap()))
}

fn read_dist(bytes: &[u8], off: &mut usize) -> Option<SymbolDistribution> {
    let mut probs = [0.0f64; 256];
    for p in probs.iter_mut() {
        *p = read_f64(bytes, off)?;
    }
    // Stored rows were floored before serialization; rebuild verbatim.
    Some(SymbolDistribution { probs })
}

impl OracleModel {
    pub fn parse_params(bytes: &[u8]) -> Option<Self> {
        let mut off = 0usize;
        let variant = *bytes.get(off)?;
        off += 1;
        match variant {
            0 => Some(OracleModel::Uniform),
            1 => Some(OracleModel::PointMass(*bytes.get(off)?)),
            2 => {
                let mut rows = Vec::with_capacity(256);
                for _ in 0..256 {
                    rows.push(read_dist(bytes, &mut off)?);
                }
                Some(OracleModel::Markov { rows })
            }
            3 => {
                let component =
                    u32::from_le_bytes(bytes.get(off..off + 4)?.try_into().unwrap()) as usize;
                off += 4;
                let threshold = read_f64(bytes, &mut off)?;
                let below = read_dist(bytes, &mut off)?;
                let above = read_dist(bytes, &mut off)?;
                Some(OracleModel::ThetaSwitch { component, threshold, below, above })
            }
            _ => None,
        }
    }
}
