//! Name-indexed registry of model implementations. Weights files carry a
//! kind name; loading dispatches through this table, and the training CLI
//! selects its strategy the same way.

use super::freq_table::FreqTableModel;
use super::gated_conv::GatedConvModel;
use super::oracle::OracleModel;
use super::ConditionalModel;

type ParseFn = fn(&[u8]) -> Option<Box<dyn ConditionalModel>>;

pub struct ModelEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub parse: ParseFn,
}

fn parse_gated_conv(bytes: &[u8]) -> Option<Box<dyn ConditionalModel>> {
    GatedConvModel::parse_params(bytes).map(|m| Box::new(m) as Box<dyn ConditionalModel>)
}

fn parse_freq_table(bytes: &[u8]) -> Option<Box<dyn ConditionalModel>> {
    FreqTableModel::parse_params(bytes).map(|m| Box::new(m) as Box<dyn ConditionalModel>)
}

fn parse_oracle(bytes: &[u8]) -> Option<Box<dyn ConditionalModel>> {
    OracleModel::parse_params(bytes).map(|m| Box::new(m) as Box<dyn ConditionalModel>)
}

pub static ENTRIES: &[ModelEntry] = &[
    ModelEntry {
        name: "gated-conv",
        summary: "gated dilated-convolution network (trainable)",
        parse: parse_gated_conv,
    },
    ModelEntry {
        name: "freq-table",
        summary: "order-1 conditional frequency table (counted)",
        parse: parse_freq_table,
    },
    ModelEntry {
        name: "oracle",
        summary: "analytically specified synthetic model",
        parse: parse_oracle,
    },
];

pub fn parser_for(kind: &str) -> Option<ParseFn> {
    ENTRIES.iter().find(|e| e.name == kind).map(|e| e.parse)
}

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::weights::{load_model, save_model};

    #[test]
    fn every_registered_kind_round_trips() {
        let models: Vec<Box<dyn ConditionalModel>> = vec![
            Box::new(GatedConvModel::init(
                crate::model::gated_conv::GatedConvConfig::micro(4),
                3,
            )),
            Box::new(FreqTableModel::fit(&[&[1, 2, 3, 1, 2, 3]])),
            Box::new(OracleModel::Uniform),
            Box::new(OracleModel::PointMass(9)),
            Box::new(OracleModel::markov1(
                &[10, 20],
                &[vec![0.5, 0.5], vec![0.1, 0.9]],
            )),
        ];
        for m in &models {
            assert!(names().contains(&m.kind()));
            let bytes = save_model(m.as_ref());
            let loaded = load_model(&bytes).unwrap();
            assert_eq!(loaded.kind(), m.kind());
            assert_eq!(save_model(loaded.as_ref()), bytes);
        }
    }

    #[test]
    fn unknown_kind_is_not_found() {
        assert!(parser_for("spline-quilt").is_none());
    }
}
