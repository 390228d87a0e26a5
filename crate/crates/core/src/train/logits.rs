use std::fmt::Write as _;

use super::{LabeledExample, TrainError};
use crate::probe::ProberEnsemble;

pub const LOGIT_CSV_HEADER: &str = "layer,logit_call,logit_pass,y,with_retrieval";

/// CSV of eval-mode logits: for each example one row per ensemble layer, then
/// a row with `layer = sum` holding the ensemble sums.
pub fn dump_logits(
    ensemble: &ProberEnsemble,
    examples: &[LabeledExample],
) -> Result<String, TrainError> {
    let mut out = String::new();
    writeln!(out, "{LOGIT_CSV_HEADER}").unwrap();
    for e in examples {
        let decision = ensemble.decide(&e.pooled)?;
        for (layer, [call, pass]) in &decision.layer_logits {
            writeln!(out, "{layer},{call:?},{pass:?},{},{}", e.y, e.with_retrieval).unwrap();
        }
        writeln!(
            out,
            "sum,{:?},{:?},{},{}",
            decision.sum_call, decision.sum_pass, e.y, e.with_retrieval
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::probe::ProberParams;

    #[test]
    fn row_count_and_header() {
        let mut a = ProberParams::zeros(6, 2, 1, 0.0);
        a.b2 = [1.0, 0.0];
        let mut b = ProberParams::zeros(8, 2, 1, 0.0);
        b.b2 = [0.5, 2.0];
        let ens = ProberEnsemble::new(BTreeMap::from([(6, a), (8, b)]), 0.0).unwrap();
        let ex = |y| LabeledExample {
            question_id: String::new(),
            pooled: BTreeMap::from([(6, vec![0.0, 0.0]), (8, vec![0.0, 0.0])]),
            y,
            with_retrieval: y == 0,
        };
        let csv = dump_logits(&ens, &[ex(0), ex(1)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "layer,logit_call,logit_pass,y,with_retrieval");
        assert_eq!(lines.len(), 1 + 4 + 2);
        assert_eq!(lines[1], "6,1.0,0.0,0,true");
        assert_eq!(lines[3], "sum,1.5,2.0,0,true");
        assert_eq!(lines.iter().filter(|l| l.starts_with("sum,")).count(), 2);
    }
}
