//! Scores a few hand-written hypotheses and prints the report as text and
//! JSON.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use pts::metrics::{plan_f1, EvalReport};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn main() -> pts::Result<()> {
    let refs = vec![
        toks("sean macias is a lawyer ."),
        toks("thaila ayalia is an actress and model ."),
        toks("dave green is a former american football punter ."),
    ];
    let hyps = vec![
        toks("sean macias is a lawyer ."),
        toks("thaila ayalia is an an actress model ."),
        toks("dave green is a american football football punter"),
    ];
    let report = EvalReport::evaluate(&hyps, &refs)?;
    print!("{}", report.to_text());
    println!("{}", report.to_json());

    let gold_plans = vec![toks("sean macias lawyer"), toks("thaila ayalia actress model")];
    let predicted = vec![toks("sean sean lawyer"), toks("thaila ayalia actress model")];
    println!("plan F1: {:.4}", plan_f1(&predicted, &gold_plans)?);
    Ok(())
}
