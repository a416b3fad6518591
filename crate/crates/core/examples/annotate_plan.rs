//! Linearizes a table and annotates the content plan of its description.
//!
//! ```text
//! cargo run --example annotate_plan
//! ```

use pts::corpus::{annotate_plan, linearize_table, regroup, tokenize, Stopwords};

fn main() -> pts::Result<()> {
    let stopwords = Stopwords::english();
    let table = [
        ("name", vec!["thaila", "ayalia"]),
        ("occupation", vec!["actress", "model"]),
        ("birth_place", vec!["recife", "brazil"]),
    ];
    let records = linearize_table(&table)?;
    for r in &records {
        println!("({}, {}, {}, {})", r.value_token, r.key_token, r.pos_fwd, r.pos_bwd);
    }
    assert_eq!(regroup(&records).len(), table.len());

    for text in [
        "thaila ayalia is an actress and model .",
        "thaila ayalia -lrb- born in recife , brazil -rrb- is a brazilian actress .",
        "ayalia thaila , model , model .",
    ] {
        let description = tokenize(text);
        let (tokens, pointers) = annotate_plan(&records, &description, &stopwords);
        println!("\n{text}\n  plan {tokens:?}\n  pointers {pointers:?}");
    }
    Ok(())
}
