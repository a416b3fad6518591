//! Table encoder: record embeddings and contextual memory.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::corpus::vocab::PAD;
use crate::corpus::Record;
use crate::error::{PtsError, Result};
use crate::model::{EncodedRecord, Model};
use crate::nnet::Tape;

/// Encoder output for one table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableMemory {
    /// `K × d_model` contextual states.
    pub states: Array2<f32>,
    /// `K × d_model` record embeddings before the encoder stack.
    pub record_embeddings: Array2<f32>,
}

impl TableMemory {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }
}

/// Embedding of a single record.
pub fn embed_record(model: &Model, record: &Record) -> Array1<f32> {
    let mut tape = Tape::new(&model.params);
    let e = model.net.embed_records(&mut tape, &[model.encode_record(record)]);
    tape.value(e).row(0).to_owned()
}

fn check_size(model: &Model, records: usize) -> Result<()> {
    if records == 0 {
        return Err(PtsError::EmptyTable);
    }
    let limit = model.config().max_records;
    if records > limit {
        return Err(PtsError::TableTooLarge { records, limit });
    }
    Ok(())
}

fn encode_ids(model: &Model, ids: &[EncodedRecord], mask: Option<&[bool]>) -> Result<TableMemory> {
    let mut tape = Tape::new(&model.params);
    let emb = model.net.embed_records(&mut tape, ids);
    let states = model.net.encode(&mut tape, emb, mask)?;
    Ok(TableMemory {
        states: tape.value(states).clone(),
        record_embeddings: tape.value(emb).clone(),
    })
}

pub fn encode_table(model: &Model, records: &[Record]) -> Result<TableMemory> {
    check_size(model, records.len())?;
    let ids: Vec<EncodedRecord> = records.iter().map(|r| model.encode_record(r)).collect();
    encode_ids(model, &ids, None)
}

/// Encodes several tables padded to a common length; padding rows are
/// masked out of attention and stripped from the results.
pub fn encode_batch(model: &Model, tables: &[&[Record]]) -> Result<Vec<TableMemory>> {
    for t in tables {
        check_size(model, t.len())?;
    }
    let width = tables.iter().map(|t| t.len()).max().unwrap_or(0);
    let pad = EncodedRecord {
        value: PAD,
        key: PAD,
        pos_fwd: 1,
        pos_bwd: 1,
    };
    tables
        .par_iter()
        .map(|t| {
            let mut ids: Vec<EncodedRecord> = t.iter().map(|r| model.encode_record(r)).collect();
            ids.resize(width, pad);
            let mask: Vec<bool> = (0..width).map(|i| i >= t.len()).collect();
            let mut mem = encode_ids(model, &ids, Some(&mask))?;
            mem.states = mem.states.slice(ndarray::s![..t.len(), ..]).to_owned();
            mem.record_embeddings = mem.record_embeddings.slice(ndarray::s![..t.len(), ..]).to_owned();
            Ok(mem)
        })
        .collect()
}
