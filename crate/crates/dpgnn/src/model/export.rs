//! Graph-embedding export for downstream visualization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{DpGnnModel, ModelError};
use crate::data::{make_batch, FoldSplit, GraphDataset};
use crate::scalar::Scalar;
use crate::tensor::{Mode, ParamStore, Tape};

const EXPORT_CHUNK: usize = 64;

/// Writes one CSV row per graph: id, label, fold role, and the graph
/// representation. Runs in eval mode, so the output is independent of the
/// chunking used here.
pub fn export_embeddings<T: Scalar>(
    model: &mut DpGnnModel<T>,
    store: &ParamStore<T>,
    ds: &GraphDataset,
    fold: &FoldSplit,
    path: &Path,
) -> Result<(), ModelError> {
    let io_err =
        |e: std::io::Error| ModelError::BadConfig(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);

    write!(out, "graph_id,label,role").map_err(io_err)?;
    for j in 0..model.config().hidden_dim {
        write!(out, ",h{j}").map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;

    let ids: Vec<usize> = (0..ds.len()).collect();
    for chunk in ids.chunks(EXPORT_CHUNK) {
        let batch = make_batch::<T>(ds, chunk)
            .map_err(|e| ModelError::BadConfig(e.to_string()))?;
        let mut tape = Tape::new();
        let output = model.forward(&mut tape, store, &batch, Mode::Eval)?;
        let reprs = tape.value(output.graph_reprs);
        for (slot, &id) in chunk.iter().enumerate() {
            let role = if fold.validation_ids.binary_search(&id).is_ok() {
                "validation"
            } else {
                "train"
            };
            write!(out, "{id},{},{role}", ds.graph(id).graph_label()).map_err(io_err)?;
            for &v in reprs.row(slot) {
                write!(out, ",{}", v.to_f64()).map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}
