//! Dataset loaders, checkpoint persistence and embedding export.

mod checkpoint;
mod citation;
mod export;
mod text;
mod tu;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION, MANIFEST_FILE, PAYLOAD_FILE};
pub use citation::{load_edgelist_dataset, CitationDataset, SplitFiles};
pub use export::{read_embeddings, write_embeddings, EmbeddingHeader};
pub use tu::{load_tu_dataset, TuDataset};
