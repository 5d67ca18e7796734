//! The three subnetworks: layout organization, writing characteristics,
//! and text semantics. Each exposes an `init_params` step that declares
//! its parameters in a store and a `forward` step that builds graph nodes
//! from a binding of those parameters.

pub mod layout;
pub mod text;
pub mod writing;

#[derive(Debug, thiserror::Error)]
pub enum SubnetError {
    #[error("article has no blocks")]
    EmptyBlocks,
    #[error("article has no sentences")]
    EmptySentences,
    #[error("category {id} outside embedding table of {table} rows")]
    CategoryRange { id: usize, table: usize },
}
