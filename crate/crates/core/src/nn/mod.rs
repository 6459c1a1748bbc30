//! Dense numeric core: tensors, reverse-mode differentiation, layers and optimization.

pub mod embedding_file;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod tensor;

pub use graph::{Graph, Var};
pub use layers::{AdditiveAttention, BiLstm, Embedding, Linear, LstmCell, Mlp};
pub use optim::{clip_global_norm, Adam};
pub use tensor::{Gradients, Init, Param, ParamId, ParamStore, Tensor};
