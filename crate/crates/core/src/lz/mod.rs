//! Lempel-Ziv coders and the block realization.

mod block;
mod lz78;
mod suffix;
mod window;

pub use block::BlockCoder;
pub use lz78::{lz78_parse, Lz78, Lz78Form, Phrase, PhraseParse};
pub use suffix::suffix_array;
pub use window::{window_parse, LzWindow, Triple, Window};
