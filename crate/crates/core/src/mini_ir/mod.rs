//! The MiniIR modeled-program language: text format, in-memory
//! representation, and validation.

mod ast;
mod parse;
mod print;
mod validate;

pub use ast::*;
pub use parse::parse_program;
pub use print::print_program;
pub use validate::validate;
