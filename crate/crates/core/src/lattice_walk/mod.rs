//! Finitely supported lattice step laws, their moments and spans, frames
//! aligned with a target direction, and exponential tilting.

mod frame;
mod law;
mod text;
mod tilt;

pub use frame::{mean_decompose, BasisFrame};
pub use law::{validate_step_law, Atom, Span, StepLaw};
pub use text::{format_exact_law, format_float_law, named_law, parse_step_law, ParsedLaw, NAMED_LAWS};
pub use tilt::{solve_tilt, TiltParameter};

pub(crate) use frame::norm_i;
