//! Fixed-domain penalization for non-smooth shape and topology optimization.

pub mod density;
pub mod error;
pub mod generators;
pub mod grid;
pub mod heaviside;
pub mod io;
pub mod linalg;
pub mod nonsmooth;
pub mod objective;
pub mod optimizer;
pub mod pde;
pub mod shapes;
pub mod verify;
pub mod wspace;

pub use error::{Error, Result};
pub use grid::{Field, Grid, NormKind, ObservationRegion, Rect, Region};
