//! Fourier coefficient states, the diagonal operator `A`, its semigroup, the
//! Galerkin projectors `P_m`/`Q_m` and the scale norms `Y_l`.

mod grid;
mod snapshot;
mod state;

pub use grid::{ModeGrid, MAX_SCALE_INDEX};
pub use snapshot::Snapshot;
pub use state::SpectralState;
