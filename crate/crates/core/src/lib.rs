//! Security-constrained economic dispatch over a DC network model, solved
//! centrally or by multi-area decomposition (Lagrangian relaxation and the
//! alternating-direction augmented Lagrangian).

mod affine;
pub mod alr;
pub mod case;
pub mod centralized;
pub mod dcpf;
pub mod lr;
pub mod qp;
pub mod trace;
