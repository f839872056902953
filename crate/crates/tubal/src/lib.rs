//! Low-tubal-rank tensor recovery under the t-product framework.
//!
//! The crate is organized around a dense third-order tensor type ([`Tensor3`])
//! and the t-product algebra built on mode-3 Fourier transforms: tensor-tensor
//! products, tensor SVD, tubal rank and the associated norms ([`talg`]).
//! On top of the algebra sit random Gaussian measurement operators
//! ([`sensing`]), factorized gradient descent for the symmetric sensing model
//! ([`fgd`]), validation-based early stopping ([`earlystop`]), and an
//! asymmetric masked-completion solver ([`completion`]). Binary file formats
//! for tensors, operators, masks and measurement vectors live in [`io`].

pub mod completion;
pub mod earlystop;
pub mod error;
pub mod fgd;
pub mod io;
pub mod rng;
pub mod sensing;
pub mod talg;

pub use error::{Result, TubalError};
pub use talg::Tensor3;
