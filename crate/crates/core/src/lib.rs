//! Numerical tools for the weighted `∂̄` complex on `C^n`.
//!
//! * [`weights`]: weight expressions and symbolic Wirtinger derivatives.
//! * [`levi`]: Levi-matrix eigenvalues and sampled growth criteria for `s_q`.
//! * [`forms`]: multi-index algebra for `(0,q)`-forms.
//! * [`calculus`]: grid discretization of `∂̄`, `∂̄*_φ` and the Dirichlet form.
//! * [`identity`]: quadrature checks of the Kohn–Morrey formula and related bounds.
//! * [`spectral`]: sparse assembly of the complex Laplacian, eigenvalues and solves.

pub mod calculus;
pub mod forms;
pub mod identity;
pub mod levi;
pub mod spectral;
pub mod weights;

pub use num_complex::Complex64;
