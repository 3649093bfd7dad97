use nalgebra::Matrix4;
use num_complex::Complex64 as C64;

/// 4×4 complex matrix acting on vectorized density matrices.
pub type Mat4 = Matrix4<C64>;

/// Positions in the row-major vectorization `(ρ_ee, ρ_eg, ρ_ge, ρ_gg)`.
pub const EE: usize = 0;
pub const EG: usize = 1;
pub const GE: usize = 2;
pub const GG: usize = 3;

/// Generator `Λ(t)` of the vectorized master equation `d/dt ρ = Λ ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superoperator(pub Mat4);

impl Superoperator {
    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn apply(&self, rhs: &Mat4) -> Mat4 {
        self.0 * rhs
    }

    pub fn apply_adjoint(&self, rhs: &Mat4) -> Mat4 {
        self.0.adjoint() * rhs
    }
}

/// Builds `Λ` for qubit frequency `omega_t` and memory coefficient `f_total`.
///
/// Amplitude damping at rate `2 Re F` drains `ρ_ee` into `ρ_gg`; the
/// coherences rotate at `∓ω` and pick up `-conj(F)` / `-F`.
pub fn build_lindbladian(omega_t: f64, f_total: C64) -> Superoperator {
    let zero = C64::new(0.0, 0.0);
    let decay = 2.0 * f_total.re;
    let mut m = Mat4::from_element(zero);
    m[(EE, EE)] = C64::new(-decay, 0.0);
    m[(GG, EE)] = C64::new(decay, 0.0);
    m[(EG, EG)] = C64::new(0.0, -omega_t) - f_total.conj();
    m[(GE, GE)] = C64::new(0.0, omega_t) - f_total;
    Superoperator(m)
}

/// `∂Λ/∂ε` at fixed memory: the constant `diag(0, -i, +i, 0)`.
pub fn control_derivative() -> Mat4 {
    let mut d = Mat4::from_element(C64::new(0.0, 0.0));
    d[(EG, EG)] = C64::new(0.0, -1.0);
    d[(GE, GE)] = C64::new(0.0, 1.0);
    d
}

/// Partial derivatives of `Λ` with respect to `F` and `conj(F)`.
pub(crate) fn memory_derivatives() -> (Mat4, Mat4) {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut wrt_f = Mat4::from_element(zero);
    wrt_f[(EE, EE)] = -one;
    wrt_f[(GG, EE)] = one;
    wrt_f[(GE, GE)] = -one;
    let mut wrt_conj = Mat4::from_element(zero);
    wrt_conj[(EE, EE)] = -one;
    wrt_conj[(GG, EE)] = one;
    wrt_conj[(EG, EG)] = -one;
    (wrt_f, wrt_conj)
}

/// Row-major vectorization of a 2×2 density matrix in the `(e, g)` basis.
pub fn vectorize(rho: &[[C64; 2]; 2]) -> nalgebra::Vector4<C64> {
    nalgebra::Vector4::new(rho[0][0], rho[0][1], rho[1][0], rho[1][1])
}

pub fn unvectorize(v: &nalgebra::Vector4<C64>) -> [[C64; 2]; 2] {
    [[v[EE], v[EG]], [v[GE], v[GG]]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn closed_system_is_diagonal_rotation() {
        let l = build_lindbladian(1.7, c(0.0, 0.0));
        let expected = Mat4::from_diagonal(&nalgebra::Vector4::new(
            c(0.0, 0.0),
            c(0.0, -1.7),
            c(0.0, 1.7),
            c(0.0, 0.0),
        ));
        assert_eq!(l.0, expected);
    }

    #[test]
    fn real_memory_damps() {
        let r = 0.3;
        let l = build_lindbladian(0.0, c(r, 0.0));
        assert_eq!(l.0[(EE, EE)], c(-2.0 * r, 0.0));
        assert_eq!(l.0[(GG, EE)], c(2.0 * r, 0.0));
        assert_eq!(l.0[(EG, EG)], c(-r, 0.0));
        assert_eq!(l.0[(GE, GE)], c(-r, 0.0));
    }

    #[test]
    fn population_columns_preserve_trace() {
        let l = build_lindbladian(0.4, c(0.12, -0.7));
        for col in 0..4 {
            let trace_rate = l.0[(EE, col)] + l.0[(GG, col)];
            assert_eq!(trace_rate, c(0.0, 0.0));
        }
    }

    #[test]
    fn imaginary_memory_shifts_coherence_frequency() {
        let (omega, s) = (2.0, 0.25);
        let l = build_lindbladian(omega, c(0.0, s));
        assert_eq!(l.0[(GE, GE)], c(0.0, omega - s));
        assert_eq!(l.0[(EE, EE)], c(0.0, 0.0));
    }

    #[test]
    fn derivative_split_reassembles_lindbladian() {
        let (a, b) = memory_derivatives();
        let f = c(0.2, -0.45);
        let omega = 1.3;
        let rebuilt = build_lindbladian(omega, c(0.0, 0.0)).0 + a * f + b * f.conj();
        assert!((rebuilt - build_lindbladian(omega, f).0).norm() < 1e-15);
        let eps_step = 1e-3;
        let diff = (build_lindbladian(omega + eps_step, f).0 - build_lindbladian(omega, f).0)
            / C64::new(eps_step, 0.0);
        assert!((diff - control_derivative()).norm() < 1e-12);
    }
}
