use num_complex::Complex64 as C64;

use crate::bath::ExpTermList;

/// Memory functions `F_j(t)`, one per kernel term.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub f_values: Vec<C64>,
    pub time: f64,
}

impl MemoryState {
    /// All `F_j = 0` at `t = 0`.
    pub fn initial(terms: &ExpTermList) -> Self {
        Self {
            f_values: vec![C64::new(0.0, 0.0); terms.len()],
            time: 0.0,
        }
    }

    /// `F(t) = Σ_j F_j(t)`, the only quantity the generator consumes.
    pub fn f_total(&self) -> C64 {
        self.f_values.iter().sum()
    }
}

/// `dF_j/dt = p_j + F_j [q_j + iω + Σ_{k≠j} F_k] + F_j²`.
pub fn memory_derivative(state: &MemoryState, terms: &ExpTermList, omega_t: f64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); terms.len()];
    memory_rhs(&state.f_values, terms, omega_t, &mut out);
    out
}

pub(crate) fn memory_rhs(f: &[C64], terms: &ExpTermList, omega_t: f64, out: &mut [C64]) {
    debug_assert_eq!(f.len(), terms.len());
    let total: C64 = f.iter().sum();
    let spin = C64::new(0.0, omega_t);
    for ((o, fj), term) in out.iter_mut().zip(f).zip(terms.terms()) {
        // F_j (Σ_{k≠j} F_k) + F_j² collapses to F_j · F.
        *o = term.amplitude + fj * (term.rate + spin + total);
    }
}
