//! Derivative-free optimizers used by the fitting and scenario code.

mod de;
mod nelder_mead;

pub use de::{maximize_de, DeConfig, DeOutcome};
pub(crate) use de::mix_seed;
pub use nelder_mead::nelder_mead_max;

/// Golden-section search for the maximum of a unimodal `f` on [a, b].
/// Returns the argmax after `iters` contractions.
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
