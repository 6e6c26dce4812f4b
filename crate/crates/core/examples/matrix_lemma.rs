//! Random sweep of `|(H - tr(H) I)v|² ≤ 3|H|_F² |v|²` over 4x4 matrices.

use bichf::cli::matrix_lemma_sweep;
use bichf::diagnostics::matrix_lemma_check;

fn main() {
    let samples = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100_000);
    let (violations, worst) = matrix_lemma_sweep(samples, 2024);
    println!("{samples} samples, {violations} violations, max lhs/rhs = {worst:.6}");

    let identity = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let (lhs, rhs) = matrix_lemma_check(&identity, &[1.0, 0.0, 0.0, 0.0]);
    println!("H = I, v = e1: lhs {lhs}, rhs {rhs}");
}
