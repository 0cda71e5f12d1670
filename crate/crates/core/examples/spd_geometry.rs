//! Log-Euclidean geometry on P+(q): distances, the group action `circ`, and
//! upcasting a matrix to its Gram matrix.

use matmcmc::linalg::{circ, gram, spd_log, spd_metric, sym_exp, DenseMatrix, SpdMatrix};

fn main() -> matmcmc::Result<()> {
    let a = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0])?;
    let b = SpdMatrix::from_row_slice(2, &[1.0, -0.2, -0.2, 3.0])?;
    let id = SpdMatrix::identity(2);

    println!("d(A, B)       = {:.6}", spd_metric(&a, &b)?);
    println!("d(A, A^-1)    = {:.6}", spd_metric(&a, &a.inverse())?);
    println!("|log A|_F     = {:.6}", spd_metric(&a, &id)?);

    // A ∘ B = B^{1/2} A B^{1/2}, so (A ∘ B) ∘ B^{-1} = A
    let ab = circ(&a, &b)?;
    let back = circ(&ab, &b.inverse())?;
    println!("(A∘B)∘B^-1 - A: {:.2e}", (back.as_matrix() - a.as_matrix()).norm());
    println!("tr(A∘B) - tr(AB): {:.2e}", ab.trace() - (a.as_matrix() * b.as_matrix()).trace());

    let l = spd_log(&a);
    println!("exp(log A) - A: {:.2e}", (sym_exp(&l)?.as_matrix() - a.as_matrix()).norm());

    let x = DenseMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0])?;
    let u = SpdMatrix::from_diagonal(&[1.0, 2.0, 4.0])?;
    let s = gram(&x, &u)?;
    println!("x^T U^-1 x =\n{}", s.as_matrix());
    Ok(())
}
