//! Soft-margin SVMs: support vectors of a linear fit, the XOR failure of a
//! linear boundary and its RBF fix.
//!
//! cargo run --example svm_margin

use nalgebra::DMatrix;
use xferbench::classify::svm::svm_fit;
use xferbench::classify::SvmParams;
use xferbench::kernels::Bandwidth;

fn main() -> xferbench::Result<()> {
    let x = DMatrix::from_row_slice(6, 2, &[0.0, 0.0, 1.0, 0.5, 0.5, 1.0, 3.0, 3.0, 2.0, 2.5, 2.5, 2.0]);
    let y = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
    let fit = svm_fit(&x, &y, &SvmParams::linear(10.0))?;
    println!("w = {:?}, b = {:.4}", fit.model.weights().unwrap(), fit.model.bias());
    println!("support vectors:\n{}", fit.model.support_vectors());
    println!("alpha {:?} after {} iterations", fit.alpha, fit.iterations);

    let xor = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0]);
    let t = [1.0, 1.0, -1.0, -1.0];
    for params in [SvmParams::linear(10.0), SvmParams::rbf(10.0, Bandwidth::Fixed(1.0))] {
        let m = svm_fit(&xor, &t, &params)?.model;
        let right = m.decision(&xor).iter().zip(&t).filter(|(f, t)| **f * **t > 0.0).count();
        println!("{:?} on XOR: {right}/4 correct", params.kind);
    }
    Ok(())
}
