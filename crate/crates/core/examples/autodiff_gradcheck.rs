//! Records a small computation on the tape, runs reverse mode, and compares
//! every parameter gradient against central finite differences.

use unseg::autodiff::{Activation, Tape};
use unseg::tensor::Tensor;
use unseg::Result;

fn loss_value(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let wv = tape.param(w)?;
    let xv = tape.constant(x)?;
    let loss = build(&mut tape, wv, xv, b)?;
    Ok(tape.value(loss).get(0, 0))
}

fn build<'a>(tape: &mut Tape<'a>, w: unseg::autodiff::Var, x: unseg::autodiff::Var, b: &'a Tensor) -> Result<unseg::autodiff::Var> {
    let h = tape.matmul(x, w)?;
    let h = tape.activation(h, Activation::Silu)?;
    let c = tape.row_softmax(h)?;
    let q = tape.trace_quadratic(c, b)?;
    let r = tape.column_sum_norm(c)?;
    let r = tape.affine(r, 0.1, 0.0)?;
    let neg_q = tape.affine(q, -1.0, 0.0)?;
    tape.add(neg_q, r)
}

fn main() -> Result<()> {
    let x = Tensor::from_rows(&[[1.0, 0.2, -0.3], [0.1, 0.9, 0.4], [-0.5, 0.3, 1.1], [0.7, -0.6, 0.2]]);
    let w = Tensor::from_rows(&[[0.3, -0.2], [0.5, 0.1], [-0.4, 0.6]]);
    let b = Tensor::from_rows(&[
        [-0.5, 0.5, -0.25, 0.25],
        [0.5, -0.5, 0.25, -0.25],
        [-0.25, 0.25, -0.5, 0.5],
        [0.25, -0.25, 0.5, -0.5],
    ]);

    let mut tape = Tape::new();
    let wv = tape.param(&w)?;
    let xv = tape.constant(&x)?;
    let loss = build(&mut tape, wv, xv, &b)?;
    tape.backward(loss)?;
    let grad = tape.grad(wv).expect("parameter gradient").clone();
    println!("loss = {:.6}", tape.value(loss).get(0, 0));

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for r in 0..w.rows() {
        for c in 0..w.cols() {
            let mut plus = w.clone();
            plus.set(r, c, w.get(r, c) + h);
            let mut minus = w.clone();
            minus.set(r, c, w.get(r, c) - h);
            let fd = (loss_value(&plus, &x, &b)? - loss_value(&minus, &x, &b)?) / (2.0 * h);
            let ad = grad.get(r, c);
            let rel = (fd - ad).abs() / ad.abs().max(fd.abs()).max(1e-7);
            worst = worst.max(rel);
            println!("dL/dW[{r},{c}]  reverse {ad:+.8}  finite-diff {fd:+.8}");
        }
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
