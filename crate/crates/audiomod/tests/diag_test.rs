mod common;
use audiomod::attention::SeBlock;
use audiomod::layers::InitCtx;
use audiomod::tensor::{batch_norm2d, gradient_check, BnMode, Tensor};
use common::{rand_vec, rng};

#[test]
fn diag() {
    let mut r = rng(42);
    let x = Tensor::<f64>::new(&[1, 4, 3, 3], rand_vec(&mut r, 36, -1.0, 1.0));
    let gamma = Tensor::param(&[4], rand_vec(&mut r, 4, 0.5, 1.5));
    let beta = Tensor::param(&[4], rand_vec(&mut r, 4, -0.5, 0.5));
    let rm = Tensor::new(&[4], vec![0.0; 4]);
    let rv = Tensor::new(&[4], vec![1.0; 4]);
    let ctx = InitCtx::new(5);
    let se = SeBlock::<f64>::new(&ctx, "se", 4, 2);
    let f = || {
        let y = batch_norm2d(&x, &gamma, &beta, &rm, &rv, BnMode::Train, 1e-5, 0.1).unwrap();
        let y = se.forward(&y);
        let sel = Tensor::new(y.shape(), (0..y.numel()).map(|i| 0.1 + 0.03 * i as f64).collect());
        y.mul(&sel).unwrap().sum_all()
    };
    println!("beta err  {:.3e}", gradient_check(&f, &beta, 1e-5));
    println!("gamma err {:.3e}", gradient_check(&f, &gamma, 1e-5));
}
