//! Checks the hand-written backward pass of the 2x64 policy and critic
//! networks against central finite differences.
//!
//! `cargo run --release --example gradient_check`

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snapfit::rl::nn::{gradient_check, Activation, Mlp};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let nets = [
        ("policy 13-64-64-28", Mlp::new(&[13, 64, 64, 28], Activation::Relu, Activation::Identity, &mut rng)),
        ("critic 27-64-64-1", Mlp::new(&[27, 64, 64, 1], Activation::Relu, Activation::Identity, &mut rng)),
        ("tanh 13-64-64-14", Mlp::new(&[13, 64, 64, 14], Activation::Tanh, Activation::Tanh, &mut rng)),
    ];
    for (name, net) in &nets {
        let x = Array2::from_shape_fn((4, net.input_dim()), |_| rng.gen_range(-1.0..1.0));
        let err = gradient_check(net, x.view(), 1e-5);
        println!("{name}: {} parameters, max relative error {err:.2e}", net.param_count());
    }
}
