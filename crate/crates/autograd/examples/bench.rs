use std::time::Instant;
use uml_autograd::{Graph, ParamStore, Tensor};
fn main() {
    for &(c, hw) in &[(16usize, 64usize), (32, 32), (64, 16), (128, 8)] {
        let mut store = ParamStore::<f32>::new();
        let w = store.add("w", Tensor::full(&[c, c, 3, 3], 0.01), true);
        let b = store.add("b", Tensor::zeros(&[c]), false);
        let x = Tensor::full(&[8, c, hw, hw], 0.5f32);
        let t0 = Instant::now();
        let reps = 20;
        for _ in 0..reps {
            let mut g = Graph::new();
            let xv = g.leaf(x.clone());
            let wv = g.param(&store, w);
            let bv = g.param(&store, b);
            let y = g.conv2d(xv, wv, bv, 1);
            let ones = Tensor::full(g.value(y).shape(), 1.0);
            let _ = g.backward(&[(y, ones)]);
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        let macs = 8.0 * (hw * hw * c * c * 9) as f64 * 3.0;
        println!("c={c} hw={hw}: {:.2} ms, {:.1} GMAC/s", dt * 1e3, macs / dt / 1e9);
    }
}
