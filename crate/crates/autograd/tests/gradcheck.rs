//! Every differentiable op against central finite differences in f64.

use uml_autograd::{Graph, ParamStore, Tensor, Var};

fn pseudo(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

fn t(shape: &[usize], seed: u64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, pseudo(n, seed))
}

/// Builds the graph from leaves, returns the output var.
type Build = dyn Fn(&mut Graph<f64>, &[Var]) -> Var;

fn objective(inputs: &[Tensor<f64>], build: &Build, weights: &Tensor<f64>) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let out = build(&mut g, &vars);
    g.value(out).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
}

fn check(inputs: Vec<Tensor<f64>>, build: &Build) {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let out = build(&mut g, &vars);
    let weights = t(g.value(out).shape(), 99);
    let grads = g.backward(&[(out, weights.clone())]);
    let h = 1e-6;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).expect("leaf gradient").clone();
        for j in 0..inputs[i].numel() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.clone();
            minus[i].data_mut()[j] -= h;
            let fd = (objective(&plus, build, &weights) - objective(&minus, build, &weights)) / (2.0 * h);
            let a = analytic.data()[j];
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-5, "input {i} elem {j}: analytic {a} vs fd {fd}");
        }
    }
}

#[test]
fn conv2d_3x3_and_1x1() {
    check(vec![t(&[2, 3, 4, 5], 1), t(&[4, 3, 3, 3], 2), t(&[4], 3)], &|g, v| g.conv2d(v[0], v[1], v[2], 1));
    check(vec![t(&[2, 3, 4, 4], 4), t(&[2, 3, 1, 1], 5), t(&[2], 6)], &|g, v| g.conv2d(v[0], v[1], v[2], 0));
}

#[test]
fn linear_layer() {
    check(vec![t(&[3, 5], 7), t(&[4, 5], 8), t(&[4], 9)], &|g, v| g.linear(v[0], v[1], v[2]));
}

#[test]
fn elementwise_ops() {
    check(vec![t(&[2, 2, 3, 3], 10), t(&[2, 2, 3, 3], 11)], &|g, v| {
        let a = g.add(v[0], v[1]);
        let s = g.sub(a, v[1]);
        let m = g.mul(s, v[1]);
        let e = g.exp(m);
        let sg = g.sigmoid(e);
        let sp = g.softplus(v[0]);
        let sc = g.scale(sp, -1.7);
        let r = g.add_scalar(sc, 3.0);
        let r = g.recip(r);
        let k = g.add(sg, r);
        g.relu(k)
    });
}

#[test]
fn broadcasting_products() {
    check(vec![t(&[2, 3, 4, 4], 12), t(&[2, 3], 13)], &|g, v| g.mul_channel(v[0], v[1]));
    check(vec![t(&[2, 3, 4, 4], 14), t(&[2, 1, 4, 4], 15)], &|g, v| g.mul_pixel(v[0], v[1]));
}

#[test]
fn reshaping_ops() {
    check(vec![t(&[2, 3, 4, 4], 16), t(&[2, 1, 4, 4], 17)], &|g, v| {
        let c = g.concat(&[v[0], v[1]]);
        let s = g.sum_channels(c);
        let p = g.avg_pool2(s);
        let u = g.upsample2(p);
        let m = g.mul(u, v[1]);
        g.concat(&[m, c])
    });
    check(vec![t(&[2, 3, 4, 2], 18)], &|g, v| g.global_avg_pool(v[0]));
}

#[test]
fn param_gradients_are_reported_per_id() {
    let mut store = ParamStore::<f64>::new();
    let w = store.add("w", t(&[2, 1, 1, 1], 20), true);
    let b = store.add("b", t(&[2], 21), false);
    let unused = store.add("unused", t(&[3], 22), false);
    let mut g = Graph::new();
    let x = g.input(t(&[1, 1, 2, 2], 23));
    let wv = g.param(&store, w);
    let bv = g.param(&store, b);
    let _uv = g.param(&store, unused);
    let y = g.conv2d(x, wv, bv, 0);
    let ones = Tensor::full(g.value(y).shape(), 1.0);
    let grads = g.backward(&[(y, ones)]);
    assert!(grads.get(x).is_none(), "inputs carry no gradient");
    let ps = grads.params();
    assert_eq!(ps.len(), 3);
    assert_eq!(grads.param_grad(b).unwrap().data(), &[4.0, 4.0]);
    assert!(grads.param_grad(unused).unwrap().data().iter().all(|&v| v == 0.0));
}
