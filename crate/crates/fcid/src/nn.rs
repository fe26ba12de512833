//! Trainable layers with hand-written backward passes.
//!
//! Parameters live in a [`ParamStore`] keyed by name; layers hold names plus
//! shape metadata and read/accumulate through the store. Iteration order over
//! the store is the lexicographic name order, so optimizer updates and
//! serialization are deterministic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor2;

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor2,
    pub grad: Tensor2,
}

/// Named parameter tensors, each paired with a gradient buffer of the same
/// shape.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor2) {
        let grad = Tensor2::zeros(value.rows(), value.cols());
        let prev = self.params.insert(name.to_string(), Param { value, grad });
        assert!(prev.is_none(), "duplicate parameter name {name}");
    }

    pub fn value(&self, name: &str) -> &Tensor2 {
        &self.params.get(name).unwrap_or_else(|| panic!("unknown parameter {name}")).value
    }

    pub fn grad(&self, name: &str) -> &Tensor2 {
        &self.params.get(name).unwrap_or_else(|| panic!("unknown parameter {name}")).grad
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Tensor2 {
        &mut self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .value
    }

    pub fn add_grad(&mut self, name: &str, delta: &Tensor2, alpha: f64) {
        let p = self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        p.grad.add_scaled(delta, alpha);
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.params.iter_mut()
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }
}

/// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], applied to weights and
/// biases alike.
fn init_tensor(rng: &mut Rng, rows: usize, cols: usize, fan_in: usize) -> Tensor2 {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut t = Tensor2::zeros(rows, cols);
    for v in t.as_mut_slice() {
        *v = rng.range(-bound, bound);
    }
    t
}

/// y = x W + b with W of shape in_dim x out_dim.
#[derive(Debug, Clone)]
pub struct Affine {
    pub w: String,
    pub b: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    pub fn init(store: &mut ParamStore, rng: &mut Rng, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let w = format!("{name}.w");
        let b = format!("{name}.b");
        store.insert(&w, init_tensor(rng, in_dim, out_dim, in_dim));
        store.insert(&b, init_tensor(rng, 1, out_dim, in_dim));
        Affine { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<Tensor2> {
        if x.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "affine {}: input cols {} != {}",
                self.w,
                x.cols(),
                self.in_dim
            )));
        }
        let w = store.value(&self.w);
        let b = store.value(&self.b);
        let mut y = x.matmul(w);
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            for (v, &bv) in row.iter_mut().zip(b.row(0)) {
                *v += bv;
            }
        }
        Ok(y)
    }

    /// Accumulates dW, db into the store and returns dx. `x` must be the
    /// forward input.
    pub fn backward(&self, store: &mut ParamStore, x: &Tensor2, dy: &Tensor2) -> Tensor2 {
        let dw = x.transposed_matmul(dy);
        let db = Tensor2::from_vec(1, dy.cols(), dy.column_sums()).expect("db shape");
        let dx = dy.matmul_transpose(store.value(&self.w));
        store.add_grad(&self.w, &dw, 1.0);
        store.add_grad(&self.b, &db, 1.0);
        dx
    }
}

/// Affine -> tanh -> affine. The workhorse encoder/decoder block.
#[derive(Debug, Clone)]
pub struct Mlp2 {
    pub l1: Affine,
    pub l2: Affine,
}

#[derive(Debug, Clone)]
pub struct Mlp2Cache {
    pub x: Tensor2,
    pub h: Tensor2,
}

impl Mlp2 {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut Rng,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
    ) -> Self {
        let l1 = Affine::init(store, rng, &format!("{name}.l1"), in_dim, hidden);
        let l2 = Affine::init(store, rng, &format!("{name}.l2"), hidden, out_dim);
        Mlp2 { l1, l2 }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor2) -> Result<(Tensor2, Mlp2Cache)> {
        let a = self.l1.forward(store, x)?;
        let h = a.map(f64::tanh);
        let y = self.l2.forward(store, &h)?;
        Ok((
            y,
            Mlp2Cache {
                x: x.clone(),
                h,
            },
        ))
    }

    pub fn forward_value(&self, store: &ParamStore, x: &Tensor2) -> Result<Tensor2> {
        let a = self.l1.forward(store, x)?;
        let h = a.map(f64::tanh);
        self.l2.forward(store, &h)
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &Mlp2Cache, dy: &Tensor2) -> Tensor2 {
        let dh = self.l2.backward(store, &cache.h, dy);
        let mut da = dh;
        for (v, &h) in da.as_mut_slice().iter_mut().zip(cache.h.as_slice()) {
            *v *= 1.0 - h * h;
        }
        self.l1.backward(store, &cache.x, &da)
    }
}

/// Single-layer unidirectional LSTM cell; gate layout in the fused weight
/// matrices is [input | forget | cell | output], each `hidden` wide.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub wx: String,
    pub wh: String,
    pub b: String,
    pub in_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    pub xs: Tensor2,
    pub h_prev: Tensor2,
    pub c_prev: Tensor2,
    pub gi: Tensor2,
    pub gf: Tensor2,
    pub gg: Tensor2,
    pub go: Tensor2,
    pub c: Tensor2,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    pub fn init(store: &mut ParamStore, rng: &mut Rng, name: &str, in_dim: usize, hidden: usize) -> Self {
        let wx = format!("{name}.wx");
        let wh = format!("{name}.wh");
        let b = format!("{name}.b");
        store.insert(&wx, init_tensor(rng, in_dim, 4 * hidden, in_dim));
        store.insert(&wh, init_tensor(rng, hidden, 4 * hidden, hidden));
        store.insert(&b, init_tensor(rng, 1, 4 * hidden, hidden));
        LstmCell { wx, wh, b, in_dim, hidden }
    }

    /// Summarize a T x in_dim sequence into the T x hidden context sequence
    /// (state starts at zero). Each output row depends only on inputs at the
    /// same or earlier time steps.
    pub fn forward_seq(&self, store: &ParamStore, xs: &Tensor2) -> Result<(Tensor2, LstmCache)> {
        if xs.rows() == 0 {
            return Err(Error::InvalidArgument(
                "recurrent summarizer: empty sequence (T = 0)".into(),
            ));
        }
        if xs.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "lstm {}: input cols {} != {}",
                self.wx,
                xs.cols(),
                self.in_dim
            )));
        }
        let t_len = xs.rows();
        let hd = self.hidden;
        let wx = store.value(&self.wx);
        let wh = store.value(&self.wh);
        let b = store.value(&self.b);

        let mut hs = Tensor2::zeros(t_len, hd);
        let mut cache = LstmCache {
            xs: xs.clone(),
            h_prev: Tensor2::zeros(t_len, hd),
            c_prev: Tensor2::zeros(t_len, hd),
            gi: Tensor2::zeros(t_len, hd),
            gf: Tensor2::zeros(t_len, hd),
            gg: Tensor2::zeros(t_len, hd),
            go: Tensor2::zeros(t_len, hd),
            c: Tensor2::zeros(t_len, hd),
        };

        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for t in 0..t_len {
            cache.h_prev.row_mut(t).copy_from_slice(&h);
            cache.c_prev.row_mut(t).copy_from_slice(&c);
            // z = x_t Wx + h_{t-1} Wh + b
            let mut z = vec![0.0; 4 * hd];
            for (k, &xv) in xs.row(t).iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                for (zv, &wv) in z.iter_mut().zip(wx.row(k)) {
                    *zv += xv * wv;
                }
            }
            for (k, &hv) in h.iter().enumerate() {
                if hv == 0.0 {
                    continue;
                }
                for (zv, &wv) in z.iter_mut().zip(wh.row(k)) {
                    *zv += hv * wv;
                }
            }
            for (zv, &bv) in z.iter_mut().zip(b.row(0)) {
                *zv += bv;
            }
            for j in 0..hd {
                let gi = sigmoid(z[j]);
                let gf = sigmoid(z[hd + j]);
                let gg = z[2 * hd + j].tanh();
                let go = sigmoid(z[3 * hd + j]);
                c[j] = gf * c[j] + gi * gg;
                h[j] = go * c[j].tanh();
                cache.gi.set(t, j, gi);
                cache.gf.set(t, j, gf);
                cache.gg.set(t, j, gg);
                cache.go.set(t, j, go);
                cache.c.set(t, j, c[j]);
            }
            hs.row_mut(t).copy_from_slice(&h);
        }
        Ok((hs, cache))
    }

    /// Backward through the whole sequence given d(hs); accumulates parameter
    /// grads and returns d(xs).
    pub fn backward_seq(&self, store: &mut ParamStore, cache: &LstmCache, dhs: &Tensor2) -> Tensor2 {
        let t_len = cache.xs.rows();
        let hd = self.hidden;
        let mut dxs = Tensor2::zeros(t_len, self.in_dim);
        let mut dwx = Tensor2::zeros(self.in_dim, 4 * hd);
        let mut dwh = Tensor2::zeros(hd, 4 * hd);
        let mut db = Tensor2::zeros(1, 4 * hd);

        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for t in (0..t_len).rev() {
            let mut dz = vec![0.0; 4 * hd];
            for j in 0..hd {
                let dh = dhs.get(t, j) + dh_next[j];
                let gi = cache.gi.get(t, j);
                let gf = cache.gf.get(t, j);
                let gg = cache.gg.get(t, j);
                let go = cache.go.get(t, j);
                let ct = cache.c.get(t, j);
                let tc = ct.tanh();
                let mut dc = dc_next[j] + dh * go * (1.0 - tc * tc);
                let dgo = dh * tc;
                let dgi = dc * gg;
                let dgg = dc * gi;
                let dgf = dc * cache.c_prev.get(t, j);
                dc *= gf;
                dc_next[j] = dc;
                dz[j] = dgi * gi * (1.0 - gi);
                dz[hd + j] = dgf * gf * (1.0 - gf);
                dz[2 * hd + j] = dgg * (1.0 - gg * gg);
                dz[3 * hd + j] = dgo * go * (1.0 - go);
            }
            // parameter grads and upstream grads
            for (k, &xv) in cache.xs.row(t).iter().enumerate() {
                if xv != 0.0 {
                    for (g, &d) in dwx.row_mut(k).iter_mut().zip(&dz) {
                        *g += xv * d;
                    }
                }
            }
            for (k, &hv) in cache.h_prev.row(t).iter().enumerate() {
                if hv != 0.0 {
                    for (g, &d) in dwh.row_mut(k).iter_mut().zip(&dz) {
                        *g += hv * d;
                    }
                }
            }
            for (g, &d) in db.row_mut(0).iter_mut().zip(&dz) {
                *g += d;
            }
            let wx = store.value(&self.wx);
            let dx_row = dxs.row_mut(t);
            for (k, dxv) in dx_row.iter_mut().enumerate() {
                *dxv = crate::tensor::dot(&dz, wx.row(k));
            }
            let wh = store.value(&self.wh);
            for (k, out) in dh_next.iter_mut().enumerate() {
                *out = crate::tensor::dot(&dz, wh.row(k));
            }
        }
        store.add_grad(&self.wx, &dwx, 1.0);
        store.add_grad(&self.wh, &dwh, 1.0);
        store.add_grad(&self.b, &db, 1.0);
        dxs
    }
}

/// Plain SGD with momentum: v <- mu*v + g; theta <- theta - lr*v.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Tensor2>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        for (name, p) in store.iter_mut() {
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| Tensor2::zeros(p.value.rows(), p.value.cols()));
            v.scale(self.momentum);
            v.add_scaled(&p.grad, 1.0);
            p.value.add_scaled(v, -self.lr);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with_identity_affine() -> (ParamStore, Affine) {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let aff = Affine::init(&mut store, &mut rng, "id", 2, 2);
        let w = store.value_mut("id.w");
        w.fill(0.0);
        w.set(0, 0, 1.0);
        w.set(1, 1, 1.0);
        store.value_mut("id.b").fill(0.0);
        (store, aff)
    }

    #[test]
    fn affine_identity_passthrough() {
        let (store, aff) = store_with_identity_affine();
        let x = Tensor2::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let y = aff.forward(&store, &x).unwrap();
        assert_eq!(y.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn affine_hand_product() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let aff = Affine::init(&mut store, &mut rng, "a", 2, 2);
        let w = store.value_mut("a.w");
        w.set(0, 0, 2.0);
        w.set(0, 1, 0.0);
        w.set(1, 0, 0.0);
        w.set(1, 1, 3.0);
        let b = store.value_mut("a.b");
        b.set(0, 0, 1.0);
        b.set(0, 1, 1.0);
        let x = Tensor2::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let y = aff.forward(&store, &x).unwrap();
        assert_eq!(y.row(0), &[3.0, 1.0]);
    }

    #[test]
    fn affine_empty_input() {
        let (store, aff) = store_with_identity_affine();
        let x = Tensor2::zeros(0, 2);
        let y = aff.forward(&store, &x).unwrap();
        assert_eq!((y.rows(), y.cols()), (0, 2));
    }

    #[test]
    fn affine_shape_mismatch_errors() {
        let (store, aff) = store_with_identity_affine();
        let x = Tensor2::zeros(1, 3);
        assert!(aff.forward(&store, &x).is_err());
    }

    #[test]
    fn lstm_zero_params_zero_input_constant_output() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let cell = LstmCell::init(&mut store, &mut rng, "lstm", 3, 4);
        for name in ["lstm.wx", "lstm.wh", "lstm.b"] {
            store.value_mut(name).fill(0.0);
        }
        let xs = Tensor2::zeros(5, 3);
        let (hs, _) = cell.forward_seq(&store, &xs).unwrap();
        for t in 0..5 {
            assert_eq!(hs.row(t), hs.row(0));
        }
    }

    #[test]
    fn lstm_causality_under_perturbation() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(9);
        let cell = LstmCell::init(&mut store, &mut rng, "lstm", 3, 4);
        let mut xs = Tensor2::zeros(6, 3);
        for v in xs.as_mut_slice() {
            *v = rng.normal();
        }
        let (base, _) = cell.forward_seq(&store, &xs).unwrap();
        let t_perturb = 3;
        let mut xs2 = xs.clone();
        xs2.set(t_perturb, 1, xs2.get(t_perturb, 1) + 0.5);
        let (alt, _) = cell.forward_seq(&store, &xs2).unwrap();
        for t in 0..6 {
            let same = base.row(t) == alt.row(t);
            if t < t_perturb {
                assert!(same, "output before perturbation changed at t={t}");
            } else {
                assert!(!same, "output at or after perturbation unchanged at t={t}");
            }
        }
    }

    #[test]
    fn lstm_single_step_matches_hand_computation() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(2);
        let cell = LstmCell::init(&mut store, &mut rng, "lstm", 1, 1);
        store.value_mut("lstm.wx").set(0, 0, 0.5);
        store.value_mut("lstm.wx").set(0, 1, -0.25);
        store.value_mut("lstm.wx").set(0, 2, 1.0);
        store.value_mut("lstm.wx").set(0, 3, 0.75);
        store.value_mut("lstm.wh").fill(0.0);
        store.value_mut("lstm.b").fill(0.0);
        let xs = Tensor2::from_rows(&[vec![2.0]]).unwrap();
        let (hs, _) = cell.forward_seq(&store, &xs).unwrap();
        let gi = sigmoid(1.0);
        let gf = sigmoid(-0.5);
        let gg = 2.0_f64.tanh();
        let go = sigmoid(1.5);
        let c = gf * 0.0 + gi * gg;
        let expected = go * c.tanh();
        assert!((hs.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn lstm_rejects_empty_sequence() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let cell = LstmCell::init(&mut store, &mut rng, "lstm", 2, 2);
        let xs = Tensor2::zeros(0, 2);
        assert!(cell.forward_seq(&store, &xs).is_err());
    }

    #[test]
    fn sgd_zero_lr_leaves_params_unchanged() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(4);
        let _ = Affine::init(&mut store, &mut rng, "a", 3, 2);
        let before = store.value("a.w").clone();
        store.add_grad("a.w", &Tensor2::from_vec(3, 2, vec![1.0; 6]).unwrap(), 1.0);
        let mut opt = SgdMomentum::new(0.0, 0.9);
        opt.step(&mut store);
        assert_eq!(*store.value("a.w"), before);
    }
}
