//! Layers of the spatio-temporal classifier with hand-written backward
//! passes.
//!
//! Shapes follow the convention `T x J x C` (frames, joints, channels).
//! Forward passes return a cache holding exactly what backward needs;
//! backward passes return parameter gradients (as a value of the same layer
//! type) plus the gradient with respect to the layer input.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::Rng;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn uniform(rng: &mut impl Rng, limit: f64) -> f64 {
    (rng.random::<f64>() * 2.0 - 1.0) * limit
}

/// Flattens `T x J x C` into `(T*J) x C` (both directions are cheap for the
/// standard layout used everywhere here).
fn as_matrix(x: &Array3<f64>) -> Array2<f64> {
    let (t, j, c) = x.dim();
    x.to_shape((t * j, c)).expect("standard layout").to_owned()
}

fn as_tensor(x: Array2<f64>, t: usize, j: usize) -> Array3<f64> {
    let c = x.ncols();
    x.into_shape_with_order((t, j, c)).expect("standard layout")
}

// ── Gated temporal convolution ──────────────────────────────────────────────

/// 1D convolution along the time axis with a GLU output:
/// `out = (X * W_v + b_v) .* sigmoid(X * W_g + b_g)`, no padding.
#[derive(Debug, Clone)]
pub struct TemporalGatedConv {
    /// `k x C_in x C_out`.
    pub w_value: Array3<f64>,
    pub b_value: Array1<f64>,
    pub w_gate: Array3<f64>,
    pub b_gate: Array1<f64>,
}

pub struct TgcCache {
    input: Array3<f64>,
    /// Pre-gate value path, `(T'*J) x C_out`.
    value: Array2<f64>,
    /// `sigmoid` of the gate path, same shape.
    sig: Array2<f64>,
    t_out: usize,
    joints: usize,
}

impl TemporalGatedConv {
    pub fn kernel_size(&self) -> usize {
        self.w_value.dim().0
    }

    pub fn init(kernel: usize, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (kernel as f64 * c_in as f64 + c_out as f64)).sqrt();
        let mut mk = |_| uniform(rng, limit);
        TemporalGatedConv {
            w_value: Array3::from_shape_fn((kernel, c_in, c_out), &mut mk),
            b_value: Array1::zeros(c_out),
            w_gate: Array3::from_shape_fn((kernel, c_in, c_out), &mut mk),
            b_gate: Array1::zeros(c_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        TemporalGatedConv {
            w_value: Array3::zeros(self.w_value.dim()),
            b_value: Array1::zeros(self.b_value.dim()),
            w_gate: Array3::zeros(self.w_gate.dim()),
            b_gate: Array1::zeros(self.b_gate.dim()),
        }
    }

    /// `input`: `T x J x C_in` with `T >= kernel`. Output `T' x J x C_out`,
    /// `T' = T - kernel + 1`.
    pub fn forward(&self, input: &Array3<f64>) -> (Array3<f64>, TgcCache) {
        let (t, j, c_in) = input.dim();
        let (k, w_cin, c_out) = self.w_value.dim();
        assert_eq!(c_in, w_cin, "input channels {c_in} vs weights {w_cin}");
        assert!(t >= k, "temporal kernel {k} longer than input {t}");
        let t_out = t - k + 1;

        let mut value = Array2::<f64>::zeros((t_out * j, c_out));
        let mut gate = Array2::<f64>::zeros((t_out * j, c_out));
        for tau in 0..k {
            let x_slice = input.slice(s![tau..tau + t_out, .., ..]);
            let x2 = x_slice
                .to_shape((t_out * j, c_in))
                .expect("contiguous time slice");
            general_mat_mul(
                1.0,
                &x2.view(),
                &self.w_value.index_axis(Axis(0), tau),
                1.0,
                &mut value,
            );
            general_mat_mul(
                1.0,
                &x2.view(),
                &self.w_gate.index_axis(Axis(0), tau),
                1.0,
                &mut gate,
            );
        }
        value += &self.b_value;
        gate += &self.b_gate;

        let sig = gate.mapv(sigmoid);
        let out2 = &value * &sig;
        let cache = TgcCache {
            input: input.clone(),
            value,
            sig,
            t_out,
            joints: j,
        };
        (as_tensor(out2, t_out, j), cache)
    }

    /// Returns (parameter gradients, input gradient).
    pub fn backward(&self, cache: &TgcCache, grad_out: &Array3<f64>) -> (Self, Array3<f64>) {
        let (t, j, c_in) = cache.input.dim();
        let k = self.kernel_size();
        let t_out = cache.t_out;
        assert_eq!(grad_out.dim(), (t_out, cache.joints, self.w_value.dim().2));

        let g2 = as_matrix(grad_out);
        let d_value = &g2 * &cache.sig;
        let d_gate = &g2 * &cache.value * &cache.sig * &cache.sig.mapv(|s| 1.0 - s);

        let mut grads = self.zeros_like();
        grads.b_value = d_value.sum_axis(Axis(0));
        grads.b_gate = d_gate.sum_axis(Axis(0));

        let mut d_input = Array3::<f64>::zeros((t, j, c_in));
        for tau in 0..k {
            let x_slice = cache.input.slice(s![tau..tau + t_out, .., ..]);
            let x2 = x_slice
                .to_shape((t_out * j, c_in))
                .expect("contiguous time slice");
            general_mat_mul(
                1.0,
                &x2.t(),
                &d_value.view(),
                1.0,
                &mut grads.w_value.index_axis_mut(Axis(0), tau),
            );
            general_mat_mul(
                1.0,
                &x2.t(),
                &d_gate.view(),
                1.0,
                &mut grads.w_gate.index_axis_mut(Axis(0), tau),
            );

            let mut contrib = d_value.dot(&self.w_value.index_axis(Axis(0), tau).t());
            contrib += &d_gate.dot(&self.w_gate.index_axis(Axis(0), tau).t());
            let contrib3 = as_tensor(contrib, t_out, j);
            let mut target = d_input.slice_mut(s![tau..tau + t_out, .., ..]);
            target += &contrib3;
        }
        (grads, d_input)
    }
}

// ── Spatial graph convolution ───────────────────────────────────────────────

/// `out[t] = adjacency . X_t . weight` for every frame: features propagate
/// one hop along the skeleton and mix channels linearly. No bias, no
/// activation.
pub fn spatial_graph_conv(
    features: &Array3<f64>,
    adjacency: &Array2<f64>,
    weight: &Array2<f64>,
) -> Array3<f64> {
    let ax = propagate(features, adjacency);
    let (t, j, _) = features.dim();
    as_tensor(as_matrix(&ax).dot(weight), t, j)
}

/// `AX[t] = adjacency . X_t`.
fn propagate(features: &Array3<f64>, adjacency: &Array2<f64>) -> Array3<f64> {
    let (t, j, c) = features.dim();
    assert_eq!(adjacency.dim(), (j, j), "adjacency must match joint count");
    let mut ax = Array3::<f64>::zeros((t, j, c));
    for ti in 0..t {
        let frame = features.index_axis(Axis(0), ti);
        let mut out = ax.index_axis_mut(Axis(0), ti);
        general_mat_mul(1.0, &adjacency.view(), &frame, 0.0, &mut out);
    }
    ax
}

#[derive(Debug, Clone)]
pub struct SpatialGraphConv {
    /// `C_in x C_out`.
    pub weight: Array2<f64>,
}

pub struct SgcCache {
    /// `T x J x C_in`, adjacency already applied.
    ax: Array3<f64>,
}

impl SpatialGraphConv {
    pub fn init(c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (c_in as f64 + c_out as f64)).sqrt();
        SpatialGraphConv {
            weight: Array2::from_shape_fn((c_in, c_out), |_| uniform(rng, limit)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        SpatialGraphConv { weight: Array2::zeros(self.weight.dim()) }
    }

    pub fn forward(&self, features: &Array3<f64>, adjacency: &Array2<f64>) -> (Array3<f64>, SgcCache) {
        let ax = propagate(features, adjacency);
        let (t, j, _) = features.dim();
        let out = as_tensor(as_matrix(&ax).dot(&self.weight), t, j);
        (out, SgcCache { ax })
    }

    pub fn backward(
        &self,
        cache: &SgcCache,
        adjacency: &Array2<f64>,
        grad_out: &Array3<f64>,
    ) -> (Self, Array3<f64>) {
        let (t, j, _) = cache.ax.dim();
        let g2 = as_matrix(grad_out);
        let ax2 = as_matrix(&cache.ax);
        let mut grads = self.zeros_like();
        general_mat_mul(1.0, &ax2.t(), &g2.view(), 0.0, &mut grads.weight.view_mut());

        // d(AX) = dY . W^T, then propagate back through A (A^T = A for the
        // normalized adjacency, but keep the transpose for correctness).
        let d_ax = as_tensor(g2.dot(&self.weight.t()), t, j);
        let adj_t = adjacency.t().to_owned();
        let d_features = propagate(&d_ax, &adj_t);
        (grads, d_features)
    }
}

// ── ReLU ────────────────────────────────────────────────────────────────────

pub fn relu_forward(x: &Array3<f64>) -> (Array3<f64>, Array3<f64>) {
    let out = x.mapv(|v| v.max(0.0));
    let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    (out, mask)
}

pub fn relu_backward(mask: &Array3<f64>, grad_out: &Array3<f64>) -> Array3<f64> {
    grad_out * mask
}

// ── Mean pooling over joints ────────────────────────────────────────────────

pub fn pool_joints(x: &Array3<f64>) -> Array2<f64> {
    x.mean_axis(Axis(1)).expect("at least one joint")
}

pub fn pool_joints_backward(grad_out: &Array2<f64>, joints: usize) -> Array3<f64> {
    let (t, c) = grad_out.dim();
    let scaled = grad_out.mapv(|v| v / joints as f64);
    let mut out = Array3::<f64>::zeros((t, joints, c));
    for ji in 0..joints {
        out.slice_mut(s![.., ji, ..]).assign(&scaled);
    }
    out
}

// ── LSTM ────────────────────────────────────────────────────────────────────

/// Single-layer LSTM consuming a `T x C` feature sequence; only the final
/// hidden state is used downstream. Gate order in the stacked weights is
/// input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmLayer {
    /// `4H x C`.
    pub w_input: Array2<f64>,
    /// `4H x H`.
    pub w_hidden: Array2<f64>,
    /// `4H`.
    pub bias: Array1<f64>,
}

pub struct LstmCache {
    xs: Array2<f64>,
    /// Gate activations per step, each `T x H`.
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    /// Cell states after each step.
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    /// Hidden states after each step.
    h: Array2<f64>,
}

impl LstmLayer {
    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let limit = 1.0 / (hidden as f64).sqrt();
        let w_input = Array2::from_shape_fn((4 * hidden, input), |_| uniform(rng, limit));
        let w_hidden = Array2::from_shape_fn((4 * hidden, hidden), |_| uniform(rng, limit));
        let mut bias = Array1::zeros(4 * hidden);
        // Forget-gate bias starts at 1 so early training does not flush the
        // cell state.
        bias.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        LstmLayer { w_input, w_hidden, bias }
    }

    pub fn zeros_like(&self) -> Self {
        LstmLayer {
            w_input: Array2::zeros(self.w_input.dim()),
            w_hidden: Array2::zeros(self.w_hidden.dim()),
            bias: Array1::zeros(self.bias.dim()),
        }
    }

    /// Returns the final hidden state and the step cache.
    pub fn forward(&self, xs: &Array2<f64>) -> (Array1<f64>, LstmCache) {
        let (t, c_in) = xs.dim();
        let h_dim = self.hidden();
        assert_eq!(self.w_input.ncols(), c_in, "lstm input width");
        assert!(t >= 1, "lstm needs at least one step");

        let mut cache = LstmCache {
            xs: xs.clone(),
            i: Array2::zeros((t, h_dim)),
            f: Array2::zeros((t, h_dim)),
            g: Array2::zeros((t, h_dim)),
            o: Array2::zeros((t, h_dim)),
            c: Array2::zeros((t, h_dim)),
            tanh_c: Array2::zeros((t, h_dim)),
            h: Array2::zeros((t, h_dim)),
        };

        let mut h_prev = Array1::<f64>::zeros(h_dim);
        let mut c_prev = Array1::<f64>::zeros(h_dim);
        for ti in 0..t {
            let x_t = xs.row(ti);
            let mut z = self.w_input.dot(&x_t);
            z += &self.w_hidden.dot(&h_prev);
            z += &self.bias;

            for hi in 0..h_dim {
                let i = sigmoid(z[hi]);
                let f = sigmoid(z[h_dim + hi]);
                let g = z[2 * h_dim + hi].tanh();
                let o = sigmoid(z[3 * h_dim + hi]);
                let c_new = f * c_prev[hi] + i * g;
                let tanh_c = c_new.tanh();
                cache.i[[ti, hi]] = i;
                cache.f[[ti, hi]] = f;
                cache.g[[ti, hi]] = g;
                cache.o[[ti, hi]] = o;
                cache.c[[ti, hi]] = c_new;
                cache.tanh_c[[ti, hi]] = tanh_c;
                cache.h[[ti, hi]] = o * tanh_c;
            }
            h_prev.assign(&cache.h.row(ti));
            c_prev.assign(&cache.c.row(ti));
        }
        (h_prev, cache)
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Returns (parameter gradients, gradient on the inputs).
    pub fn backward(&self, cache: &LstmCache, grad_h_last: &Array1<f64>) -> (Self, Array2<f64>) {
        let (t, c_in) = cache.xs.dim();
        let h_dim = self.hidden();
        let mut grads = self.zeros_like();
        let mut d_xs = Array2::<f64>::zeros((t, c_in));

        let mut dh = grad_h_last.clone();
        let mut dc = Array1::<f64>::zeros(h_dim);
        for ti in (0..t).rev() {
            let mut dz = Array1::<f64>::zeros(4 * h_dim);
            for hi in 0..h_dim {
                let i = cache.i[[ti, hi]];
                let f = cache.f[[ti, hi]];
                let g = cache.g[[ti, hi]];
                let o = cache.o[[ti, hi]];
                let tanh_c = cache.tanh_c[[ti, hi]];
                let c_prev = if ti == 0 { 0.0 } else { cache.c[[ti - 1, hi]] };

                let dc_total = dc[hi] + dh[hi] * o * (1.0 - tanh_c * tanh_c);
                dz[hi] = dc_total * g * i * (1.0 - i);
                dz[h_dim + hi] = dc_total * c_prev * f * (1.0 - f);
                dz[2 * h_dim + hi] = dc_total * i * (1.0 - g * g);
                dz[3 * h_dim + hi] = dh[hi] * tanh_c * o * (1.0 - o);
                dc[hi] = dc_total * f;
            }

            let x_t = cache.xs.row(ti);
            let h_prev = if ti == 0 {
                Array1::<f64>::zeros(h_dim)
            } else {
                cache.h.row(ti - 1).to_owned()
            };
            let dz2 = dz.view().insert_axis(Axis(1));
            general_mat_mul(
                1.0,
                &dz2,
                &x_t.insert_axis(Axis(0)),
                1.0,
                &mut grads.w_input.view_mut(),
            );
            general_mat_mul(
                1.0,
                &dz2,
                &h_prev.view().insert_axis(Axis(0)),
                1.0,
                &mut grads.w_hidden.view_mut(),
            );
            grads.bias += &dz;

            d_xs.row_mut(ti).assign(&self.w_input.t().dot(&dz));
            dh = self.w_hidden.t().dot(&dz);
        }
        (grads, d_xs)
    }
}

// ── Affine head ─────────────────────────────────────────────────────────────

/// Scalar logit from the final hidden state. The bias is stored as a
/// single-element array to keep parameter traversal uniform.
#[derive(Debug, Clone)]
pub struct AffineHead {
    pub weight: Array1<f64>,
    pub bias: Array1<f64>,
}

impl AffineHead {
    pub fn init(hidden: usize, rng: &mut impl Rng) -> Self {
        let limit = 1.0 / (hidden as f64).sqrt();
        AffineHead {
            weight: Array1::from_shape_fn(hidden, |_| uniform(rng, limit)),
            bias: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AffineHead {
            weight: Array1::zeros(self.weight.dim()),
            bias: Array1::zeros(1),
        }
    }

    pub fn forward(&self, h: &Array1<f64>) -> f64 {
        self.weight.dot(h) + self.bias[0]
    }

    pub fn backward(&self, h: &Array1<f64>, d_logit: f64) -> (Self, Array1<f64>) {
        let grads = AffineHead {
            weight: h.mapv(|v| v * d_logit),
            bias: Array1::from_elem(1, d_logit),
        };
        (grads, self.weight.mapv(|v| v * d_logit))
    }
}

// ── Adjacency helper for tests ──────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1234)
    }

    fn random_tensor(t: usize, j: usize, c: usize, rng: &mut impl Rng) -> Array3<f64> {
        Array3::from_shape_fn((t, j, c), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn tgc_glu_hand_case() {
        // k=1, 1->1 channels: value = 2x + 0.5, gate = 0 so sigma = 0.5.
        let layer = TemporalGatedConv {
            w_value: Array3::from_elem((1, 1, 1), 2.0),
            b_value: Array1::from_elem(1, 0.5),
            w_gate: Array3::zeros((1, 1, 1)),
            b_gate: Array1::zeros(1),
        };
        let mut x = Array3::zeros((3, 1, 1));
        x[[0, 0, 0]] = 1.0;
        x[[1, 0, 0]] = -1.0;
        x[[2, 0, 0]] = 0.0;
        let (y, _) = layer.forward(&x);
        assert_eq!(y.dim(), (3, 1, 1));
        assert!((y[[0, 0, 0]] - 1.25).abs() < 1e-15);
        assert!((y[[1, 0, 0]] - (-0.75)).abs() < 1e-15);
        assert!((y[[2, 0, 0]] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tgc_shrinks_time_axis() {
        let mut r = rng();
        let layer = TemporalGatedConv::init(3, 2, 4, &mut r);
        let x = random_tensor(7, 5, 2, &mut r);
        let (y, _) = layer.forward(&x);
        assert_eq!(y.dim(), (5, 5, 4));
    }

    #[test]
    fn tgc_gradients_match_finite_differences() {
        let mut r = rng();
        let mut layer = TemporalGatedConv::init(2, 2, 3, &mut r);
        let x = random_tensor(5, 2, 2, &mut r);
        // Loss: sum of outputs (gradient of ones).
        let (y, cache) = layer.forward(&x);
        let ones = Array3::<f64>::ones(y.dim());
        let (grads, d_input) = layer.backward(&cache, &ones);

        let h = 1e-6;
        // Check a scattering of weight coordinates.
        for &(tau, ci, co) in &[(0, 0, 0), (1, 1, 2), (0, 1, 1)] {
            let orig = layer.w_value[[tau, ci, co]];
            layer.w_value[[tau, ci, co]] = orig + h;
            let plus: f64 = layer.forward(&x).0.sum();
            layer.w_value[[tau, ci, co]] = orig - h;
            let minus: f64 = layer.forward(&x).0.sum();
            layer.w_value[[tau, ci, co]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.w_value[[tau, ci, co]];
            assert!(
                (numeric - analytic).abs() < 1e-6 * numeric.abs().max(1.0),
                "w_value[{tau},{ci},{co}]: {numeric} vs {analytic}"
            );
        }
        for &(tau, ci, co) in &[(0, 0, 1), (1, 0, 0)] {
            let orig = layer.w_gate[[tau, ci, co]];
            layer.w_gate[[tau, ci, co]] = orig + h;
            let plus: f64 = layer.forward(&x).0.sum();
            layer.w_gate[[tau, ci, co]] = orig - h;
            let minus: f64 = layer.forward(&x).0.sum();
            layer.w_gate[[tau, ci, co]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.w_gate[[tau, ci, co]];
            assert!(
                (numeric - analytic).abs() < 1e-6 * numeric.abs().max(1.0),
                "w_gate[{tau},{ci},{co}]: {numeric} vs {analytic}"
            );
        }
        // Input gradient.
        let mut x_mut = x.clone();
        for &(ti, ji, ci) in &[(0, 0, 0), (2, 1, 1), (4, 0, 1)] {
            let orig = x_mut[[ti, ji, ci]];
            x_mut[[ti, ji, ci]] = orig + h;
            let plus: f64 = layer.forward(&x_mut).0.sum();
            x_mut[[ti, ji, ci]] = orig - h;
            let minus: f64 = layer.forward(&x_mut).0.sum();
            x_mut[[ti, ji, ci]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = d_input[[ti, ji, ci]];
            assert!(
                (numeric - analytic).abs() < 1e-6 * numeric.abs().max(1.0),
                "input[{ti},{ji},{ci}]: {numeric} vs {analytic}"
            );
        }
    }

    #[test]
    fn spatial_conv_two_node_hand_case() {
        let adjacency = ndarray::array![[0.5, 0.5], [0.5, 0.5]];
        let weight = ndarray::array![[2.0]];
        let mut x = Array3::zeros((1, 2, 1));
        x[[0, 0, 0]] = 1.0;
        x[[0, 1, 0]] = 3.0;
        let y = spatial_graph_conv(&x, &adjacency, &weight);
        assert!((y[[0, 0, 0]] - 4.0).abs() < 1e-15);
        assert!((y[[0, 1, 0]] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn spatial_conv_is_linear() {
        let mut r = rng();
        for _ in 0..20 {
            let weight = Array2::from_shape_fn((3, 2), |_| r.random::<f64>() * 2.0 - 1.0);
            let adjacency = Array2::from_shape_fn((4, 4), |_| r.random::<f64>() * 0.5);
            let x = random_tensor(3, 4, 3, &mut r);
            let y = random_tensor(3, 4, 3, &mut r);
            let (alpha, beta) = (r.random::<f64>() * 4.0 - 2.0, r.random::<f64>() * 4.0 - 2.0);

            let combined = spatial_graph_conv(
                &(x.mapv(|v| alpha * v) + y.mapv(|v| beta * v)),
                &adjacency,
                &weight,
            );
            let separate = spatial_graph_conv(&x, &adjacency, &weight).mapv(|v| alpha * v)
                + spatial_graph_conv(&y, &adjacency, &weight).mapv(|v| beta * v);
            let worst = (&combined - &separate)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-6, "linearity violated by {worst}");
        }
    }

    #[test]
    fn spatial_conv_gradients_match_finite_differences() {
        let mut r = rng();
        let layer = SpatialGraphConv::init(3, 2, &mut r);
        let adjacency = Array2::from_shape_fn((4, 4), |_| r.random::<f64>() * 0.5);
        let x = random_tensor(3, 4, 3, &mut r);
        let (y, cache) = layer.forward(&x, &adjacency);
        let ones = Array3::<f64>::ones(y.dim());
        let (grads, d_input) = layer.backward(&cache, &adjacency, &ones);

        let h = 1e-6;
        let mut w = layer.weight.clone();
        for &(a, b) in &[(0, 0), (2, 1), (1, 0)] {
            let orig = w[[a, b]];
            w[[a, b]] = orig + h;
            let plus: f64 = spatial_graph_conv(&x, &adjacency, &w).sum();
            w[[a, b]] = orig - h;
            let minus: f64 = spatial_graph_conv(&x, &adjacency, &w).sum();
            w[[a, b]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            assert!((numeric - grads.weight[[a, b]]).abs() < 1e-6 * numeric.abs().max(1.0));
        }
        let mut x_mut = x.clone();
        for &(ti, ji, ci) in &[(0, 0, 0), (2, 3, 2), (1, 2, 1)] {
            let orig = x_mut[[ti, ji, ci]];
            x_mut[[ti, ji, ci]] = orig + h;
            let plus: f64 = spatial_graph_conv(&x_mut, &adjacency, &layer.weight).sum();
            x_mut[[ti, ji, ci]] = orig - h;
            let minus: f64 = spatial_graph_conv(&x_mut, &adjacency, &layer.weight).sum();
            x_mut[[ti, ji, ci]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            assert!((numeric - d_input[[ti, ji, ci]]).abs() < 1e-6 * numeric.abs().max(1.0));
        }
    }

    #[test]
    fn lstm_single_step_hand_case() {
        // H=1, C=1, all weights chosen so gates are easy to evaluate.
        let layer = LstmLayer {
            w_input: Array2::from_shape_vec((4, 1), vec![1.0, 0.5, 2.0, -1.0]).unwrap(),
            w_hidden: Array2::zeros((4, 1)),
            bias: Array1::zeros(4),
        };
        let xs = Array2::from_shape_vec((1, 1), vec![0.3]).unwrap();
        let (h, _) = layer.forward(&xs);
        let i = sigmoid(0.3);
        let g = (0.6f64).tanh();
        let o = sigmoid(-0.3);
        let c = i * g;
        let expected = o * c.tanh();
        assert!((h[0] - expected).abs() < 1e-15, "{} vs {expected}", h[0]);
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let mut r = rng();
        let mut layer = LstmLayer::init(3, 4, &mut r);
        let xs = Array2::from_shape_fn((6, 3), |_| r.random::<f64>() * 2.0 - 1.0);
        // Loss: sum of final hidden state.
        let (h, cache) = layer.forward(&xs);
        let ones = Array1::<f64>::ones(h.dim());
        let (grads, d_xs) = layer.backward(&cache, &ones);

        let h_step = 1e-6;
        let loss = |l: &LstmLayer, x: &Array2<f64>| -> f64 { l.forward(x).0.sum() };
        for &(a, b) in &[(0, 0), (7, 2), (13, 1), (4, 0)] {
            let orig = layer.w_input[[a, b]];
            layer.w_input[[a, b]] = orig + h_step;
            let plus = loss(&layer, &xs);
            layer.w_input[[a, b]] = orig - h_step;
            let minus = loss(&layer, &xs);
            layer.w_input[[a, b]] = orig;
            let numeric = (plus - minus) / (2.0 * h_step);
            assert!(
                (numeric - grads.w_input[[a, b]]).abs() < 1e-5 * numeric.abs().max(1.0),
                "w_input[{a},{b}]"
            );
        }
        for &(a, b) in &[(0, 0), (9, 3), (15, 2)] {
            let orig = layer.w_hidden[[a, b]];
            layer.w_hidden[[a, b]] = orig + h_step;
            let plus = loss(&layer, &xs);
            layer.w_hidden[[a, b]] = orig - h_step;
            let minus = loss(&layer, &xs);
            layer.w_hidden[[a, b]] = orig;
            let numeric = (plus - minus) / (2.0 * h_step);
            assert!(
                (numeric - grads.w_hidden[[a, b]]).abs() < 1e-5 * numeric.abs().max(1.0),
                "w_hidden[{a},{b}]"
            );
        }
        for &a in &[0usize, 5, 10, 15] {
            let orig = layer.bias[a];
            layer.bias[a] = orig + h_step;
            let plus = loss(&layer, &xs);
            layer.bias[a] = orig - h_step;
            let minus = loss(&layer, &xs);
            layer.bias[a] = orig;
            let numeric = (plus - minus) / (2.0 * h_step);
            assert!(
                (numeric - grads.bias[a]).abs() < 1e-5 * numeric.abs().max(1.0),
                "bias[{a}]"
            );
        }
        let mut xs_mut = xs.clone();
        for &(ti, ci) in &[(0, 0), (3, 2), (5, 1)] {
            let orig = xs_mut[[ti, ci]];
            xs_mut[[ti, ci]] = orig + h_step;
            let plus = loss(&layer, &xs_mut);
            xs_mut[[ti, ci]] = orig - h_step;
            let minus = loss(&layer, &xs_mut);
            xs_mut[[ti, ci]] = orig;
            let numeric = (plus - minus) / (2.0 * h_step);
            assert!(
                (numeric - d_xs[[ti, ci]]).abs() < 1e-5 * numeric.abs().max(1.0),
                "xs[{ti},{ci}]"
            );
        }
    }

    #[test]
    fn pooling_and_backward() {
        let mut x = Array3::<f64>::zeros((2, 3, 1));
        x[[0, 0, 0]] = 1.0;
        x[[0, 1, 0]] = 2.0;
        x[[0, 2, 0]] = 6.0;
        let pooled = pool_joints(&x);
        assert!((pooled[[0, 0]] - 3.0).abs() < 1e-15);
        let d = pool_joints_backward(&Array2::ones((2, 1)), 3);
        assert!((d[[0, 1, 0]] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn relu_masks_negatives() {
        let mut x = Array3::<f64>::zeros((1, 1, 3));
        x[[0, 0, 0]] = -2.0;
        x[[0, 0, 1]] = 0.0;
        x[[0, 0, 2]] = 3.0;
        let (y, mask) = relu_forward(&x);
        assert_eq!(y[[0, 0, 0]], 0.0);
        assert_eq!(y[[0, 0, 2]], 3.0);
        let g = relu_backward(&mask, &Array3::ones((1, 1, 3)));
        assert_eq!(g[[0, 0, 0]], 0.0);
        assert_eq!(g[[0, 0, 1]], 0.0);
        assert_eq!(g[[0, 0, 2]], 1.0);
    }
}
