//! One LSTM direction: forward pass with a saved trace, and backpropagation
//! through time.
//!
//! ```text
//! a_t = W_ih x_t + W_hh h_{t-1} + b        (4H, gates i f g o)
//! i, f, o = sigmoid(.)   g = tanh(.)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```

use super::params::CellLayout;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations of one direction over a sequence, stored in processing order.
#[derive(Debug, Clone)]
pub(crate) struct DirectionTrace {
    pub steps: usize,
    pub hidden: usize,
    pub reverse: bool,
    /// Post-activation gates `[i f g o]`, `steps x 4H`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl DirectionTrace {
    /// Processing step that handled time index `t`.
    #[inline]
    pub fn step_of(&self, t: usize) -> usize {
        if self.reverse {
            self.steps - 1 - t
        } else {
            t
        }
    }

    /// Hidden state emitted at time `t`.
    pub fn h_at(&self, t: usize) -> &[f64] {
        let s = self.step_of(t);
        &self.h[s * self.hidden..(s + 1) * self.hidden]
    }

    /// Hidden state after the last processing step.
    pub fn final_h(&self) -> &[f64] {
        let h = self.hidden;
        if self.steps == 0 {
            return &[];
        }
        &self.h[(self.steps - 1) * h..self.steps * h]
    }
}

/// Runs one direction over `xs` (`steps x cell.input`, time order).
pub(crate) fn forward(params: &[f64], cell: &CellLayout, xs: &[f64], reverse: bool) -> DirectionTrace {
    let (n_in, h) = (cell.input, cell.hidden);
    let steps = xs.len() / n_in;
    let w_ih = &params[cell.w_ih..cell.w_ih + 4 * h * n_in];
    let w_hh = &params[cell.w_hh..cell.w_hh + 4 * h * h];
    let bias = &params[cell.bias..cell.bias + 4 * h];

    let mut trace = DirectionTrace {
        steps,
        hidden: h,
        reverse,
        gates: vec![0.0; steps * 4 * h],
        c: vec![0.0; steps * h],
        tanh_c: vec![0.0; steps * h],
        h: vec![0.0; steps * h],
    };
    let zeros = vec![0.0; h];
    let mut pre = vec![0.0; 4 * h];
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        let x = &xs[t * n_in..(t + 1) * n_in];
        let (h_prev, c_prev) = if s == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (&trace.h[(s - 1) * h..s * h], &trace.c[(s - 1) * h..s * h])
        };
        for r in 0..4 * h {
            pre[r] = bias[r] + dot(&w_ih[r * n_in..(r + 1) * n_in], x) + dot(&w_hh[r * h..(r + 1) * h], h_prev);
        }
        let gates = &mut trace.gates[s * 4 * h..(s + 1) * 4 * h];
        for j in 0..h {
            gates[j] = sigmoid(pre[j]);
            gates[h + j] = sigmoid(pre[h + j]);
            gates[2 * h + j] = pre[2 * h + j].tanh();
            gates[3 * h + j] = sigmoid(pre[3 * h + j]);
        }
        let mut c_new = vec![0.0; h];
        for j in 0..h {
            c_new[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
        }
        for j in 0..h {
            let tc = c_new[j].tanh();
            trace.tanh_c[s * h + j] = tc;
            trace.h[s * h + j] = gates[3 * h + j] * tc;
            trace.c[s * h + j] = c_new[j];
        }
    }
    trace
}

/// Backpropagates `dh` (gradient w.r.t. the emitted hidden states, time
/// order, `steps x H`) through one direction. Parameter gradients are added
/// into `grad`; when `dxs` is given, input gradients are added into it.
pub(crate) fn backward(
    params: &[f64],
    cell: &CellLayout,
    xs: &[f64],
    trace: &DirectionTrace,
    dh: &[f64],
    grad: &mut [f64],
    mut dxs: Option<&mut [f64]>,
) {
    let (n_in, h) = (cell.input, cell.hidden);
    let steps = trace.steps;
    let w_ih = &params[cell.w_ih..cell.w_ih + 4 * h * n_in];
    let w_hh = &params[cell.w_hh..cell.w_hh + 4 * h * h];

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];
    for s in (0..steps).rev() {
        let t = if trace.reverse { steps - 1 - s } else { s };
        let gates = &trace.gates[s * 4 * h..(s + 1) * 4 * h];
        let tanh_c = &trace.tanh_c[s * h..(s + 1) * h];
        let (h_prev, c_prev) = if s == 0 {
            (zeros.as_slice(), zeros.as_slice())
        } else {
            (&trace.h[(s - 1) * h..s * h], &trace.c[(s - 1) * h..s * h])
        };
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let dh_j = dh[t * h + j] + dh_next[j];
            let d_o = dh_j * tanh_c[j];
            let dc = dh_j * o * (1.0 - tanh_c[j] * tanh_c[j]) + dc_next[j];
            let d_f = dc * c_prev[j];
            let d_i = dc * g;
            let d_g = dc * i;
            dc_next[j] = dc * f;
            da[j] = d_i * i * (1.0 - i);
            da[h + j] = d_f * f * (1.0 - f);
            da[2 * h + j] = d_g * (1.0 - g * g);
            da[3 * h + j] = d_o * o * (1.0 - o);
        }
        let x = &xs[t * n_in..(t + 1) * n_in];
        dh_next.fill(0.0);
        for r in 0..4 * h {
            let d = da[r];
            if d == 0.0 {
                continue;
            }
            axpy(d, x, &mut grad[cell.w_ih + r * n_in..cell.w_ih + (r + 1) * n_in]);
            axpy(d, h_prev, &mut grad[cell.w_hh + r * h..cell.w_hh + (r + 1) * h]);
            grad[cell.bias + r] += d;
            axpy(d, &w_hh[r * h..(r + 1) * h], &mut dh_next);
            if let Some(dx) = dxs.as_deref_mut() {
                axpy(d, &w_ih[r * n_in..(r + 1) * n_in], &mut dx[t * n_in..(t + 1) * n_in]);
            }
        }
    }
}
