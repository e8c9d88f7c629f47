//! Diagonal state-space layer: one real scalar state per channel,
//! zero-order-hold discretization, executed as a linear-time recurrence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous-time parameters of `H` independent channels.
///
/// The effective state rate is `A = -exp(a_raw)` and the step size is
/// `Δ = exp(log_dt)`, so every reachable parameter value is stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmLayerParams {
    pub a_raw: Vec<f64>,
    pub log_dt: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub skip_d: Vec<f64>,
}

/// Per-channel discretized coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretized {
    /// `A`
    pub rate: f64,
    /// `Δ`
    pub dt: f64,
    /// `Ā = exp(ΔA)`
    pub a_bar: f64,
    /// `B̄ = ((Ā - 1) / A) b`
    pub b_bar: f64,
}

impl SsmLayerParams {
    pub fn zeros(width: usize) -> Self {
        SsmLayerParams {
            a_raw: vec![0.0; width],
            log_dt: vec![0.0; width],
            b: vec![0.0; width],
            c: vec![0.0; width],
            skip_d: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.a_raw.len()
    }

    pub fn discretize(&self, h: usize) -> Discretized {
        let rate = -self.a_raw[h].exp();
        let dt = self.log_dt[h].exp();
        let s = dt * rate;
        Discretized {
            rate,
            dt,
            a_bar: s.exp(),
            // expm1 keeps precision for tiny ΔA
            b_bar: s.exp_m1() / rate * self.b[h],
        }
    }
}

/// Runs the recurrence over `u` (row-major `L × H`):
///
/// `x_k = Ā x_{k-1} + B̄ u_k`, `y_k = c x_k + D u_k`, `x_0 = 0`.
///
/// Returns `(y, x)`; the state trace `x` feeds the backward pass.
pub fn scan_with_state(params: &SsmLayerParams, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let width = params.width();
    assert!(
        width > 0 && u.len().is_multiple_of(width),
        "input is not L x H"
    );
    let coeffs: Vec<Discretized> = (0..width).map(|h| params.discretize(h)).collect();
    let mut state = vec![0.0; width];
    let mut y = vec![0.0; u.len()];
    let mut trace = vec![0.0; u.len()];
    for ((u_row, y_row), x_row) in u
        .chunks_exact(width)
        .zip(y.chunks_exact_mut(width))
        .zip(trace.chunks_exact_mut(width))
    {
        for h in 0..width {
            let x = coeffs[h].a_bar * state[h] + coeffs[h].b_bar * u_row[h];
            state[h] = x;
            x_row[h] = x;
            y_row[h] = params.c[h] * x + params.skip_d[h] * u_row[h];
        }
    }
    (y, trace)
}

/// Output of the recurrence for a row-major `L × H` input, in `O(L·H)`.
pub fn ssm_scan(params: &SsmLayerParams, u: &[f64]) -> Result<Vec<f64>> {
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite scan input".into()));
    }
    let width = params.width();
    assert!(
        width > 0 && u.len().is_multiple_of(width),
        "input is not L x H"
    );
    let coeffs: Vec<Discretized> = (0..width).map(|h| params.discretize(h)).collect();
    let mut state = vec![0.0; width];
    let mut y = Vec::with_capacity(u.len());
    for u_row in u.chunks_exact(width) {
        for h in 0..width {
            state[h] = coeffs[h].a_bar * state[h] + coeffs[h].b_bar * u_row[h];
            y.push(params.c[h] * state[h] + params.skip_d[h] * u_row[h]);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence("non-finite scan output".into()));
    }
    Ok(y)
}

/// Gradients of one scan with respect to its input and parameters.
pub struct ScanGrads {
    pub du: Vec<f64>,
    pub params: SsmLayerParams,
}

/// Reverse-mode pass through [`scan_with_state`] given `dy`.
pub fn scan_backward(params: &SsmLayerParams, u: &[f64], state: &[f64], dy: &[f64]) -> ScanGrads {
    let width = params.width();
    let len = u.len() / width;
    let mut grads = SsmLayerParams::zeros(width);
    let mut du = vec![0.0; u.len()];
    for h in 0..width {
        let d = params.discretize(h);
        let mut adjoint = 0.0;
        let (mut g_abar, mut g_bbar, mut g_c, mut g_skip) = (0.0, 0.0, 0.0, 0.0);
        for k in (0..len).rev() {
            let i = k * width + h;
            g_c += dy[i] * state[i];
            g_skip += dy[i] * u[i];
            // adjoint of x_k collects the readout and the next step's carry
            adjoint = params.c[h] * dy[i] + d.a_bar * adjoint;
            let prev = if k == 0 { 0.0 } else { state[i - width] };
            g_abar += adjoint * prev;
            g_bbar += adjoint * u[i];
            du[i] = d.b_bar * adjoint + params.skip_d[h] * dy[i];
        }
        let s = d.dt * d.rate;
        let em1 = s.exp_m1();
        let b = params.b[h];
        // ∂Ā/∂a_raw = ∂Ā/∂log_dt = Ā·s
        let dabar = d.a_bar * s;
        let dbbar_da = b * (d.a_bar * s - em1) / d.rate;
        let dbbar_dlogdt = b * d.a_bar * d.dt;
        grads.a_raw[h] = g_abar * dabar + g_bbar * dbbar_da;
        grads.log_dt[h] = g_abar * dabar + g_bbar * dbbar_dlogdt;
        grads.b[h] = g_bbar * em1 / d.rate;
        grads.c[h] = g_c;
        grads.skip_d[h] = g_skip;
    }
    ScanGrads { du, params: grads }
}
