//! Small numeric kernels shared by the solvers: bracketing bisection,
//! compensated summation, and the 1-D interpolation/reconstruction stencils.

/// Bisection on `[lo, hi]`, requiring a sign change. Runs a fixed number of
/// halvings (interval shrinks by 2^-steps), then returns the midpoint.
pub fn bisect<F: Fn(f64) -> f64>(mut lo: f64, mut hi: f64, f: F, steps: usize) -> Option<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Neumaier compensated accumulator; keeps long mass/norm sums accurate to
/// a few ulps regardless of term count.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn ksum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Interpolation mode for the semi-Lagrangian foot-point evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpMode {
    Linear,
    Weno,
}

/// Evaluates the grid function `values` (nodes at `k * h`, k = 0..len-1) at
/// `pos = j + s` with integer part `j` and fraction `s` in [0, 1].
///
/// WENO mode blends the two quadratics on {j-1..j+1} and {j..j+2} with
/// smoothness-weighted coefficients; near the ends it falls back to linear.
/// `s == 0` short-circuits to the node value so zero-drift advection is the
/// identity to the bit.
pub fn interp_point(values: &[f64], j: usize, s: f64, mode: InterpMode) -> f64 {
    let n = values.len();
    debug_assert!(j < n);
    if s == 0.0 || j + 1 >= n {
        return values[j];
    }
    match mode {
        InterpMode::Linear => (1.0 - s) * values[j] + s * values[j + 1],
        InterpMode::Weno => {
            if j == 0 || j + 2 >= n {
                return (1.0 - s) * values[j] + s * values[j + 1];
            }
            let (fm, f0, f1, f2) = (values[j - 1], values[j], values[j + 1], values[j + 2]);
            // quadratic interpolants on the left/right 3-point stencils
            let p_l = f0 + s * (0.5 * (f1 - fm)) + s * s * (0.5 * (f1 - 2.0 * f0 + fm));
            let p_r = f0
                + s * (0.5 * (-f2 + 4.0 * f1 - 3.0 * f0))
                + s * s * (0.5 * (f2 - 2.0 * f1 + f0));
            // linear weights reproducing the 4-point cubic
            let c_l = (2.0 - s) / 3.0;
            let c_r = (1.0 + s) / 3.0;
            let beta_l = (f1 - 2.0 * f0 + fm).powi(2);
            let beta_r = (f2 - 2.0 * f1 + f0).powi(2);
            const EPS: f64 = 1e-6;
            let a_l = c_l / (EPS + beta_l).powi(2);
            let a_r = c_r / (EPS + beta_r).powi(2);
            let w = a_l / (a_l + a_r);
            w * p_l + (1.0 - w) * p_r
        }
    }
}

/// Face-value reconstruction for the finite-volume flux, upwind side below
/// the face (used with a nonnegative drift).
///
/// `cm, c0, cp` are the cell averages below-below, below, and above the
/// face; first-order returns the donor value `c0`, WENO blends the two
/// linear extrapolations (classic third-order upwind-biased weights).
pub fn face_value(cm: Option<f64>, c0: f64, cp: Option<f64>, mode: InterpMode) -> f64 {
    match mode {
        InterpMode::Linear => c0,
        InterpMode::Weno => {
            let (cm, cp) = match (cm, cp) {
                (Some(a), Some(b)) => (a, b),
                _ => return c0,
            };
            let p0 = 0.5 * c0 + 0.5 * cp;
            let p1 = -0.5 * cm + 1.5 * c0;
            let beta0 = (cp - c0).powi(2);
            let beta1 = (c0 - cm).powi(2);
            const EPS: f64 = 1e-6;
            let a0 = (2.0 / 3.0) / (EPS + beta0).powi(2);
            let a1 = (1.0 / 3.0) / (EPS + beta1).powi(2);
            let w0 = a0 / (a0 + a1);
            w0 * p0 + (1.0 - w0) * p1
        }
    }
}
