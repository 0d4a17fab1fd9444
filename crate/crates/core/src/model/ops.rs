use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::params::Float;

pub const LN_EPS: f64 = 1e-5;

/// Row-wise normalization state kept for the backward pass.
#[derive(Clone, Debug)]
pub struct NormCache<F> {
    pub xhat: Array2<F>,
    pub rstd: Array1<F>,
}

pub fn layer_norm<F: Float>(x: &Array2<F>, gamma: &Array1<F>, beta: &Array1<F>) -> (Array2<F>, NormCache<F>) {
    let n = F::of(x.ncols() as f64);
    let eps = F::of(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (mut row, r) in xhat.rows_mut().into_iter().zip(rstd.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().fold(F::zero(), |acc, &v| acc + v * v) / n;
        *r = F::one() / (var + eps).sqrt();
        let s = *r;
        row.mapv_inplace(|v| v * s);
    }
    let y = &xhat * gamma + beta;
    (y, NormCache { xhat, rstd })
}

/// Returns the input gradient and accumulates into `dgamma`/`dbeta`.
pub fn layer_norm_backward<F: Float>(
    dy: &Array2<F>,
    cache: &NormCache<F>,
    gamma: &Array1<F>,
    dgamma: &mut Array1<F>,
    dbeta: &mut Array1<F>,
) -> Array2<F> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let n = F::of(dy.ncols() as f64);
    let mut dx = dy * gamma;
    for ((mut row, xhat), &r) in dx.rows_mut().into_iter().zip(cache.xhat.rows()).zip(&cache.rstd) {
        let mean_d = row.sum() / n;
        let mean_dx = row.iter().zip(xhat).fold(F::zero(), |acc, (&a, &b)| acc + a * b) / n;
        Zip::from(&mut row).and(&xhat).for_each(|d, &h| *d = r * (*d - mean_d - h * mean_dx));
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// `tanh` through a single exponential; saturates cleanly at both ends.
fn fast_tanh<F: Float>(z: F) -> F {
    let two = F::of(2.0);
    F::one() - two / ((two * z).exp() + F::one())
}

/// Tanh approximation of GELU. Also returns the inner `tanh` values, which
/// [`gelu_backward`] reuses.
pub fn gelu<F: Float>(u: &Array2<F>) -> (Array2<F>, Array2<F>) {
    let (c, a, half) = (F::of(GELU_C), F::of(GELU_A), F::of(0.5));
    let t = u.mapv(|x| fast_tanh(c * (x + a * x * x * x)));
    let mut g = u.clone();
    Zip::from(&mut g).and(&t).for_each(|x, &t| *x = half * *x * (F::one() + t));
    (g, t)
}

pub fn gelu_backward<F: Float>(u: &Array2<F>, t: &Array2<F>, dg: &Array2<F>) -> Array2<F> {
    let (c, a, half, three) = (F::of(GELU_C), F::of(GELU_A), F::of(0.5), F::of(3.0));
    let mut out = dg.clone();
    Zip::from(&mut out).and(u).and(t).for_each(|d, &x, &t| {
        let deriv = half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + three * a * x * x);
        *d = *d * deriv;
    });
    out
}

/// In-place softmax over each row; entries equal to `-inf` get weight 0.
pub fn softmax_rows<F: Float>(x: &mut Array2<F>) {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
}

/// Numerically stable `log(sum(exp(x)))`.
pub fn log_sum_exp<F: Float>(x: ArrayView1<F>) -> F {
    let max = x.iter().cloned().fold(F::neg_infinity(), F::max);
    max + x.iter().fold(F::zero(), |acc, &v| acc + (v - max).exp()).ln()
}

pub fn softmax<F: Float>(x: ArrayView1<F>) -> Array1<F> {
    let lse = log_sum_exp(x);
    x.mapv(|v| (v - lse).exp())
}

/// `x @ w + b`.
pub fn affine<F: Float>(x: &ArrayView2<F>, w: &Array2<F>, b: &Array1<F>) -> Array2<F> {
    x.dot(w) + b
}

/// Backward of [`affine`]: accumulates weight/bias gradients and returns `dx`.
pub fn affine_backward<F: Float>(
    x: &ArrayView2<F>,
    w: &Array2<F>,
    dy: &Array2<F>,
    dw: &mut Array2<F>,
    db: &mut Array1<F>,
) -> Array2<F> {
    ndarray::linalg::general_mat_mul(F::one(), &x.t(), dy, F::one(), dw);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn layer_norm_rows_are_standardized() {
        let x: Array2<f64> = array![[1.0, 2.0, 3.0, 4.0], [-1.0, 0.0, 5.0, 2.0]];
        let (y, _) = layer_norm(&x, &Array1::ones(4), &Array1::zeros(4));
        for row in y.rows() {
            assert!(row.sum().abs() < 1e-12);
            let var = row.mapv(|v| v * v).sum() / 4.0;
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        let u: Array2<f64> = array![[-3.0, -0.5, 0.0, 0.7, 2.5]];
        let (_, t) = gelu(&u);
        let d = gelu_backward(&u, &t, &Array2::ones((1, 5)));
        let h = 1e-6;
        let num = (gelu(&(&u + h)).0 - gelu(&(&u - h)).0) / (2.0 * h);
        for (a, b) in d.iter().zip(num.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn tanh_through_exp_matches_std() {
        for x in [-40.0, -3.0, -0.2, -1e-9, 0.0, 1e-9, 0.7, 5.0, 40.0f64] {
            assert!((fast_tanh(x) - x.tanh()).abs() < 1e-15, "{x}");
        }
        assert_eq!(fast_tanh(100.0f32), 1.0);
        assert_eq!(fast_tanh(-100.0f32), -1.0);
    }

    #[test]
    fn masked_softmax_ignores_neg_inf() {
        let mut x = array![[1.0, f64::NEG_INFINITY, 1.0]];
        softmax_rows(&mut x);
        assert_eq!(x, array![[0.5, 0.0, 0.5]]);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let x: Array1<f64> = array![1000.0, 1000.0];
        assert!((log_sum_exp(x.view()) - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
