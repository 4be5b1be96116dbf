//! Cosine similarity and the temperature-scaled InfoNCE objective.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::Real;
use crate::error::{Error, Result};

/// Norm floor applied before dividing in cosine similarity.
pub const COSINE_EPS: f64 = 1e-8;

pub fn cosine<T: Real>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    let eps = T::of(COSINE_EPS);
    let na = a.dot(&a).sqrt().max(eps);
    let nb = b.dot(&b).sqrt().max(eps);
    a.dot(&b) / (na * nb)
}

/// Rows scaled to unit norm (norms floored at [`COSINE_EPS`]), plus the
/// floored norms.
pub fn normalize_rows<T: Real>(x: ArrayView2<'_, T>) -> (Array2<T>, Array1<T>) {
    let eps = T::of(COSINE_EPS);
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(eps));
    let unit = &x / &norms.view().insert_axis(Axis(1));
    (unit, norms)
}

/// `s[i][j] = cosine(queries[i], keys[j])`.
pub fn similarity_matrix<T: Real>(
    queries: ArrayView2<'_, T>,
    keys: ArrayView2<'_, T>,
) -> Array2<T> {
    let (q, _) = normalize_rows(queries);
    let (k, _) = normalize_rows(keys);
    q.dot(&k.t())
}

fn check_batch<T>(q: &ArrayView2<'_, T>, k: &ArrayView2<'_, T>) -> Result<()> {
    if q.nrows() == 0 {
        return Err(Error::invalid("InfoNCE needs a batch of at least one pair"));
    }
    if q.dim() != k.dim() {
        return Err(Error::shape(format!(
            "query table {:?} and key table {:?} differ",
            q.dim(),
            k.dim()
        )));
    }
    Ok(())
}

fn log_sum_exp<T: Real>(xs: impl Iterator<Item = T> + Clone) -> T {
    let max = xs.clone().fold(T::neg_infinity(), |m, v| m.max(v));
    max + xs.map(|v| (v - max).exp()).sum::<T>().ln()
}

/// Mean over rows `i` of `-log softmax_j(s[i][j] / tau)[i]`, where row `i` of
/// `queries` is matched with row `i` of `keys`.
pub fn infonce<T: Real>(
    queries: ArrayView2<'_, T>,
    keys: ArrayView2<'_, T>,
    tau: f64,
) -> Result<T> {
    check_batch(&queries, &keys)?;
    let sim = similarity_matrix(queries, keys);
    let inv_tau = T::of(1.0 / tau);
    let b = sim.nrows();
    let total: T = (0..b)
        .map(|i| {
            let row = sim.row(i);
            log_sum_exp(row.iter().map(|&s| s * inv_tau)) - sim[[i, i]] * inv_tau
        })
        .sum();
    Ok(total / T::of(b as f64))
}

/// `infonce(a, b) + infonce(b, a)`.
pub fn symmetric_loss<T: Real>(a: ArrayView2<'_, T>, b: ArrayView2<'_, T>, tau: f64) -> Result<T> {
    Ok(infonce(a, b, tau)? + infonce(b, a, tau)?)
}

/// Gradient of `x / max(|x|, eps)` pulled back to `x`, row by row.
fn normalize_backward<T: Real>(
    unit: &Array2<T>,
    norms: &Array1<T>,
    dunit: &Array2<T>,
) -> Array2<T> {
    let eps = T::of(COSINE_EPS);
    let mut dx = Array2::zeros(dunit.raw_dim());
    for i in 0..unit.nrows() {
        let u = unit.row(i);
        let du = dunit.row(i);
        let n = norms[i];
        let mut out = dx.row_mut(i);
        if n > eps {
            let proj = u.dot(&du);
            for ((o, &uj), &gj) in out.iter_mut().zip(u.iter()).zip(du.iter()) {
                *o = (gj - uj * proj) / n;
            }
        } else {
            // floored norm is a constant, so the map is linear here
            out.assign(&(&du / eps));
        }
    }
    dx
}

/// Symmetric loss together with its gradients with respect to both tables.
pub fn symmetric_loss_with_grad<T: Real>(
    a: ArrayView2<'_, T>,
    b: ArrayView2<'_, T>,
    tau: f64,
) -> Result<(T, Array2<T>, Array2<T>)> {
    check_batch(&a, &b)?;
    let (ua, na) = normalize_rows(a);
    let (ub, nb) = normalize_rows(b);
    let logits = ua.dot(&ub.t()) * T::of(1.0 / tau);
    let n = logits.nrows();
    let nf = T::of(n as f64);

    // a -> b: softmax along rows; b -> a: softmax along columns.
    let mut p_row = logits.clone();
    super::attention::softmax_rows(&mut p_row);
    let mut p_col = logits.t().to_owned();
    super::attention::softmax_rows(&mut p_col);
    let p_col = p_col.reversed_axes();

    let forward = (0..n)
        .map(|i| log_sum_exp(logits.row(i).iter().copied()) - logits[[i, i]])
        .sum::<T>();
    let backward = (0..n)
        .map(|j| log_sum_exp(logits.column(j).iter().copied()) - logits[[j, j]])
        .sum::<T>();
    let loss = (forward + backward) / nf;

    let mut dlogits = &p_row + &p_col;
    for i in 0..n {
        dlogits[[i, i]] -= T::of(2.0);
    }
    let dsim = dlogits * T::of(1.0 / tau) / nf;
    let dua = dsim.dot(&ub);
    let dub = dsim.t().dot(&ua);
    Ok((
        loss,
        normalize_backward(&ua, &na, &dua),
        normalize_backward(&ub, &nb, &dub),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cosine_basics() {
        let x = array![0.3f64, -1.2, 2.0];
        assert!((cosine(x.view(), x.view()) - 1.0).abs() < 1e-12);
        let neg = -&x;
        assert!((cosine(x.view(), neg.view()) + 1.0).abs() < 1e-12);
        let e1 = array![1.0f64, 0.0];
        let e2 = array![0.0f64, 1.0];
        assert_eq!(cosine(e1.view(), e2.view()), 0.0);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        let z = array![0.0f64, 0.0];
        let x = array![1.0f64, 2.0];
        assert_eq!(cosine(z.view(), x.view()), 0.0);
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let a = array![[0.1f64, 0.7, -0.2]];
        let b = array![[-1.0f64, 0.2, 0.3]];
        assert_eq!(infonce(a.view(), b.view(), 0.03).unwrap(), 0.0);
        assert_eq!(symmetric_loss(a.view(), b.view(), 0.03).unwrap(), 0.0);
    }

    #[test]
    fn identical_rows_give_log_b() {
        let a = Array2::from_shape_fn((5, 3), |(_, j)| j as f64 + 1.0);
        let l = infonce(a.view(), a.view(), 0.03).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_errors() {
        let a = Array2::<f64>::zeros((0, 3));
        assert!(infonce(a.view(), a.view(), 0.1).is_err());
    }

    #[test]
    fn grad_version_reports_same_value() {
        let a = array![[0.1f64, 0.7, -0.2], [0.5, 0.5, 0.1], [-0.3, 0.2, 0.9]];
        let b = array![[1.0f64, 0.2, 0.3], [0.0, -0.4, 0.8], [0.6, 0.6, -0.1]];
        let (l, _, _) = symmetric_loss_with_grad(a.view(), b.view(), 0.03).unwrap();
        let want = symmetric_loss(a.view(), b.view(), 0.03).unwrap();
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn directions_differ() {
        let a = array![[1.0f64, 0.0], [0.9, 0.1], [0.0, 1.0]];
        let b = array![[1.0f64, 0.1], [0.0, 1.0], [0.2, 1.0]];
        let ab = infonce(a.view(), b.view(), 0.5).unwrap();
        let ba = infonce(b.view(), a.view(), 0.5).unwrap();
        assert!((ab - ba).abs() > 1e-6);
    }
}
