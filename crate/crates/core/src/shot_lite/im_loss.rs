use crate::types::{FeatureMatrix, SoftPredictions};

/// Information-maximization loss and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ImLoss {
    pub value: f64,
    /// `N x C`, same layout as the predictions.
    pub grad_logits: FeatureMatrix,
}

#[inline]
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `L = mean_i H(p_i) + sum_c pbar_c log pbar_c`, where `pbar` is the mean prediction.
///
/// The first term rewards confident predictions, the second rewards a
/// diverse class marginal. With `g_ic = (log pbar_c - log p_ic) / N` the
/// gradient through the softmax is `p_ik (g_ik - sum_c p_ic g_ic)`.
pub fn im_loss(probs: &SoftPredictions) -> ImLoss {
    let p = probs.probs();
    let n = p.rows();
    let c = p.cols();
    let inv_n = 1.0 / n as f64;

    let mut mean = vec![0.0; c];
    for row in p.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let entropy: f64 = p.as_slice().iter().map(|&v| -xlogy(v, v)).sum::<f64>() * inv_n;
    let diversity: f64 = mean.iter().map(|&m| xlogy(m, m)).sum();

    let mut grad = vec![0.0; n * c];
    let mut pg = vec![0.0; c];
    for (row, out) in p.iter_rows().zip(grad.chunks_exact_mut(c)) {
        // pg_k = p_ik * g_ik
        for k in 0..c {
            pg[k] = (xlogy(row[k], mean[k]) - xlogy(row[k], row[k])) * inv_n;
        }
        let s: f64 = pg.iter().sum();
        for k in 0..c {
            out[k] = pg[k] - row[k] * s;
        }
    }
    ImLoss {
        value: entropy + diversity,
        grad_logits: FeatureMatrix::from_parts(n, c, grad),
    }
}
