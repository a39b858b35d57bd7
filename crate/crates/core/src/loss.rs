//! Pairwise ranking losses `l(u, v)` where `u` is the score of the item that
//! should rank higher.

/// A differentiable pairwise surrogate.
pub trait PairwiseLoss: Send + Sync {
    fn name(&self) -> &'static str;

    fn value(&self, u: f64, v: f64) -> f64;

    /// Partial derivatives `(d/du, d/dv)`.
    fn grads(&self, u: f64, v: f64) -> (f64, f64);
}

/// `l(u, v) = (1 - u + v)^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SquarePairLoss;

impl PairwiseLoss for SquarePairLoss {
    fn name(&self) -> &'static str {
        "square"
    }

    fn value(&self, u: f64, v: f64) -> f64 {
        pair_loss(u, v)
    }

    fn grads(&self, u: f64, v: f64) -> (f64, f64) {
        pair_loss_grads(u, v)
    }
}

pub fn pair_loss(u: f64, v: f64) -> f64 {
    let r = 1.0 - u + v;
    r * r
}

pub fn pair_loss_grads(u: f64, v: f64) -> (f64, f64) {
    let r = 2.0 * (1.0 - u + v);
    (-r, r)
}

/// `(1 - sign(u - v)) / 2`, with `sign(0) = 0`.
pub fn zero_one_loss(u: f64, v: f64) -> f64 {
    if u > v {
        0.0
    } else if u < v {
        1.0
    } else {
        0.5
    }
}

/// Derivative weights of one `(p, n, u)` triplet on the feature (or kernel)
/// slices of its three points.
///
/// The six partial derivatives come from three loss evaluations on the pairs
/// `(f_p, f_n)`, `(f_p, f_u)` and `(f_u, f_n)`; they are grouped by the point
/// they multiply:
///
/// ```text
/// positive  = gamma * l1 + (1 - gamma) * l3
/// negative  = gamma * l2 + (1 - gamma) * l6
/// unlabeled = (1 - gamma) * (l4 + l5)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletWeights {
    pub positive: f64,
    pub negative: f64,
    pub unlabeled: f64,
}

impl TripletWeights {
    pub fn new(loss: &dyn PairwiseLoss, f_pos: f64, f_neg: f64, f_unl: f64, gamma: f64) -> Self {
        let (l1, l2) = loss.grads(f_pos, f_neg);
        let (l3, l4) = loss.grads(f_pos, f_unl);
        let (l5, l6) = loss.grads(f_unl, f_neg);
        let rest = 1.0 - gamma;
        Self {
            positive: gamma * l1 + rest * l3,
            negative: gamma * l2 + rest * l6,
            unlabeled: rest * (l4 + l5),
        }
    }
}

/// Composite PNU surrogate on one triplet:
/// `gamma * l(p, n) + (1 - gamma) * (l(p, u) + l(u, n) - 1/2)`.
pub fn triplet_risk(
    loss: &dyn PairwiseLoss,
    f_pos: f64,
    f_neg: f64,
    f_unl: f64,
    gamma: f64,
) -> f64 {
    gamma * loss.value(f_pos, f_neg)
        + (1.0 - gamma) * (loss.value(f_pos, f_unl) + loss.value(f_unl, f_neg) - 0.5)
}
