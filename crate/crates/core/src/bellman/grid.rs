use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DerivedQuantities;

/// Nodes on `[0, hi]`: uniform with step `hi / (n - 1)`, except that each
/// anchor is moved onto its nearest node (or inserted when that node is
/// already taken).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtilityGrid {
    hi: f64,
    step: f64,
    nodes: Vec<f64>,
}

impl UtilityGrid {
    pub fn uniform(hi: f64, n: usize) -> Result<Self> {
        Self::with_anchors(hi, n, &[])
    }

    pub fn with_anchors(hi: f64, n: usize, anchors: &[f64]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!(
                "grid needs at least 2 nodes, got {n}"
            )));
        }
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(Error::Domain(format!(
                "grid upper end {hi} must be positive"
            )));
        }
        let step = hi / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        nodes[n - 1] = hi;
        let mut claimed = vec![false; n];
        claimed[0] = true;
        claimed[n - 1] = true;
        let mut extra = Vec::new();
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * hi;
        for &a in anchors {
            if !(a > 0.0 && a < hi) || same(a, 0.0) || same(a, hi) {
                continue;
            }
            let i = ((a / step).round() as usize).min(n - 1);
            if same(nodes[i], a) {
                claimed[i] = true;
            } else if !claimed[i] {
                nodes[i] = a;
                claimed[i] = true;
            } else if !extra.iter().any(|&e| same(e, a)) {
                extra.push(a);
            }
        }
        nodes.extend(extra);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| same(*a, *b));
        Ok(UtilityGrid { hi, step, nodes })
    }

    /// Grid on `[0, U_bar]` with every kink and region boundary of the
    /// value function as a node.
    pub fn for_model(dq: &DerivedQuantities, n: usize) -> Result<Self> {
        dq.require_nontrivial()?;
        Self::with_anchors(dq.u_bar, n, &Self::anchors(dq))
    }

    pub fn anchors(dq: &DerivedQuantities) -> [f64; 6] {
        [
            dq.u_p,
            dq.u_i,
            dq.u_r,
            dq.u_r_lo,
            dq.u_bar - dq.x_delta,
            dq.x_delta,
        ]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Nominal (uniform) spacing.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Index of the node equal to `u` (to rounding), if any.
    pub fn index_of(&self, u: f64) -> Option<usize> {
        let (i, t) = self.locate(u);
        if t <= 1e-12 {
            Some(i)
        } else if t >= 1.0 - 1e-12 {
            Some(i + 1)
        } else {
            None
        }
    }

    /// Returns `(i, t)` with `u ≈ (1 - t) nodes[i] + t nodes[i + 1]`, after
    /// clamping `u` to `[0, hi]`. `i` is at most `len - 2`.
    pub fn locate(&self, u: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let u = u.clamp(0.0, self.hi);
        let mut i = ((u / self.step) as usize).min(n - 2);
        while i > 0 && self.nodes[i] > u {
            i -= 1;
        }
        while i < n - 2 && self.nodes[i + 1] < u {
            i += 1;
        }
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let t = if b > a {
            ((u - a) / (b - a)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (i, t)
    }
}
