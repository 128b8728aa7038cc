use serde::Serialize;

use super::grid::UtilityGrid;

/// Grid values of the upper boundary `F`, linearly interpolated between
/// nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction {
    pub grid: UtilityGrid,
    pub values: Vec<f64>,
    /// Number of sweeps used to produce `values`.
    pub iterations: usize,
    /// Contraction bound `delta / (1 - delta) * last sup-norm change` on the
    /// distance from `values` to the fixed point on the grid.
    pub error_bound: f64,
}

impl ValueFunction {
    pub fn new(grid: UtilityGrid, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len());
        ValueFunction {
            grid,
            values,
            iterations: 0,
            error_bound: 0.0,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        interpolate(&self.grid, &self.values, u)
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// `(left node, right node, slope)` for each grid interval.
    pub fn slopes(&self) -> Vec<(f64, f64, f64)> {
        let x = self.grid.nodes();
        let f = &self.values;
        (0..x.len() - 1)
            .map(|i| (x[i], x[i + 1], (f[i + 1] - f[i]) / (x[i + 1] - x[i])))
            .collect()
    }

    /// `(node, second difference)` at interior nodes: the slope change
    /// across the node scaled by the nominal step, so on a uniform grid this
    /// is `F[i+1] - 2 F[i] + F[i-1]`.
    pub fn second_differences(&self) -> Vec<(f64, f64)> {
        let s = self.slopes();
        let h = self.grid.step();
        (1..s.len())
            .map(|i| (s[i].0, (s[i].2 - s[i - 1].2) * h))
            .collect()
    }

    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn interpolate(grid: &UtilityGrid, values: &[f64], u: f64) -> f64 {
    let (i, t) = grid.locate(u);
    if t == 0.0 {
        values[i]
    } else {
        (1.0 - t) * values[i] + t * values[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_linearly() {
        let g = UtilityGrid::uniform(2.0, 3).unwrap();
        let f = ValueFunction::new(g, vec![0.0, 1.0, 0.0]);
        assert_eq!(f.eval(0.5), 0.5);
        assert_eq!(f.eval(1.5), 0.5);
        assert_eq!(f.eval(2.0), 0.0);
        let sd = f.second_differences();
        assert_eq!(sd, vec![(1.0, -2.0)]);
    }
}
