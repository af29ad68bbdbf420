use serde::{Deserialize, Serialize};

use super::RelaxationError;

/// How the nodes of a [`TimeGrid`] were laid out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    /// `t_k = T (k/K)^exponent`, concentrating nodes at the `t = 0` singularity.
    Graded { exponent: f64 },
    /// Log-spaced nodes after a tiny first cell; resolution proportional to `t` until the
    /// step would exceed `h_max`.
    Geometric {
        per_decade: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_max: Option<f64>,
    },
    /// Explicit node list (refinements of graded grids, merged grids).
    Custom,
}

/// Strictly increasing time nodes starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    kind: GridKind,
}

const UNIFORM_RTOL: f64 = 1e-9;

impl TimeGrid {
    pub fn uniform(t_end: f64, steps: usize) -> Result<Self, RelaxationError> {
        if steps == 0 || !(t_end > 0.0) || !t_end.is_finite() {
            return Err(RelaxationError::InvalidGrid(format!(
                "uniform grid needs t_end > 0 and steps >= 1 (t_end = {t_end}, steps = {steps})"
            )));
        }
        let h = t_end / steps as f64;
        let nodes = (0..=steps).map(|k| k as f64 * h).collect();
        Ok(Self { nodes, kind: GridKind::Uniform })
    }

    /// Uniform grid with step `h` covering `[0, t_end]`; `t_end / h` is rounded to the nearest
    /// integer number of steps and `h` is kept exact.
    pub fn with_step(h: f64, t_end: f64) -> Result<Self, RelaxationError> {
        if !(h > 0.0) || !(t_end > 0.0) {
            return Err(RelaxationError::InvalidGrid(format!(
                "step and horizon must be positive (h = {h}, t_end = {t_end})"
            )));
        }
        let steps = (t_end / h).round().max(1.0) as usize;
        let nodes = (0..=steps).map(|k| k as f64 * h).collect();
        Ok(Self { nodes, kind: GridKind::Uniform })
    }

    pub fn graded(t_end: f64, steps: usize, exponent: f64) -> Result<Self, RelaxationError> {
        if !(exponent >= 1.0) {
            return Err(RelaxationError::InvalidGrid(format!(
                "grading exponent must be >= 1, got {exponent}"
            )));
        }
        let mut g = Self::uniform(t_end, steps)?;
        if exponent == 1.0 {
            return Ok(g);
        }
        let k = steps as f64;
        for (i, t) in g.nodes.iter_mut().enumerate() {
            *t = t_end * (i as f64 / k).powf(exponent);
        }
        g.nodes[steps] = t_end;
        g.kind = GridKind::Graded { exponent };
        Ok(g)
    }

    /// `0, t_first, t_first·10^(1/d), …` up to `t_end`, where `d = per_decade`.
    ///
    /// Every `t_first·10^k` lands on a node, so decade points such as `0.01, 0.1, 1, 10` are
    /// available for point evaluation when `t_first` is a power of ten.
    pub fn geometric(t_first: f64, t_end: f64, per_decade: usize) -> Result<Self, RelaxationError> {
        if !(t_first > 0.0) || !(t_end > t_first) || per_decade == 0 {
            return Err(RelaxationError::InvalidGrid(format!(
                "geometric grid needs 0 < t_first < t_end and per_decade >= 1 \
                 (t_first = {t_first}, t_end = {t_end}, per_decade = {per_decade})"
            )));
        }
        let decades = (t_end / t_first).log10();
        let count = (decades * per_decade as f64).ceil() as usize;
        let mut nodes = Vec::with_capacity(count + 2);
        nodes.push(0.0);
        for k in 0..=count {
            let t = t_first * 10f64.powf(k as f64 / per_decade as f64);
            if t >= t_end * (1.0 - 1e-12) {
                break;
            }
            nodes.push(t);
        }
        nodes.push(t_end);
        Ok(Self { nodes, kind: GridKind::Geometric { per_decade, h_max: None } })
    }

    /// [`TimeGrid::geometric`] with the step capped at `h_max`. Past the switch point the
    /// grid is uniform between consecutive powers of ten, so decade points stay exact.
    ///
    /// Capping matters for stiff modes: with `μh ≫ 1` the scheme is stable but outside
    /// its asymptotic error regime.
    pub fn geometric_capped(
        t_first: f64,
        t_end: f64,
        per_decade: usize,
        h_max: f64,
    ) -> Result<Self, RelaxationError> {
        if !(h_max > 0.0) {
            return Err(RelaxationError::InvalidGrid(format!("h_max must be positive, got {h_max}")));
        }
        let geo = Self::geometric(t_first, t_end, per_decade)?;
        let mut nodes = Vec::with_capacity(geo.len());
        for &t in geo.nodes() {
            if nodes.len() >= 2 && t - nodes[nodes.len() - 1] > h_max {
                break;
            }
            nodes.push(t);
        }
        let mut start = *nodes.last().unwrap();
        while start < t_end {
            let next_decade = 10f64.powf((start * (1.0 + 1e-9)).log10().floor() + 1.0);
            let stop = if next_decade >= t_end * (1.0 - 1e-12) { t_end } else { next_decade };
            let m = ((stop - start) / h_max).ceil().max(1.0) as usize;
            let h = (stop - start) / m as f64;
            for k in 1..m {
                nodes.push(start + k as f64 * h);
            }
            nodes.push(stop);
            start = stop;
        }
        validate_nodes(&nodes)?;
        Ok(Self { nodes, kind: GridKind::Geometric { per_decade, h_max: Some(h_max) } })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, RelaxationError> {
        validate_nodes(&nodes)?;
        let kind = if is_uniform(&nodes) { GridKind::Uniform } else { GridKind::Custom };
        Ok(Self { nodes, kind })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Number of nodes (cells + 1).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().expect("grid has at least two nodes")
    }

    /// The constant step of a uniform grid.
    pub fn step(&self) -> Option<f64> {
        match self.kind {
            GridKind::Uniform => Some(self.nodes[1] - self.nodes[0]),
            _ => None,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, GridKind::Uniform)
    }

    /// Every cell bisected. Nodes of `self` are the even nodes of the result.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.t_end());
        let kind = match self.kind {
            GridKind::Uniform => {
                // rebuild from the step so the refined grid is bitwise uniform
                let h = 0.5 * (self.nodes[1] - self.nodes[0]);
                for (k, t) in nodes.iter_mut().enumerate() {
                    *t = k as f64 * h;
                }
                GridKind::Uniform
            }
            _ => GridKind::Custom,
        };
        Self { nodes, kind }
    }

    /// Every other node, starting at 0. Returns `None` when fewer than two cells remain.
    pub fn coarsened(&self) -> Option<Self> {
        let nodes: Vec<f64> = self.nodes.iter().step_by(2).copied().collect();
        if nodes.len() < 2 {
            return None;
        }
        let kind = match self.kind {
            GridKind::Uniform => GridKind::Uniform,
            _ => GridKind::Custom,
        };
        Some(Self { nodes, kind })
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 1,
            Err(i) => {
                if t - self.nodes[i - 1] <= self.nodes[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

fn validate_nodes(nodes: &[f64]) -> Result<(), RelaxationError> {
    if nodes.len() < 2 {
        return Err(RelaxationError::InvalidGrid("a grid needs at least two nodes".into()));
    }
    if nodes[0] != 0.0 {
        return Err(RelaxationError::InvalidGrid(format!(
            "first node must be 0, got {}",
            nodes[0]
        )));
    }
    if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(RelaxationError::InvalidGrid(format!(
            "nodes must be finite and strictly increasing (violated at index {})",
            i + 1
        )));
    }
    Ok(())
}

fn is_uniform(nodes: &[f64]) -> bool {
    let h = nodes[1] - nodes[0];
    nodes
        .iter()
        .enumerate()
        .all(|(k, &t)| (t - k as f64 * h).abs() <= UNIFORM_RTOL * h * (k as f64).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_refine_and_coarsen_are_inverse() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 17);
        assert!(r.is_uniform());
        assert_eq!(r.coarsened().unwrap(), g);
    }

    #[test]
    fn graded_grid_clusters_at_zero() {
        let g = TimeGrid::graded(1.0, 10, 2.0).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert!((g.nodes()[1] - 0.01).abs() < 1e-15);
        assert_eq!(g.t_end(), 1.0);
        assert!(matches!(g.kind(), GridKind::Graded { .. }));
    }

    #[test]
    fn geometric_grid_hits_decades() {
        let g = TimeGrid::geometric(1e-4, 10.0, 20).unwrap();
        for target in [0.01, 0.1, 1.0, 10.0] {
            let i = g.nearest_index(target);
            assert!((g.nodes()[i] - target).abs() <= 1e-12 * target);
        }
    }

    #[test]
    fn capped_geometric_grid_limits_step_and_keeps_decades() {
        let g = TimeGrid::geometric_capped(1e-12, 10.0, 50, 0.02).unwrap();
        let max_step = g.nodes().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(max_step <= 0.02 * (1.0 + 1e-12));
        for target in [1e-12, 0.01, 0.1, 1.0, 10.0] {
            let i = g.nearest_index(target);
            assert!((g.nodes()[i] - target).abs() <= 1e-12 * target, "{target}");
        }
        assert_eq!(g.t_end(), 10.0);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(TimeGrid::from_nodes(vec![0.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 0.2]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.2, 0.2]).is_err());
        assert!(TimeGrid::graded(1.0, 4, 0.5).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 1.0]).unwrap().is_uniform());
    }
}
