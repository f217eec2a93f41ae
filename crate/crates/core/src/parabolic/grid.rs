use crate::error::{Error, Result};
use crate::network::StarNetwork;

pub const MIN_CELLS: usize = 4;
pub const MAX_CELLS: usize = 1_000_000;

/// How the spatial step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HRule {
    /// Fixed target spacing.
    Explicit(f64),
    /// `h = ε / c`, `c ≥ 4`.
    Ratio(f64),
}

impl Default for HRule {
    fn default() -> Self {
        HRule::Ratio(8.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub horizon: f64,
    pub h_rule: HRule,
    /// `None` picks `h / (2 max λ)`.
    pub dt: Option<f64>,
    /// Keep every `n`-th state (0 keeps none besides the final one).
    pub snapshot_every: usize,
}

impl SolverConfig {
    pub fn new(epsilon: f64, horizon: f64) -> Self {
        Self {
            epsilon,
            horizon,
            h_rule: HRule::default(),
            dt: None,
            snapshot_every: 0,
        }
    }

    pub fn with_h_rule(mut self, rule: HRule) -> Self {
        self.h_rule = rule;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_snapshots(mut self, every: usize) -> Self {
        self.snapshot_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} = {v} must be positive")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("horizon", self.horizon)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        match self.h_rule {
            HRule::Explicit(h) => positive("h", h),
            HRule::Ratio(c) if c >= 4.0 && c.is_finite() => Ok(()),
            HRule::Ratio(c) => Err(Error::InvalidConfig(format!("h ratio {c} must be at least 4"))),
        }
    }

    pub fn target_h(&self) -> f64 {
        match self.h_rule {
            HRule::Explicit(h) => h,
            HRule::Ratio(c) => self.epsilon / c,
        }
    }

    /// Step count and the step that lands exactly on the horizon.
    pub fn time_steps(&self, grid: &Grid, net: &StarNetwork) -> (usize, f64) {
        let max_speed = net.arcs().iter().map(|a| a.speed).fold(0.0, f64::max);
        let dt = self.dt.unwrap_or_else(|| grid.min_h() / (2.0 * max_speed));
        let n = (self.horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

/// Uniform grid on every arc; node `k` of arc `i` sits at `k h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cells: Vec<usize>,
    h: Vec<f64>,
}

impl Grid {
    pub fn from_cells(net: &StarNetwork, cells: &[usize]) -> Result<Self> {
        if cells.len() != net.len() {
            return Err(Error::DimensionMismatch {
                context: "grid cells per arc",
                expected: net.len(),
                found: cells.len(),
            });
        }
        if let Some(&n) = cells.iter().find(|&&n| !(MIN_CELLS..=MAX_CELLS).contains(&n)) {
            return Err(Error::InvalidConfig(format!(
                "cell count {n} outside [{MIN_CELLS}, {MAX_CELLS}]"
            )));
        }
        Ok(Self {
            cells: cells.to_vec(),
            h: net.arcs().iter().zip(cells).map(|(a, &n)| a.length / n as f64).collect(),
        })
    }

    /// Smallest cell counts with `h_i ≤ h`, clamped to `[4, 10⁶]`.
    pub fn with_spacing(net: &StarNetwork, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidConfig(format!("h = {h} must be positive")));
        }
        let cells: Vec<usize> = net
            .arcs()
            .iter()
            .map(|a| {
                let n = (a.length / h * (1.0 - 1e-12)).ceil();
                (n as usize).clamp(MIN_CELLS, MAX_CELLS)
            })
            .collect();
        Self::from_cells(net, &cells)
    }

    pub fn for_config(net: &StarNetwork, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Self::with_spacing(net, cfg.target_h())
    }

    pub fn n_arcs(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self, arc: usize) -> usize {
        self.cells[arc]
    }

    pub fn h(&self, arc: usize) -> f64 {
        self.h[arc]
    }

    pub fn min_h(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_h(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    pub fn x(&self, arc: usize, k: usize) -> f64 {
        k as f64 * self.h[arc]
    }

    pub fn total_nodes(&self) -> usize {
        self.cells.iter().map(|n| n + 1).sum()
    }

    /// Trapezoid weights: `h/2` at both ends, `h` inside.
    pub fn weight(&self, arc: usize, k: usize) -> f64 {
        if k == 0 || k == self.cells[arc] {
            0.5 * self.h[arc]
        } else {
            self.h[arc]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub t: f64,
    pub values: Vec<Vec<f64>>,
}

impl DiscreteState {
    pub fn new(t: f64, values: Vec<Vec<f64>>, grid: &Grid) -> Result<Self> {
        if values.len() != grid.n_arcs() {
            return Err(Error::DimensionMismatch {
                context: "state arcs",
                expected: grid.n_arcs(),
                found: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if v.len() != grid.cells(i) + 1 {
                return Err(Error::DimensionMismatch {
                    context: "state nodes on arc",
                    expected: grid.cells(i) + 1,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidField(format!("state on arc {i} is not finite")));
            }
        }
        Ok(Self { t, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            values: (0..grid.n_arcs()).map(|i| vec![0.0; grid.cells(i) + 1]).collect(),
        }
    }

    /// Samples `f(arc, x)` at every grid node.
    pub fn sample(grid: &Grid, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_arcs())
            .map(|i| (0..=grid.cells(i)).map(|k| f(i, grid.x(i, k))).collect())
            .collect();
        Self::new(0.0, values, grid)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn l1_norm(&self, grid: &Grid) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.iter().enumerate().map(|(k, x)| grid.weight(i, k) * x.abs()).sum::<f64>())
            .sum()
    }

    pub fn l1_distance(&self, other: &DiscreteState, grid: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| {
                a.iter()
                    .zip(b)
                    .enumerate()
                    .map(|(k, (x, y))| grid.weight(i, k) * (x - y).abs())
                    .sum::<f64>()
            })
            .sum()
    }
}
