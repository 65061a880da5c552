use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use shapemeans::constraints::DomainGrid;

use crate::error::{Result, SimError};

/// How the `D1 x D2` grid of `(x1, x2)` cells is laid out as domains
/// `0..D`. Domain order drives both the constraint rows and the stratifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `d = (x2 − 1)·D1 + (x1 − 1)`: the grid factors are `(x2, x1)`.
    #[default]
    X1Fastest,
    /// `d = (x1 − 1)·D2 + (x2 − 1)`: the grid factors are `(x1, x2)`.
    X2Fastest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub d1: usize,
    pub d2: usize,
    pub n_per_domain: usize,
    pub sigma: f64,
    #[serde(default)]
    pub layout: Layout,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 || self.n_per_domain == 0 {
            return Err(SimError::Config("grid sizes and n_per_domain must be positive".into()));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(SimError::Config(format!("sigma must be a nonnegative number, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn n_domains(&self) -> usize {
        self.d1 * self.d2
    }

    /// Grid whose row-major flattening realises the layout. The `x1` factor
    /// is at [`Self::x1_axis`].
    pub fn grid(&self) -> DomainGrid {
        let sizes = match self.layout {
            Layout::X1Fastest => vec![self.d2, self.d1],
            Layout::X2Fastest => vec![self.d1, self.d2],
        };
        DomainGrid::new(sizes).expect("positive sizes")
    }

    pub fn x1_axis(&self) -> usize {
        match self.layout {
            Layout::X1Fastest => 1,
            Layout::X2Fastest => 0,
        }
    }

    pub fn x2_axis(&self) -> usize {
        1 - self.x1_axis()
    }

    /// 1-based `(x1, x2)` of domain `d`.
    pub fn levels(&self, d: usize) -> (usize, usize) {
        let l = self.grid().unflatten(d);
        (l[self.x1_axis()] + 1, l[self.x2_axis()] + 1)
    }

    /// Limiting means `μ(x1, x2)` in domain order.
    pub fn mu(&self) -> Vec<f64> {
        (0..self.n_domains())
            .map(|d| {
                let (x1, x2) = self.levels(d);
                mu(x1 as f64, x2 as f64, self.d1 as f64, self.d2 as f64)
            })
            .collect()
    }
}

/// The monotone surface `√(1 + 4x1/D1) + 4e^u / (1 + e^u)`, `u = 0.5 + 2x2/D2`.
pub fn mu(x1: f64, x2: f64, d1: f64, d2: f64) -> f64 {
    let u = 0.5 + 2.0 * x2 / d2;
    (1.0 + 4.0 * x1 / d1).sqrt() + 4.0 * u.exp() / (1.0 + u.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub spec: PopulationSpec,
    pub y: Vec<f64>,
    pub domain: Vec<usize>,
    /// Auxiliary stratification variable `σ·d/D + N(0, 1)`, `d` 1-based.
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// Realised domain means, the estimand.
    pub means: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `N_d / N`.
    pub fn relative_sizes(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.sizes.iter().map(|&s| s as f64 / n).collect()
    }
}

/// Draws `y_k = μ_d + σ·ε_k` for every unit, then every `ν_k`. Units are
/// stored domain by domain.
pub fn generate_population(spec: &PopulationSpec, rng: &mut ChaCha8Rng) -> Result<Population> {
    spec.validate()?;
    let nd = spec.n_domains();
    let mu = spec.mu();
    let total = nd * spec.n_per_domain;
    let domain: Vec<usize> = (0..total).map(|k| k / spec.n_per_domain).collect();
    let y: Vec<f64> = domain
        .iter()
        .map(|&d| {
            let e: f64 = rng.sample(StandardNormal);
            mu[d] + spec.sigma * e
        })
        .collect();
    let nu: Vec<f64> = domain
        .iter()
        .map(|&d| {
            let e: f64 = rng.sample(StandardNormal);
            spec.sigma * (d + 1) as f64 / nd as f64 + e
        })
        .collect();
    // accumulate deviations from μ_d so a noiseless domain averages to μ_d exactly
    let mut dev = vec![0.0; nd];
    for (&d, &v) in domain.iter().zip(&y) {
        dev[d] += v - mu[d];
    }
    let means: Vec<f64> = mu.iter().zip(&dev).map(|(m, s)| m + s / spec.n_per_domain as f64).collect();
    Ok(Population { spec: spec.clone(), y, domain, nu, mu, means, sizes: vec![spec.n_per_domain; nd] })
}
