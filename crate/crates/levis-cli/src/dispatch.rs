//! Synthetic economic-dispatch dataset: demands drawn around a nominal point,
//! generation assigned by merit order with minimum-output floors.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use anyhow::{bail, ensure, Result};

/// Generator limits, nominal demand, and sampling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchConfig {
    /// Ascending merit order: cheaper generators fill first.
    pub costs: Vec<f64>,
    /// (min, max) output per generator, in MW.
    pub limits: Vec<(f64, f64)>,
    /// Nominal demand per load, in MW.
    pub nominal_demand: Vec<f64>,
    /// Relative uniform perturbation of each demand.
    pub noise: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            costs: vec![1.0, 2.0, 3.0],
            limits: vec![(30.0, 100.0), (60.0, 200.0), (30.0, 100.0)],
            nominal_demand: vec![125.0, 90.0, 100.0],
            noise: 0.10,
            samples: 1000,
            seed: 0,
        }
    }
}

impl DispatchConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.costs.len() == self.limits.len(),
            "need one cost per generator"
        );
        ensure!(!self.nominal_demand.is_empty(), "no loads configured");
        for &(lo, hi) in &self.limits {
            ensure!(lo > 0.0 && hi >= lo, "generator limits must be positive and ordered");
        }
        let cap: f64 = self.limits.iter().map(|l| l.1).sum();
        let max_demand: f64 = self.nominal_demand.iter().map(|d| d * (1.0 + self.noise)).sum();
        ensure!(
            cap >= max_demand,
            "total capacity {cap} cannot cover the maximum demand {max_demand}"
        );
        let floor: f64 = self.limits.iter().map(|l| l.0).sum();
        let min_demand: f64 = self.nominal_demand.iter().map(|d| d * (1.0 - self.noise)).sum();
        ensure!(
            floor <= min_demand,
            "minimum outputs {floor} exceed the minimum demand {min_demand}"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn output_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.y.len())
    }
}

/// Merit-order fill: every generator starts at its minimum, then the demand
/// remainder goes to the cheapest available headroom. The output sums to the
/// total demand and respects the limits componentwise.
pub fn dispatch(cfg: &DispatchConfig, total_demand: f64) -> Result<Vec<f64>> {
    let floor: f64 = cfg.limits.iter().map(|l| l.0).sum();
    let cap: f64 = cfg.limits.iter().map(|l| l.1).sum();
    if total_demand < floor - 1e-9 || total_demand > cap + 1e-9 {
        bail!("demand {total_demand} outside dispatchable range [{floor}, {cap}]");
    }
    let mut order: Vec<usize> = (0..cfg.costs.len()).collect();
    order.sort_by(|&a, &b| cfg.costs[a].total_cmp(&cfg.costs[b]).then(a.cmp(&b)));
    let mut y: Vec<f64> = cfg.limits.iter().map(|l| l.0).collect();
    let mut remaining = total_demand - floor;
    for g in order {
        let headroom = cfg.limits[g].1 - cfg.limits[g].0;
        let take = headroom.min(remaining).max(0.0);
        y[g] += take;
        remaining -= take;
        if remaining <= 0.0 {
            break;
        }
    }
    Ok(y)
}

/// Draw demand vectors uniformly in `nominal·(1 ± noise)` and dispatch each;
/// infeasible totals are resampled.
pub fn datagen_dispatch(cfg: &DispatchConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let floor: f64 = cfg.limits.iter().map(|l| l.0).sum();
    let cap: f64 = cfg.limits.iter().map(|l| l.1).sum();
    let mut samples = Vec::with_capacity(cfg.samples);
    while samples.len() < cfg.samples {
        let x: Vec<f64> = cfg
            .nominal_demand
            .iter()
            .map(|&d| d * (1.0 + cfg.noise * rng.gen_range(-1.0..=1.0)))
            .collect();
        let total: f64 = x.iter().sum();
        if total < floor || total > cap {
            continue;
        }
        let y = dispatch(cfg, total)?;
        samples.push(Sample { x, y });
    }
    Ok(Dataset { samples })
}

/// The demand box spanned by the generator's sampling range, handy as the
/// default verification domain for trained dispatch networks.
pub fn demand_box(cfg: &DispatchConfig) -> (Array1<f64>, Array1<f64>) {
    let lower = Array1::from_iter(cfg.nominal_demand.iter().map(|&d| d * (1.0 - cfg.noise)));
    let upper = Array1::from_iter(cfg.nominal_demand.iter().map(|&d| d * (1.0 + cfg.noise)));
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merit_order_fill_hand_checked() {
        let cfg = DispatchConfig::default();
        // Demand (125, 90, 100): g1 maxed, g2 takes the rest, g3 at floor.
        let y = dispatch(&cfg, 315.0).unwrap();
        assert_eq!(y, vec![100.0, 185.0, 30.0]);
        // All at minimum.
        assert_eq!(dispatch(&cfg, 120.0).unwrap(), vec![30.0, 60.0, 30.0]);
        // All at maximum.
        assert_eq!(dispatch(&cfg, 400.0).unwrap(), vec![100.0, 200.0, 100.0]);
        // Out of range.
        assert!(dispatch(&cfg, 119.0).is_err());
        assert!(dispatch(&cfg, 401.0).is_err());
    }

    #[test]
    fn generated_data_balances_and_respects_limits() {
        let cfg = DispatchConfig {
            samples: 400,
            seed: 9,
            ..Default::default()
        };
        let data = datagen_dispatch(&cfg).unwrap();
        assert_eq!(data.samples.len(), 400);
        for s in &data.samples {
            let tx: f64 = s.x.iter().sum();
            let ty: f64 = s.y.iter().sum();
            assert!((tx - ty).abs() <= 1e-9, "imbalance {tx} vs {ty}");
            for (g, &(lo, hi)) in s.y.iter().zip(cfg.limits.iter()) {
                assert!(*g >= lo - 1e-12 && *g <= hi + 1e-12);
            }
            for (d, &nom) in s.x.iter().zip(cfg.nominal_demand.iter()) {
                assert!(*d >= nom * 0.9 - 1e-12 && *d <= nom * 1.1 + 1e-12);
            }
        }
    }

    #[test]
    fn datagen_is_deterministic() {
        let cfg = DispatchConfig {
            samples: 50,
            seed: 4,
            ..Default::default()
        };
        let a = datagen_dispatch(&cfg).unwrap().to_json();
        let b = datagen_dispatch(&cfg).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_config_is_rejected() {
        let cfg = DispatchConfig {
            limits: vec![(30.0, 40.0), (30.0, 40.0), (30.0, 40.0)],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
