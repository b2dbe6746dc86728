use std::collections::HashMap;

use super::beliefs::CoveringSet;
use super::ExactError;
use crate::envs::tabular::TabularPomdp;
use crate::pomdp::Pomdp;

const MAX_GRID_POINTS: usize = 500_000;

/// Optimal values from value iteration on a regular grid over the belief
/// simplex, with Freudenthal (barycentric) interpolation between grid
/// points. With two states this is plain linear interpolation.
#[derive(Debug, Clone)]
pub struct GridOracle {
    model: TabularPomdp,
    resolution: u32,
    index: HashMap<Vec<u32>, usize>,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

/// Grid spacing used when none is given: 0.01 for two states, 0.05 for
/// three, 0.1 beyond.
pub fn default_spacing(n_states: usize) -> f64 {
    match n_states {
        0..=2 => 0.01,
        3 => 0.05,
        _ => 0.1,
    }
}

/// Runs grid value iteration to a sup-norm residual of `1e-10`.
pub fn oracle_qstar(model: &TabularPomdp, spacing: f64) -> Result<GridOracle, ExactError> {
    if !(spacing > 0.0 && spacing <= 1.0) {
        return Err(ExactError::Domain(format!("grid spacing {spacing} outside (0, 1]")));
    }
    let m = (1.0 / spacing).round().max(1.0) as u32;
    let n = model.n_states();
    let mut counts = Vec::new();
    compositions(n, m, &mut Vec::with_capacity(n), &mut counts)?;
    let index: HashMap<Vec<u32>, usize> = counts.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let points: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| c.iter().map(|&x| x as f64 / m as f64).collect())
        .collect();
    let mut oracle = GridOracle {
        model: model.clone(),
        resolution: m,
        index,
        points,
        values: Vec::new(),
    };

    // Per grid point and action: reward and (probability, interpolation) pairs.
    struct Backup {
        reward: f64,
        next: Vec<(f64, Vec<(usize, f64)>)>,
    }
    let mut table: Vec<Vec<Backup>> = Vec::with_capacity(oracle.points.len());
    for g in &oracle.points {
        let mut row = Vec::with_capacity(model.n_actions());
        for a in 0..model.n_actions() {
            let mut next = Vec::new();
            for (o, &p) in model.obs_distribution(g, a).iter().enumerate() {
                if p > 0.0 {
                    let post = model.tau(g, a, o).map_err(|_| ExactError::ZeroProbability)?;
                    next.push((p, oracle.interpolation(&post)));
                }
            }
            row.push(Backup {
                reward: model.expected_reward(g, a),
                next,
            });
        }
        table.push(row);
    }

    let gamma = model.discount();
    let mut v = vec![0.0; oracle.points.len()];
    let max_iter = 1_000_000;
    for _ in 0..max_iter {
        let mut residual: f64 = 0.0;
        let fresh: Vec<f64> = table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|bk| {
                        bk.reward
                            + gamma
                                * bk.next
                                    .iter()
                                    .map(|(p, w)| p * w.iter().map(|&(i, x)| x * v[i]).sum::<f64>())
                                    .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for (old, new) in v.iter().zip(&fresh) {
            residual = residual.max((old - new).abs());
        }
        v = fresh;
        if residual < 1e-10 {
            oracle.values = v;
            return Ok(oracle);
        }
    }
    Err(ExactError::NoConvergence(max_iter))
}

fn compositions(parts: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) -> Result<(), ExactError> {
    if prefix.len() + 1 == parts {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        if out.len() > MAX_GRID_POINTS {
            return Err(ExactError::Domain(format!(
                "oracle grid exceeds {MAX_GRID_POINTS} points"
            )));
        }
        return Ok(());
    }
    for c in (0..=total).rev() {
        prefix.push(c);
        compositions(parts, total - c, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

impl GridOracle {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid points with positive barycentric weight around `b`.
    fn interpolation(&self, b: &[f64]) -> Vec<(usize, f64)> {
        let n = b.len();
        if n == 1 {
            return vec![(0, 1.0)];
        }
        let m = self.resolution as f64;
        // Cumulative coordinates y_i = m * sum_{j >= i} b_j, y_0 = m.
        let mut y = vec![0.0; n];
        let mut acc = 0.0;
        for i in (1..n).rev() {
            acc += m * b[i].max(0.0);
            y[i] = acc;
        }
        y[0] = m;
        for i in 1..n {
            y[i] = y[i].min(y[i - 1]);
        }
        let base: Vec<i64> = y.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, f)| v - *f as f64).collect();
        let mut order: Vec<usize> = (1..n).collect();
        order.sort_by(|&i, &j| frac[j].total_cmp(&frac[i]).then(i.cmp(&j)));

        let mut out = Vec::with_capacity(n);
        let mut vertex = base.clone();
        let first = 1.0 - frac[order[0]];
        self.push_vertex(&vertex, first, &mut out);
        for k in 0..order.len() {
            vertex[order[k]] += 1;
            let next = if k + 1 < order.len() { frac[order[k + 1]] } else { 0.0 };
            self.push_vertex(&vertex, frac[order[k]] - next, &mut out);
        }
        out
    }

    fn push_vertex(&self, y: &[i64], weight: f64, out: &mut Vec<(usize, f64)>) {
        if weight <= 0.0 {
            return;
        }
        let n = y.len();
        let counts: Vec<u32> = (0..n)
            .map(|i| {
                let c = y[i] - if i + 1 < n { y[i + 1] } else { 0 };
                u32::try_from(c).expect("interpolation vertex off the simplex")
            })
            .collect();
        let idx = *self.index.get(&counts).expect("interpolation vertex not on the grid");
        out.push((idx, weight));
    }

    /// Interpolated `V*(b)`.
    pub fn value(&self, b: &[f64]) -> f64 {
        self.interpolation(b).iter().map(|&(i, w)| w * self.values[i]).sum()
    }

    /// `Q*(b, a) = R(b, a) + gamma sum_o P(o | a, b) V*(tau(b, a, o))`.
    pub fn q(&self, b: &[f64], a: usize) -> f64 {
        let mut total = self.model.expected_reward(b, a);
        for (o, &p) in self.model.obs_distribution(b, a).iter().enumerate() {
            if p > 0.0 {
                let post = self.model.tau(b, a, o).expect("positive-probability observation");
                total += self.model.discount() * p * self.value(&post);
            }
        }
        total
    }

    /// `Q*` on every covering element.
    pub fn q_table(&self, cover: &CoveringSet) -> Vec<Vec<f64>> {
        cover
            .beliefs
            .iter()
            .map(|b| (0..self.model.n_actions()).map(|a| self.q(b, a)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular;

    #[test]
    fn grid_sizes() {
        let o = oracle_qstar(&tabular::tiger(), 0.01).unwrap();
        assert_eq!(o.len(), 101);
        let o = oracle_qstar(&tabular::three_state(), 0.05).unwrap();
        assert_eq!(o.len(), 231);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let o = oracle_qstar(&tabular::three_state(), 0.05).unwrap();
        for b in [
            [0.2, 0.3, 0.5],
            [0.013, 0.9, 0.087],
            [1.0, 0.0, 0.0],
            [0.333, 0.333, 0.334],
        ] {
            let w = o.interpolation(&b);
            assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
            for coord in 0..3 {
                let recon: f64 = w.iter().map(|&(i, x)| x * o.points[i][coord]).sum();
                assert!((recon - b[coord]).abs() < 1e-9, "{b:?}");
            }
        }
    }

    #[test]
    fn fully_observed_matches_mdp_value_iteration() {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let m = TabularPomdp::new(
            "observed",
            vec![eye.clone(), swap],
            vec![eye.clone(), eye],
            vec![vec![1.0, 0.0], vec![0.0, 0.5]],
            0.9,
            vec![1.0, 0.0],
        )
        .unwrap();
        let o = oracle_qstar(&m, 0.01).unwrap();
        // Solve the underlying MDP by value iteration.
        let gamma = m.discount();
        let mut v = [0.0; 2];
        for _ in 0..5000 {
            let mut nv = [f64::NEG_INFINITY; 2];
            for s in 0..2 {
                for a in 0..m.n_actions() {
                    let q = m.reward(s, a) + gamma * (0..2).map(|t| m.transition_prob(s, a, t) * v[t]).sum::<f64>();
                    nv[s] = nv[s].max(q);
                }
            }
            v = nv;
        }
        assert!((o.value(&[1.0, 0.0]) - v[0]).abs() < 1e-6);
        assert!((o.value(&[0.0, 1.0]) - v[1]).abs() < 1e-6);
    }

    #[test]
    fn toy_values() {
        let o = oracle_qstar(&tabular::absorbing_toy(), 0.01).unwrap();
        assert!((o.q(&[1.0], 0) - 2.0).abs() < 1e-8);
        assert!((o.q(&[1.0], 1) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tiger_resolution_is_stable() {
        let m = tabular::tiger();
        let fine = oracle_qstar(&m, 0.01).unwrap().value(&[0.5, 0.5]);
        let finer = oracle_qstar(&m, 0.005).unwrap().value(&[0.5, 0.5]);
        assert!((fine - finer).abs() < 0.05, "{fine} vs {finer}");
    }

    #[test]
    fn bad_spacing() {
        assert!(oracle_qstar(&tabular::tiger(), 0.0).is_err());
        assert!(oracle_qstar(&tabular::tiger(), 1.5).is_err());
    }
}
