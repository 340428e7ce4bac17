use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::patterson::{PATTERSON_EXACTNESS, PATTERSON_RULES};
use crate::basis::binomial;
use crate::error::{Error, Result};

/// Merge tolerance per coordinate for coincident nodes.
const MERGE_TOL: f64 = 1e-12;

/// How a Smolyak level maps onto the nested 1D Gauss-Patterson family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    /// Level `l` uses the smallest rule exact to degree `2l + 1`. For six
    /// dimensions at level 5 this gives 1889 nodes.
    #[default]
    Slow,
    /// Level `l` uses the `l`-th rule (1, 3, 7, ... points).
    Full,
}

impl Growth {
    fn rule_for_level(self, level: usize) -> Result<usize> {
        match self {
            Growth::Slow => PATTERSON_EXACTNESS
                .iter()
                .position(|&e| e > 2 * level)
                .ok_or(Error::UnsupportedLevel { level, max: self.max_level() }),
            Growth::Full if level < PATTERSON_RULES.len() => Ok(level),
            Growth::Full => Err(Error::UnsupportedLevel { level, max: self.max_level() }),
        }
    }

    pub fn max_level(self) -> usize {
        match self {
            Growth::Slow => (PATTERSON_EXACTNESS[PATTERSON_EXACTNESS.len() - 1] - 1) / 2,
            Growth::Full => PATTERSON_RULES.len() - 1,
        }
    }

    /// Total polynomial degree integrated exactly by the level-`l` grid.
    /// Both growth rules use 1D rules exact to at least `2j + 1` at level `j`.
    pub fn exactness(self, level: usize) -> usize {
        2 * level + 1
    }
}

/// Node/weight set w.r.t. the uniform probability measure on `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseQuadrature {
    pub dim: usize,
    pub level: usize,
    pub rule: String,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SparseQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// 1D Gauss-Patterson rule at a Smolyak level, weights normalized to 1.
pub fn one_dimensional_rule(level: usize, growth: Growth) -> Result<Vec<(f64, f64)>> {
    let rule = growth.rule_for_level(level)?;
    Ok(PATTERSON_RULES[rule].iter().map(|&(x, w)| (x, 0.5 * w)).collect())
}

pub fn smolyak_grid(dim: usize, level: usize) -> Result<SparseQuadrature> {
    smolyak_grid_with(dim, level, Growth::Slow)
}

/// Smolyak combination of nested 1D rules:
/// `sum_{l-m+1 <= |j| <= l} (-1)^(l-|j|) C(m-1, l-|j|) U_{j_1} x ... x U_{j_m}`.
pub fn smolyak_grid_with(dim: usize, level: usize, growth: Growth) -> Result<SparseQuadrature> {
    if dim == 0 {
        return Err(Error::InvalidInput("sparse grid dimension must be at least 1".into()));
    }
    let rules = (0..=level).map(|l| one_dimensional_rule(l, growth)).collect::<Result<Vec<_>>>()?;

    let mut acc: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
    let lowest = (level + 1).saturating_sub(dim);
    let mut levels = vec![0usize; dim];
    for_each_composition(dim, level, &mut levels, 0, 0, &mut |js| {
        let total: usize = js.iter().sum();
        if total < lowest {
            return;
        }
        let gap = level - total;
        let sign = if gap.is_multiple_of(2) { 1.0 } else { -1.0 };
        let coef = sign * binomial(dim - 1, gap) as f64;
        tensor_accumulate(js, &rules, coef, &mut acc);
    });

    let (nodes, weights): (Vec<_>, Vec<_>) = acc.into_values().unzip();
    Ok(SparseQuadrature {
        dim,
        level,
        rule: match growth {
            Growth::Slow => "gauss-patterson-slow".into(),
            Growth::Full => "gauss-patterson".into(),
        },
        nodes,
        weights,
    })
}

fn for_each_composition(
    dim: usize,
    budget: usize,
    cur: &mut [usize],
    pos: usize,
    used: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if pos == dim {
        f(cur);
        return;
    }
    for j in 0..=(budget - used) {
        cur[pos] = j;
        for_each_composition(dim, budget, cur, pos + 1, used + j, f);
    }
    cur[pos] = 0;
}

fn tensor_accumulate(
    js: &[usize],
    rules: &[Vec<(f64, f64)>],
    coef: f64,
    acc: &mut BTreeMap<Vec<i64>, (Vec<f64>, f64)>,
) {
    let dim = js.len();
    let sizes: Vec<usize> = js.iter().map(|&j| rules[j].len()).collect();
    let mut counter = vec![0usize; dim];
    loop {
        let mut node = Vec::with_capacity(dim);
        let mut w = coef;
        for d in 0..dim {
            let (x, wx) = rules[js[d]][counter[d]];
            node.push(x);
            w *= wx;
        }
        let key: Vec<i64> = node.iter().map(|&x| (x / MERGE_TOL).round() as i64).collect();
        acc.entry(key).and_modify(|e| e.1 += w).or_insert((node, w));

        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            counter[d] += 1;
            if counter[d] < sizes[d] {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
    }
}
