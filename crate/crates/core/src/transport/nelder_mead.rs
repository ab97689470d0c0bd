//! Derivative-free simplex minimisation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Converged once every vertex is within this (max-norm) distance of the best one.
    pub diameter_tolerance: f64,
    /// `None` means `max(1000, 200 * dim)`.
    pub max_iterations: Option<usize>,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            diameter_tolerance: 1e-8,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Initial simplex steps in the style of `scipy.optimize.fmin`: 5% of each
/// non-zero coordinate, `zero_step` for zero coordinates.
pub fn default_steps(x0: &[f64], zero_step: f64) -> Vec<f64> {
    x0.iter()
        .map(|&v| if v != 0.0 { 0.05 * v } else { zero_step })
        .collect()
}

fn point_along(out: &mut [f64], from: &[f64], to: &[f64], t: f64) {
    for ((o, f), g) in out.iter_mut().zip(from).zip(to) {
        *o = f + t * (g - f);
    }
}

/// Minimises `f` starting from the simplex `x0, x0 + steps[i] e_i`.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], config: &NelderMeadConfig) -> Minimum {
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    points.push(x0.to_vec());
    for (i, &step) in steps.iter().enumerate() {
        let mut x = x0.to_vec();
        x[i] += step;
        points.push(x);
    }
    let mut values: Vec<f64> = points.iter().map(|x| eval(x)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let (mut centroid, mut reflected, mut trial) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let max_iterations = config.max_iterations.unwrap_or((200 * n).max(1000));

    let mut iterations = 0;
    let mut converged = false;
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let diameter = order[1..]
            .iter()
            .flat_map(|&i| points[i].iter().zip(&points[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < config.diameter_tolerance {
            converged = true;
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        iterations += 1;

        let worst = order[n];
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&points[i]) {
                *c += v;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);
        let (best_value, second_worst, worst_value) = (values[best], values[order[n - 1]], values[worst]);

        point_along(&mut reflected, &centroid, &points[worst], -config.reflection);
        let fr = eval(&reflected);
        if fr < best_value {
            point_along(
                &mut trial,
                &centroid,
                &points[worst],
                -config.reflection * config.expansion,
            );
            let fe = eval(&trial);
            if fe < fr {
                points[worst].copy_from_slice(&trial);
                values[worst] = fe;
            } else {
                points[worst].copy_from_slice(&reflected);
                values[worst] = fr;
            }
            continue;
        }
        if fr < second_worst {
            points[worst].copy_from_slice(&reflected);
            values[worst] = fr;
            continue;
        }
        let accepted = if fr < worst_value {
            point_along(&mut trial, &centroid, &reflected, config.contraction);
            let fc = eval(&trial);
            (fc <= fr).then_some(fc)
        } else {
            point_along(&mut trial, &centroid, &points[worst], config.contraction);
            let fc = eval(&trial);
            (fc < worst_value).then_some(fc)
        };
        match accepted {
            Some(fc) => {
                points[worst].copy_from_slice(&trial);
                values[worst] = fc;
            }
            None => {
                let anchor = points[best].clone();
                for i in (0..=n).filter(|&i| i != best) {
                    trial.copy_from_slice(&points[i]);
                    point_along(&mut points[i], &anchor, &trial, config.shrink);
                    values[i] = eval(&points[i]);
                }
            }
        }
    }
    let best = order[0];
    Minimum {
        x: points.swap_remove(best),
        value: values[best],
        iterations,
        converged,
    }
}
