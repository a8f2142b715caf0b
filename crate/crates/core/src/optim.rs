//! Derivative-free minimisation used to cross-check closed-form estimators.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex, per coordinate.
    pub initial_step: Vec<f64>,
    /// Stop when every simplex vertex is within this distance of the best one.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Restarts from the current best point; guards against collapsed simplices.
    pub restarts: usize,
}

impl NelderMeadOptions {
    pub fn new(dim: usize) -> Self {
        NelderMeadOptions {
            initial_step: vec![0.1; dim],
            x_tol: 1e-12,
            max_iter: 20_000,
            restarts: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder-Mead simplex search with standard coefficients.
pub fn nelder_mead<F>(f: F, start: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    let mut best = start.to_vec();
    let mut iterations = 0;
    let mut step: Vec<f64> = opts.initial_step.clone();

    for _ in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..dim {
            let mut v = best.clone();
            v[i] += step[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

        for _ in 0..opts.max_iter {
            iterations += 1;
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = simplex[1..]
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if spread < opts.x_tol {
                break;
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = along(-1.0);
            let f_r = f(&reflected);
            if f_r < values[0] {
                let expanded = along(-2.0);
                let f_e = f(&expanded);
                if f_e < f_r {
                    simplex[dim] = expanded;
                    values[dim] = f_e;
                } else {
                    simplex[dim] = reflected;
                    values[dim] = f_r;
                }
            } else if f_r < values[dim - 1] {
                simplex[dim] = reflected;
                values[dim] = f_r;
            } else {
                let contracted = if f_r < values[dim] {
                    along(-0.5)
                } else {
                    along(0.5)
                };
                let f_c = f(&contracted);
                if f_c < values[dim].min(f_r) {
                    simplex[dim] = contracted;
                    values[dim] = f_c;
                } else {
                    for i in 1..=dim {
                        let shrunk: Vec<f64> = simplex[i]
                            .iter()
                            .zip(&simplex[0])
                            .map(|(v, b)| b + 0.5 * (v - b))
                            .collect();
                        values[i] = f(&shrunk);
                        simplex[i] = shrunk;
                    }
                }
            }
        }

        let (idx, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("simplex is nonempty");
        best = simplex[idx].clone();
        for s in step.iter_mut() {
            *s *= 0.1;
        }
    }

    Minimum {
        value: f(&best),
        x: best,
        iterations,
    }
}
