//! Derivative-free simplex minimization.

/// Stopping rules: a local run ends when the simplex is smaller than `xtol`
/// (max-norm distance of every vertex from the best) and the spread of
/// function values is below `ftol`. After a local run the simplex is rebuilt
/// around the best point; the search stops once a restart improves the
/// minimum by less than `ftol`.
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub max_evaluations: usize,
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { initial_step: 0.05, xtol: 1e-9, ftol: 1e-9, max_evaluations: 100_000, max_restarts: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub restarts: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` from `x0` with the dimension-adaptive coefficients of
/// Gao and Han (reflection 1, expansion 1 + 2/n, contraction 3/4 - 1/(2n),
/// shrink 1 - 1/n).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let mut obj = Counted { f, evaluations: 0 };
    let mut best = x0.to_vec();
    let mut best_value = obj.eval(&best);
    if x0.is_empty() {
        return Minimum { x: best, value: best_value, evaluations: obj.evaluations, restarts: 0, converged: true };
    }
    let mut restarts = 0;
    loop {
        let (x, value, local_converged) = local_search(&mut obj, &best, best_value, opts);
        let improvement = best_value - value;
        if value <= best_value {
            best = x;
            best_value = value;
        }
        if !local_converged {
            return Minimum { x: best, value: best_value, evaluations: obj.evaluations, restarts, converged: false };
        }
        if (restarts > 0 && improvement < opts.ftol) || restarts >= opts.max_restarts {
            return Minimum { x: best, value: best_value, evaluations: obj.evaluations, restarts, converged: true };
        }
        restarts += 1;
    }
}

fn local_search<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    start: &[f64],
    start_value: f64,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);

    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut values = vec![start_value];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        values.push(obj.eval(&v));
        simplex.push(v);
    }

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter =
            simplex[1..].iter().flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if diameter < opts.xtol && spread < opts.ftol {
            return (simplex[0].clone(), values[0], true);
        }
        if obj.evaluations >= opts.max_evaluations {
            return (simplex[0].clone(), values[0], false);
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        let reflected = lerp(&centroid, &worst, -alpha);
        let fr = obj.eval(&reflected);

        if fr < values[0] {
            let expanded = lerp(&centroid, &reflected, gamma);
            let fe = obj.eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, accept_below) = if fr < values[n] {
            (lerp(&centroid, &reflected, rho), fr)
        } else {
            (lerp(&centroid, &worst, rho), values[n])
        };
        let fc = obj.eval(&contracted);
        if fc < accept_below {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = lerp(&simplex[0], &simplex[i], sigma);
            values[i] = obj.eval(&simplex[i]);
        }
    }
}
