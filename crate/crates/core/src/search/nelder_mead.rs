//! Downhill simplex minimization with dimension-adaptive coefficients.

#[derive(Clone, Debug)]
pub struct NelderMeadOptions {
    /// Offset of each initial vertex from the start point along one axis.
    pub initial_step: f64,
    /// Stop once `max f - min f` over the vertices is below this...
    pub f_tol: f64,
    /// ...and every vertex lies within this distance of the best, per coordinate.
    pub x_tol: f64,
    pub max_iterations: usize,
    /// Number of times the simplex is rebuilt around a converged point to
    /// guard against premature collapse.
    pub polish_restarts: usize,
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as `+inf`.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let y = f(x);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    };
    let mut x = x0.to_vec();
    let mut fx = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for round in 0..=opts.polish_restarts {
        let budget = opts.max_iterations.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let r = descend(&mut eval, &x, opts, budget);
        iterations += r.iterations;
        let improved = fx - r.f;
        if r.f <= fx {
            x = r.x;
            fx = r.f;
        }
        converged = r.converged;
        // A rebuilt simplex that finds nothing new confirms the minimum.
        if !r.converged || (round > 0 && improved <= opts.f_tol) {
            break;
        }
    }
    NelderMeadResult {
        x,
        f: fx,
        iterations,
        evaluations,
        converged,
    }
}

struct Descent {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

fn descend<F>(eval: &mut F, x0: &[f64], opts: &NelderMeadOptions, max_iterations: usize) -> Descent
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Descent { x: Vec::new(), f: eval(x0), iterations: 0, converged: true };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n > 1 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut order: Vec<usize> = (0..=n).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    loop {
        // Stable sort keeps the older vertex first among ties.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let f_spread = values[worst] - values[best];
        let x_spread = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if f_spread.is_finite() && f_spread <= opts.f_tol && x_spread <= opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= max_iterations {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= nf);

        let second_worst = values[order[n - 1]];
        let f_best = values[best];
        let f_worst = values[worst];
        let point = |out: &mut Vec<f64>, t: f64, w: &[f64]| {
            for ((o, c), x) in out.iter_mut().zip(&centroid).zip(w) {
                *o = c + t * (c - x);
            }
        };

        point(&mut trial, alpha, &simplex[worst]);
        let f_r = eval(&trial);
        if f_r < f_best {
            point(&mut trial2, alpha * gamma, &simplex[worst]);
            let f_e = eval(&trial2);
            if f_e < f_r {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_e;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_r;
            }
            continue;
        }
        if f_r < second_worst {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = f_r;
            continue;
        }
        let accept = if f_r < f_worst {
            point(&mut trial2, alpha * rho, &simplex[worst]);
            let f_c = eval(&trial2);
            (f_c <= f_r).then_some(f_c)
        } else {
            point(&mut trial2, -rho, &simplex[worst]);
            let f_c = eval(&trial2);
            (f_c < f_worst).then_some(f_c)
        };
        if let Some(f_c) = accept {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = f_c;
            continue;
        }
        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for (x, a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + sigma * (*x - a);
            }
            values[i] = eval(&simplex[i]);
        }
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Descent {
        x: simplex[order[0]].clone(),
        f: values[order[0]],
        iterations,
        converged,
    }
}
