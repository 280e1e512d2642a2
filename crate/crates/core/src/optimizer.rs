//! Budgeted Nelder–Mead simplex search.

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Objective evaluations allowed; the starting point is always evaluated.
    pub max_evals: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
    /// Stop once the spread of vertex values is below this...
    pub f_tol: f64,
    /// ...and every vertex lies within this distance of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 1000,
            initial_step: 0.1,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best value seen after each evaluation (nonincreasing).
    pub trace: Vec<f64>,
}

struct Counter<'a, F> {
    f: &'a mut F,
    evals: usize,
    best: f64,
    trace: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        self.evals += 1;
        self.best = self.best.min(v);
        self.trace.push(self.best);
        v
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let budget = opts.max_evals.max(1);
    let mut ctr = Counter {
        f: &mut f,
        evals: 0,
        best: f64::INFINITY,
        trace: Vec::new(),
    };

    let f0 = ctr.eval(x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    if dim == 0 {
        return Minimum {
            x: x0.to_vec(),
            f: f0,
            evals: ctr.evals,
            converged: true,
            trace: ctr.trace,
        };
    }
    for i in 0..dim {
        if ctr.evals >= budget {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let fx = ctr.eval(&x);
        simplex.push((x, fx));
    }
    if simplex.len() < dim + 1 {
        return finish(simplex, ctr, false);
    }

    let mut converged = false;
    while ctr.evals < budget {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best_f, worst_f) = (simplex[0].1, simplex[dim].1);
        let spread = (worst_f - best_f).abs();
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0f64, f64::max);
        if spread <= opts.f_tol && size <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = ctr.eval(&xr);
        if fr < simplex[0].1 {
            if ctr.evals >= budget {
                simplex[dim] = (xr, fr);
                break;
            }
            let xe = along(EXPAND);
            let fe = ctr.eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        if ctr.evals >= budget {
            break;
        }
        let (xc, fc) = if fr < simplex[dim].1 {
            let xc = along(CONTRACT * REFLECT);
            let fc = ctr.eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = ctr.eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(simplex[dim].1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if ctr.evals >= budget {
                break;
            }
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            let fx = ctr.eval(&x);
            *vertex = (x, fx);
        }
    }
    finish(simplex, ctr, converged)
}

fn finish<F>(mut simplex: Vec<(Vec<f64>, f64)>, ctr: Counter<'_, F>, converged: bool) -> Minimum {
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        evals: ctr.evals,
        converged,
        trace: ctr.trace,
    }
}
