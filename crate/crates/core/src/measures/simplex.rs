use super::cfd::SimplexRun;

/// Convex function on the probability simplex; `value` may return +∞.
pub trait SimplexObjective {
    fn value(&self, q: &[f64]) -> f64;
    fn gradient(&self, q: &[f64]) -> Vec<f64>;
}

/// KKT defect accepted when the line search can make no further progress.
const STALL_TOL: f64 = 1e-6;

/// Euclidean projection onto {q ≥ 0, Σq = 1}.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// KKT defect: spread of the gradient over the support, and how far any
/// coordinate outside the support undercuts it.
pub fn kkt_defect(q: &[f64], g: &[f64]) -> f64 {
    let support = 1e-14;
    let gmin_all = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let on: Vec<f64> = q.iter().zip(g).filter(|(x, _)| **x > support).map(|(_, g)| *g).collect();
    let gmax_on = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    gmax_on - gmin_all
}

/// Projected gradient with Armijo backtracking from `start`.
pub fn minimize_on_simplex(obj: &dyn SimplexObjective, start: &[f64], tol: f64, max_iter: usize) -> SimplexRun {
    let mut q = project_to_simplex(start);
    let mut f = obj.value(&q);
    let mut trace = vec![f];
    let mut converged = false;
    let mut step: f64 = 1.0;
    for _ in 0..max_iter {
        let g = obj.gradient(&q);
        if kkt_defect(&q, &g) < tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        let mut s = (step * 2.0).min(1e6);
        while s > 1e-18 {
            let cand = project_to_simplex(&q.iter().zip(&g).map(|(x, gi)| x - s * gi).collect::<Vec<_>>());
            let fc = obj.value(&cand);
            let descent: f64 = g.iter().zip(cand.iter().zip(&q)).map(|(gi, (c, x))| gi * (c - x)).sum();
            let dist2: f64 = cand.iter().zip(&q).map(|(c, x)| (c - x).powi(2)).sum();
            if fc.is_finite() && fc <= f + 1e-4 * descent {
                accepted = dist2 > 0.0;
                if accepted {
                    q = cand;
                    f = fc;
                    step = s;
                }
                break;
            }
            s *= 0.5;
        }
        trace.push(f);
        if !accepted {
            converged = kkt_defect(&q, &obj.gradient(&q)) < STALL_TOL;
            break;
        }
    }
    SimplexRun { point: q, value: f, converged, trace }
}
