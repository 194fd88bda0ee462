//! Central finite-difference gradient verification.

use super::Problem;

/// Largest discrepancy between the analytic gradient returned by `f` and a
/// central difference, over all components, relative to the gradient's own
/// magnitude `max(‖g‖_∞, ‖g_fd‖_∞)`. The step is `1e-6·max(1, |x_i|)`.
pub fn check_gradient(f: impl Fn(&[f64]) -> (f64, Vec<f64>), x: &[f64]) -> f64 {
    let all: Vec<usize> = (0..x.len()).collect();
    check_gradient_components(f, x, &all)
}

/// [`check_gradient`] restricted to the listed components.
pub fn check_gradient_components(f: impl Fn(&[f64]) -> (f64, Vec<f64>), x: &[f64], components: &[usize]) -> f64 {
    let (_, g) = f(x);
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &i in components {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = f(&xp).0;
        xp[i] = x[i] - h;
        let fm = f(&xp).0;
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs());
        scale = scale.max(fd.abs()).max(g[i].abs());
    }
    if worst == 0.0 {
        0.0
    } else {
        worst / scale.max(f64::MIN_POSITIVE)
    }
}

/// Gradient check of a whole [`Problem`]: the objective, `w_eqᵀc` and
/// `w_ineqᵀg` separately, with errors measured as in [`check_gradient`].
/// Each probe is one `evaluate`, so the three parts share their finite
/// differences.
pub fn check_problem<P: Problem>(p: &P, x: &[f64], w_eq: &[f64], w_ineq: &[f64]) -> [f64; 3] {
    let n = x.len();
    let (z_eq, z_in) = (vec![0.0; w_eq.len()], vec![0.0; w_ineq.len()]);
    let (_, cache) = p.evaluate(x);
    let mut analytic = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    p.gradient(x, &cache, &z_eq, &z_in, &mut analytic[0]);
    p.gradient(x, &cache, w_eq, &z_in, &mut analytic[1]);
    p.gradient(x, &cache, &z_eq, w_ineq, &mut analytic[2]);
    let (obj, ineq) = analytic.split_at_mut(1);
    let (eq, ineq) = ineq.split_at_mut(1);
    for (a, o) in eq[0].iter_mut().zip(obj[0].iter()) {
        *a -= o;
    }
    for (a, o) in ineq[0].iter_mut().zip(obj[0].iter()) {
        *a -= o;
    }
    let parts = |y: &[f64]| {
        let v = p.evaluate(y).0;
        let wdot = |c: &[f64], w: &[f64]| c.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        [v.objective, wdot(&v.eq, w_eq), wdot(&v.ineq, w_ineq)]
    };
    let mut xp = x.to_vec();
    let mut worst = [0.0f64; 3];
    let mut scale = [0.0f64; 3];
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = parts(&xp);
        xp[i] = x[i] - h;
        let fm = parts(&xp);
        xp[i] = x[i];
        for k in 0..3 {
            let fd = (fp[k] - fm[k]) / (2.0 * h);
            worst[k] = worst[k].max((fd - analytic[k][i]).abs());
            scale[k] = scale[k].max(fd.abs()).max(analytic[k][i].abs());
        }
    }
    std::array::from_fn(|k| if worst[k] == 0.0 { 0.0 } else { worst[k] / scale[k].max(f64::MIN_POSITIVE) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::FnProblem;

    #[test]
    fn quadratic_form_passes() {
        let a = [[3.0, 1.0, 0.0], [1.0, 2.0, -0.5], [0.0, -0.5, 4.0]];
        let f = |x: &[f64]| {
            let ax: Vec<f64> = a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect();
            (0.5 * ax.iter().zip(x).map(|(p, q)| p * q).sum::<f64>(), ax)
        };
        assert!(check_gradient(f, &[0.3, -1.2, 2.5]) < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let f = |x: &[f64]| (x[0] * x[0], vec![x[0]]);
        assert!(check_gradient(f, &[1.0]) > 0.4);
    }

    #[test]
    fn problem_parts_are_checked_separately() {
        let good = FnProblem::new(2, |x| x[0] * x[1], |x, g| {
            g[0] = x[1];
            g[1] = x[0];
        })
        .with_eq(1, |x, c| c[0] = x[0] * x[0] - x[1], |x, w, g| {
            g[0] += 2.0 * x[0] * w[0];
            g[1] -= w[0];
        });
        let e = check_problem(&good, &[0.7, -1.3], &[0.9], &[]);
        assert!(e[0] < 1e-8 && e[1] < 1e-8 && e[2] == 0.0, "{e:?}");

        let bad = FnProblem::new(2, |x| x[0] * x[1], |x, g| {
            g[0] = x[1];
            g[1] = x[0];
        })
        .with_eq(1, |x, c| c[0] = x[0] * x[0] - x[1], |x, w, g| g[0] += x[0] * w[0]);
        let e = check_problem(&bad, &[0.7, -1.3], &[0.9], &[]);
        assert!(e[0] < 1e-8 && e[1] > 0.1, "{e:?}");
    }
}
