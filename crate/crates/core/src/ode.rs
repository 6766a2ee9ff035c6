//! Adaptive ODE integration for the reactor model.
//!
//! The workhorse is the Dormand–Prince 5(4) embedded pair with a PI step
//! controller and the usual stiffness test on the last two stages. Once the
//! problem is flagged stiff, the interval (and every later interval that
//! shares the same `Stats`) is integrated with a fourth-order
//! Kaps–Rentrop Rosenbrock scheme using a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, x: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Explicit DOPRI5 with implicit fallback.
    #[default]
    Auto,
    /// Force the Rosenbrock scheme.
    Implicit,
}

#[derive(Debug, Clone)]
pub struct Integrator {
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: Vec<f64>,
    pub max_explicit_steps: usize,
    pub max_implicit_steps: usize,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub implicit_intervals: usize,
    /// Set once the explicit scheme detects stiffness.
    pub stiff: bool,
    /// Consecutive explicit steps that looked stiff; carried across intervals.
    pub stiff_run: usize,
}

enum Failure {
    Stiff,
    Fatal(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fatal(e)
    }
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Integrator {
    pub fn new(rtol: f64, atol: Vec<f64>) -> Self {
        Self {
            rtol,
            atol,
            max_explicit_steps: 20_000,
            max_implicit_steps: 200_000,
            method: Method::Auto,
        }
    }

    /// Advances `y` from `x0` to `x1`. `h` carries a step-size suggestion in
    /// and out so consecutive intervals can reuse it.
    pub fn integrate<S: OdeSystem>(
        &self,
        sys: &S,
        x0: f64,
        x1: f64,
        y: &mut [f64],
        h: &mut f64,
        stats: &mut Stats,
    ) -> Result<()> {
        assert_eq!(y.len(), sys.dim());
        assert_eq!(self.atol.len(), sys.dim());
        if x1 <= x0 {
            return Ok(());
        }
        if self.method == Method::Auto && !stats.stiff {
            let mut trial = y.to_vec();
            let mut h_trial = *h;
            match self.dopri(sys, x0, x1, &mut trial, &mut h_trial, stats) {
                Ok(()) => {
                    y.copy_from_slice(&trial);
                    *h = h_trial;
                    return Ok(());
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Stiff) => {
                    stats.stiff = true;
                    log::debug!("switching to implicit integration on [{x0}, {x1}]");
                }
            }
        }
        stats.implicit_intervals += 1;
        match self.rosenbrock(sys, x0, x1, y, h, stats) {
            Ok(()) => Ok(()),
            Err(Failure::Fatal(e)) => Err(e),
            Err(Failure::Stiff) => Err(Error::Numerical {
                x: x0,
                message: "implicit integrator exceeded its step budget".into(),
            }),
        }
    }

    fn error_norm(&self, y0: &[f64], y1: &[f64], err: &[f64]) -> f64 {
        let n = err.len() as f64;
        let sum: f64 = err
            .iter()
            .zip(y0.iter().zip(y1))
            .zip(&self.atol)
            .map(|((e, (a, b)), atol)| {
                let sc = atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step(&self, span: f64, h: f64) -> f64 {
        if h > 0.0 && h.is_finite() {
            h.min(span)
        } else {
            span * 1e-3
        }
    }

    fn dopri<S: OdeSystem>(
        &self,
        sys: &S,
        x0: f64,
        x1: f64,
        y: &mut [f64],
        h: &mut f64,
        stats: &mut Stats,
    ) -> std::result::Result<(), Failure> {
        let n = y.len();
        let span = x1 - x0;
        let h_min = span * 1e-12;
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut x = x0;
        let mut step = self.initial_step(span, *h);
        let mut err_prev: f64 = 1e-4;
        let mut steps = 0usize;
        let mut nonstiff_count = 0usize;

        sys.rhs(x, y, &mut k[0])?;
        stats.rhs_evals += 1;

        while x < x1 {
            if steps >= self.max_explicit_steps || step < h_min {
                return Err(Failure::Stiff);
            }
            steps += 1;
            let last = x + step >= x1;
            let hs = if last { x1 - x } else { step };

            macro_rules! stage {
                ($dst:expr, $c:expr, $($a:expr => $ki:expr),+) => {{
                    for i in 0..n {
                        tmp[i] = y[i] + hs * (0.0 $(+ $a * k[$ki][i])+);
                    }
                    sys.rhs(x + $c * hs, &tmp, &mut k[$dst])?;
                    stats.rhs_evals += 1;
                }};
            }
            stage!(1, C2, A21 => 0);
            stage!(2, C3, A31 => 0, A32 => 1);
            stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
            stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
            stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
            // tmp now holds the input of the sixth stage.
            for i in 0..n {
                y_new[i] = y[i]
                    + hs * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            sys.rhs(x + hs, &y_new, &mut k[6])?;
            stats.rhs_evals += 1;
            for i in 0..n {
                err[i] = hs
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
            }
            let en = self.error_norm(y, &y_new, &err);
            if en <= 1.0 {
                stats.accepted += 1;
                // Estimate h·|λ| from the last two stages.
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..n {
                    num += (k[6][i] - k[5][i]).powi(2);
                    den += (y_new[i] - tmp[i]).powi(2);
                }
                if den > 0.0 && hs * hs * num > 3.25f64.powi(2) * den {
                    nonstiff_count = 0;
                    stats.stiff_run += 1;
                    if stats.stiff_run >= 15 {
                        return Err(Failure::Stiff);
                    }
                } else {
                    nonstiff_count += 1;
                    if nonstiff_count >= 6 {
                        stats.stiff_run = 0;
                    }
                }
                x = if last { x1 } else { x + hs };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                // PI controller (Hairer, Nørsett & Wanner).
                let en = en.max(1e-10);
                let fac = 0.9 * en.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                let next = hs * fac.clamp(0.2, 5.0);
                step = if last { step.max(next) } else { next };
                err_prev = en;
            } else {
                stats.rejected += 1;
                let fac = if en.is_finite() {
                    (0.9 * en.powf(-0.2)).max(0.1)
                } else {
                    0.1
                };
                step = hs * fac;
            }
        }
        *h = step;
        Ok(())
    }

    fn jacobian<S: OdeSystem>(
        &self,
        sys: &S,
        x: f64,
        y: &[f64],
        f0: &[f64],
        stats: &mut Stats,
    ) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        for j in 0..n {
            let delta = (f64::EPSILON.sqrt() * y[j].abs()).max(self.atol[j] * 1e-2).max(1e-300);
            yp[j] = y[j] + delta;
            sys.rhs(x, &yp, &mut fp)?;
            stats.rhs_evals += 1;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f0[i]) / delta;
            }
            yp[j] = y[j];
        }
        Ok(jac)
    }

    fn rosenbrock<S: OdeSystem>(
        &self,
        sys: &S,
        x0: f64,
        x1: f64,
        y: &mut [f64],
        h: &mut f64,
        stats: &mut Stats,
    ) -> std::result::Result<(), Failure> {
        // Kaps–Rentrop form with Shampine's coefficients (order 4, embedded 3).
        const GAM: f64 = 1.0 / 2.0;
        const A21: f64 = 2.0;
        const A31: f64 = 48.0 / 25.0;
        const A32: f64 = 6.0 / 25.0;
        const C21: f64 = -8.0;
        const C31: f64 = 372.0 / 25.0;
        const C32: f64 = 12.0 / 5.0;
        const C41: f64 = -112.0 / 125.0;
        const C42: f64 = -54.0 / 125.0;
        const C43: f64 = -2.0 / 5.0;
        const B1: f64 = 19.0 / 9.0;
        const B2: f64 = 1.0 / 2.0;
        const B3: f64 = 25.0 / 108.0;
        const B4: f64 = 125.0 / 108.0;
        const E1: f64 = 17.0 / 54.0;
        const E2: f64 = 7.0 / 36.0;
        const E3: f64 = 0.0;
        const E4: f64 = 125.0 / 108.0;
        const C1X: f64 = 1.0 / 2.0;
        const C2X: f64 = -3.0 / 2.0;
        const C3X: f64 = 121.0 / 50.0;
        const C4X: f64 = 29.0 / 250.0;
        const A2X: f64 = 1.0;
        const A3X: f64 = 3.0 / 5.0;

        let n = y.len();
        let span = x1 - x0;
        let mut x = x0;
        let mut step = self.initial_step(span, *h);
        let mut f0 = vec![0.0; n];
        let mut fx = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        let mut ys = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut steps = 0usize;
        let singular = |x: f64| Error::Numerical {
            x,
            message: "singular Rosenbrock matrix".into(),
        };
        while x < x1 {
            if steps >= self.max_implicit_steps || step < span * 1e-14 {
                return Err(Failure::Stiff);
            }
            steps += 1;
            sys.rhs(x, y, &mut f0)?;
            stats.rhs_evals += 1;
            let jac = self.jacobian(sys, x, y, &f0, stats)?;
            // Explicit x-dependence by a forward difference.
            let dx = f64::EPSILON.sqrt() * x.abs().max(span);
            sys.rhs(x + dx, y, &mut fx)?;
            stats.rhs_evals += 1;
            let dfdx: Vec<f64> = fx.iter().zip(&f0).map(|(a, b)| (a - b) / dx).collect();
            loop {
                let last = x + step >= x1;
                let hs = if last { x1 - x } else { step };
                let mut w = -jac.clone();
                for i in 0..n {
                    w[(i, i)] += 1.0 / (GAM * hs);
                }
                let lu = w.lu();
                let solve = |rhs: DVector<f64>| lu.solve(&rhs).ok_or_else(|| singular(x));
                let g1 = solve(DVector::from_iterator(n, (0..n).map(|i| f0[i] + hs * C1X * dfdx[i])))?;
                for i in 0..n {
                    ys[i] = y[i] + A21 * g1[i];
                }
                sys.rhs(x + A2X * hs, &ys, &mut f1)?;
                stats.rhs_evals += 1;
                let g2 = solve(DVector::from_iterator(
                    n,
                    (0..n).map(|i| f1[i] + hs * C2X * dfdx[i] + C21 * g1[i] / hs),
                ))?;
                for i in 0..n {
                    ys[i] = y[i] + A31 * g1[i] + A32 * g2[i];
                }
                sys.rhs(x + A3X * hs, &ys, &mut f2)?;
                stats.rhs_evals += 1;
                let g3 = solve(DVector::from_iterator(
                    n,
                    (0..n).map(|i| f2[i] + hs * C3X * dfdx[i] + (C31 * g1[i] + C32 * g2[i]) / hs),
                ))?;
                let g4 = solve(DVector::from_iterator(
                    n,
                    (0..n).map(|i| {
                        f2[i] + hs * C4X * dfdx[i] + (C41 * g1[i] + C42 * g2[i] + C43 * g3[i]) / hs
                    }),
                ))?;
                for i in 0..n {
                    y_new[i] = y[i] + B1 * g1[i] + B2 * g2[i] + B3 * g3[i] + B4 * g4[i];
                    err[i] = E1 * g1[i] + E2 * g2[i] + E3 * g3[i] + E4 * g4[i];
                }
                let en = self.error_norm(y, &y_new, &err);
                if en <= 1.0 {
                    stats.accepted += 1;
                    x = if last { x1 } else { x + hs };
                    y.copy_from_slice(&y_new);
                    let next = hs * (0.9 * en.max(1e-10).powf(-0.25)).clamp(0.2, 5.0);
                    // A final step clipped to the interval end says nothing
                    // about the next interval.
                    step = if last { step.max(next) } else { next };
                    *h = step;
                    break;
                }
                stats.rejected += 1;
                step = hs
                    * if en.is_finite() {
                        (0.9 * en.powf(-0.25)).max(0.1)
                    } else {
                        0.1
                    };
                if step < span * 1e-14 {
                    return Err(Failure::Stiff);
                }
            }
        }
        Ok(())
    }

    /// Fixed-step Rosenbrock integration, used to check the scheme's order.
    #[cfg(test)]
    fn rosenbrock_fixed<S: OdeSystem>(&self, sys: &S, x0: f64, x1: f64, y: &mut [f64], steps: usize) {
        let mut me = self.clone();
        me.rtol = 1e300;
        me.atol = vec![1e300; y.len()];
        let h = (x1 - x0) / steps as f64;
        let mut stats = Stats::default();
        for k in 0..steps {
            let mut hh = h;
            let a = x0 + h * k as f64;
            me.rosenbrock(sys, a, a + h, y, &mut hh, &mut stats).ok().unwrap();
        }
    }
}
