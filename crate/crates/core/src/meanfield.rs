//! Mean-field predictors for binary voting on `d`-regular graphs.
//!
//! `x(t)` counts agents holding the minority singleton `{c1}`, `y(t)` those holding
//! `{c2}`; `y − x` is conserved. `z(t)` counts wrong memories during phase 2. Time
//! is measured in the simulator's units: one unit is `n` interactions.

use crate::error::{Error, Result};
use crate::monitor::GroupCensus;

/// Default integration step in time units.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldParams {
    pub n: f64,
    pub d: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl MeanFieldParams {
    /// Requires `n >= 2`, `d >= 1`, `0 <= ρ1 < ρ2 <= 1` and `ρ1 + ρ2 = 1` (within 1e−9).
    ///
    /// `ρ1 = 0` is admitted for the ODE predictors; the closed form and the bounds
    /// reject it.
    pub fn new(n: f64, d: f64, rho1: f64, rho2: f64) -> Result<Self> {
        if !(n >= 2.0) {
            return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
        }
        if !(d >= 1.0) {
            return Err(Error::invalid("d", format!("must be >= 1, got {d}")));
        }
        if !(rho1 >= 0.0 && rho1 < rho2 && rho2 <= 1.0) {
            return Err(Error::invalid(
                "rho",
                format!("need 0 <= rho1 < rho2 <= 1, got rho1 = {rho1}, rho2 = {rho2}"),
            ));
        }
        if (rho1 + rho2 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("rho", format!("rho1 + rho2 = {} != 1", rho1 + rho2)));
        }
        Ok(MeanFieldParams { n, d, rho1, rho2 })
    }

    /// Binary parameters with `ρ1 = 1 − ρ2`.
    pub fn binary(n: usize, d: usize, rho2: f64) -> Result<Self> {
        Self::new(n as f64, d as f64, 1.0 - rho2, rho2)
    }

    pub fn x0(&self) -> f64 {
        self.n * self.rho1
    }

    pub fn y0(&self) -> f64 {
        self.n * self.rho2
    }

    fn require_minority(&self) -> Result<()> {
        if self.rho1 > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("rho1", "must be positive"))
        }
    }
}

/// Samples `(t, value)` at a uniform step; the final step is shortened to land on
/// `t_end` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn last_value(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.1)
    }

    /// Linear interpolation; clamps outside the sampled range.
    pub fn value_at(&self, t: f64) -> f64 {
        let pts = &self.points;
        match pts.partition_point(|p| p.0 <= t) {
            0 => pts.first().map_or(f64::NAN, |p| p.1),
            i if i == pts.len() => pts[i - 1].1,
            i => {
                let (t0, v0) = pts[i - 1];
                let (t1, v1) = pts[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Fixed-step classical Runge–Kutta for an autonomous scalar ODE, clamping the
/// state at zero after every step.
pub fn rk4_nonnegative(f: impl Fn(f64) -> f64, x0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("t_end", format!("must be non-negative, got {t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.max(0.0);
    points.push((0.0, x));
    for s in 0..steps {
        let t = s as f64 * dt;
        let h = dt.min(t_end - t);
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x = (x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
        let t_next = if s + 1 == steps { t_end } else { (s + 1) as f64 * dt };
        points.push((t_next, x));
    }
    Ok(Trajectory { dt, points })
}

/// Right-hand side of the phase-1 bound: minus the probability that an
/// interaction sees both `{c1}` and `{c2}` among its `d + 1` participants.
pub fn phase1_rate(p: &MeanFieldParams, x: f64) -> f64 {
    let n = p.n;
    let e = p.d + 1.0;
    let y = x + p.y0() - p.x0();
    let none_x = (1.0 - x / n).powf(e);
    let none_y = (1.0 - y / n).powf(e);
    let neither = (1.0 - (x + y) / n).max(0.0).powf(e);
    -(1.0 - (none_x + none_y - neither))
}

/// Integrates the phase-1 bound from `x(0) = nρ1`.
pub fn phase1_ode(p: &MeanFieldParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    rk4_nonnegative(|x| phase1_rate(p, x), p.x0(), t_end, dt)
}

/// Closed-form solution of the binomial (three-term) approximation:
/// `x(t) = (y0 − x0) / ((y0/x0) e^{d(d+1)(y0−x0)t/n²} − 1)`.
pub fn phase1_closed_form(p: &MeanFieldParams, t: f64) -> Result<f64> {
    p.require_minority()?;
    let (x0, y0) = (p.x0(), p.y0());
    let gap = y0 - x0;
    let a = p.d * (p.d + 1.0) * gap / (p.n * p.n);
    // Rearranged as x0 · gap / (y0 (e^{at} − 1) + gap) so that t = 0 returns x0 exactly.
    Ok(x0 * (gap / (y0 * (a * t).exp_m1() + gap)))
}

/// Upper bound on the time for `x(t)` to reach 1.
pub fn t_c1_bound(p: &MeanFieldParams) -> Result<f64> {
    p.require_minority()?;
    let gap = p.rho2 - p.rho1;
    Ok(p.n / (p.d * (p.d + 1.0) * gap) * ((p.rho1 / p.rho2).ln() + (p.n * gap + 1.0).ln()))
}

/// Constant decay rate of the phase-2 bound: `(1/n)(1 − (1 − (y0 − x0)/n)^d)`.
pub fn phase2_rate(p: &MeanFieldParams) -> f64 {
    (1.0 - (1.0 - (p.y0() - p.x0()) / p.n).powf(p.d)) / p.n
}

/// Integrates `dz/dt = −r z` from `z0`, which must lie in `[0, nρ1]`.
pub fn phase2_ode(p: &MeanFieldParams, z0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(0.0..=p.x0()).contains(&z0) {
        return Err(Error::invalid("z0", format!("must lie in [0, {}], got {z0}", p.x0())));
    }
    let r = phase2_rate(p);
    rk4_nonnegative(|z| -r * z, z0, t_end, dt)
}

/// Upper bound on the time for `z(t)` to reach 1: `n / (d (ρ2 − ρ1)) · ln(nρ1)`.
pub fn t_c2_bound(p: &MeanFieldParams) -> Result<f64> {
    if !(p.x0() > 1.0) {
        return Err(Error::invalid("rho1", format!("n·rho1 = {} must exceed 1", p.x0())));
    }
    Ok(p.n / (p.d * (p.rho2 - p.rho1)) * p.x0().ln())
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Multinomial probability that the `d + 1` participants split into `v2i` of
/// group V2, `m1i` of M1 and `m2i` of M2, each drawn independently with the
/// group's population share.
pub fn assignment_probability(
    v2i: usize,
    m1i: usize,
    m2i: usize,
    census: &GroupCensus,
    n: usize,
    d: usize,
) -> Result<f64> {
    if v2i + m1i + m2i != d + 1 {
        return Err(Error::invalid(
            "assignment",
            format!("{v2i} + {m1i} + {m2i} != d + 1 = {}", d + 1),
        ));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let nf = n as f64;
    let coeff = binomial(d + 1, v2i) * binomial(d + 1 - v2i, m1i);
    Ok(coeff
        * (census.v2 as f64 / nf).powi(v2i as i32)
        * (census.m1 as f64 / nf).powi(m1i as i32)
        * (census.m2 as f64 / nf).powi(m2i as i32))
}

/// All `(v2i, m1i, m2i)` with sum `d + 1`; 21 of them for `d = 4`.
pub fn assignments(d: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..=d + 1).flat_map(move |v| (0..=d + 1 - v).map(move |m1| (v, m1, d + 1 - v - m1)))
}

/// Change in `m1` caused by one phase-2 interaction with the given participant
/// groups under the accelerated memory rules.
///
/// Any `{c2}` participant makes `c2` the strict value plurality, so all memories
/// become `c2`. Otherwise values tie and the strict memory plurality decides;
/// a memory tie changes nothing.
pub fn m1_change(v2i: usize, m1i: usize, m2i: usize) -> i64 {
    if v2i > 0 || m2i > m1i {
        -(m1i as i64)
    } else if m1i > m2i {
        m2i as i64
    } else {
        0
    }
}

/// Expected one-interaction change of `m1` in phase 2 (`v1 = 0`).
pub fn expected_m1_drift(census: &GroupCensus, n: usize, d: usize) -> Result<f64> {
    if census.v1 != 0 {
        return Err(Error::invalid(
            "census",
            format!("phase 2 needs v1 = 0, got {}", census.v1),
        ));
    }
    if census.total() != n {
        return Err(Error::invalid(
            "census",
            format!("groups sum to {} for n = {n}", census.total()),
        ));
    }
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let mut drift = 0.0;
    for (v2i, m1i, m2i) in assignments(d) {
        let delta = m1_change(v2i, m1i, m2i);
        if delta != 0 {
            drift += assignment_probability(v2i, m1i, m2i, census, n, d)? * delta as f64;
        }
    }
    Ok(drift)
}

/// The degree-4 drift polynomial with its positive constant set to one:
/// `−m1 (m2(m2³ − m1³) + 4m1³v2 + 4m1m2²(m2 − m1) + 12m1²m2v2 + 6m1²v2²
/// + 12m1m2²v2 + 12m1m2v2² + 4m1v2³ + 4m2³v2 + 6m2²v2² + 4m2v2³ + v2⁴)`.
pub fn drift_polynomial(census: &GroupCensus) -> f64 {
    let v = census.v2 as f64;
    let a = census.m1 as f64;
    let b = census.m2 as f64;
    -(a * (b * (b.powi(3) - a.powi(3))
        + 4.0 * a.powi(3) * v
        + 4.0 * a * b * b * (b - a)
        + 12.0 * a * a * b * v
        + 6.0 * a * a * v * v
        + 12.0 * a * b * b * v
        + 12.0 * a * b * v * v
        + 4.0 * a * v.powi(3)
        + 4.0 * b.powi(3) * v
        + 6.0 * b * b * v * v
        + 4.0 * b * v.powi(3)
        + v.powi(4)))
}

/// Least-squares fit of `drift ≈ c · polynomial` over `(drift, polynomial)` pairs.
/// Returns `c` and the root-mean-square residual.
pub fn fit_drift_constant(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let denom: f64 = samples.iter().map(|(_, p)| p * p).sum();
    if samples.is_empty() || denom == 0.0 {
        return None;
    }
    let c = samples.iter().map(|(d, p)| d * p).sum::<f64>() / denom;
    let rss: f64 = samples.iter().map(|(d, p)| (d - c * p).powi(2)).sum();
    Some((c, (rss / samples.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_point() -> MeanFieldParams {
        MeanFieldParams::new(100.0, 4.0, 0.3, 0.7).unwrap()
    }

    fn g(v2: usize, m1: usize, m2: usize) -> GroupCensus {
        GroupCensus { v1: 0, v2, m1, m2 }
    }

    #[test]
    fn params_validation() {
        assert!(MeanFieldParams::new(1.0, 4.0, 0.3, 0.7).is_err());
        assert!(MeanFieldParams::new(100.0, 0.0, 0.3, 0.7).is_err());
        assert!(MeanFieldParams::new(100.0, 4.0, 0.6, 0.4).is_err());
        assert!(MeanFieldParams::new(100.0, 4.0, 0.3, 0.6).is_err());
        assert!(MeanFieldParams::new(100.0, 4.0, 0.0, 1.0).is_ok());
        assert!(MeanFieldParams::binary(100, 4, 0.7).is_ok());
    }

    #[test]
    fn phase1_zero_minority_stays_zero() {
        let p = MeanFieldParams::new(100.0, 4.0, 0.0, 1.0).unwrap();
        let tr = phase1_ode(&p, 20.0, DEFAULT_DT).unwrap();
        assert!(tr.values().all(|x| x == 0.0));
        assert_eq!(phase1_rate(&p, 0.0), 0.0);
    }

    #[test]
    fn phase1_decreasing_and_convex() {
        let tr = phase1_ode(&reference_point(), 200.0, DEFAULT_DT).unwrap();
        let v: Vec<f64> = tr.values().collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(v.windows(3).all(|w| w[2] - w[1] >= w[1] - w[0] - 1e-12));
        assert!(tr.last_value() < 1.0);
    }

    #[test]
    fn phase1_step_halving() {
        let p = reference_point();
        let coarse = phase1_ode(&p, 60.0, 0.01).unwrap();
        let fine = phase1_ode(&p, 60.0, 0.005).unwrap();
        for t in [1.0, 5.0, 10.0, 30.0, 60.0] {
            let (a, b) = (coarse.value_at(t), fine.value_at(t));
            assert!(((a - b) / b).abs() < 1e-6, "t = {t}: {a} vs {b}");
        }
    }

    #[test]
    fn closed_form_values() {
        let p = reference_point();
        assert_eq!(phase1_closed_form(&p, 0.0).unwrap(), 30.0);
        // 50-digit reference evaluations of the closed form.
        for (t, want) in [
            (1.0, 26.183_668_327_107_654),
            (10.0, 9.539_870_956_969_732),
            (50.0, 0.316_466_503_607_063_35),
        ] {
            let got = phase1_closed_form(&p, t).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "t = {t}: {got}");
        }
        let late = phase1_closed_form(&p, 1e4).unwrap();
        assert!((0.0..1e-30).contains(&late));
        assert!(phase1_closed_form(&MeanFieldParams::new(100.0, 4.0, 0.0, 1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn bound_values() {
        let p = reference_point();
        assert!((t_c1_bound(&p).unwrap() - 35.828427578963802).abs() < 1e-9);
        assert!((t_c2_bound(&p).unwrap() - 212.574_836_353_884_7).abs() < 1e-9);

        // n·ρ1 = e and d(ρ2 − ρ1) = n give exactly one time unit.
        let n = 10.0;
        let rho1 = std::f64::consts::E / n;
        let q = MeanFieldParams::new(n, n / (1.0 - 2.0 * rho1), rho1, 1.0 - rho1).unwrap();
        assert!((t_c2_bound(&q).unwrap() - 1.0).abs() < 1e-12);

        let tiny = MeanFieldParams::new(10.0, 4.0, 0.1, 0.9).unwrap();
        assert!(t_c2_bound(&tiny).is_err());
    }

    #[test]
    fn t_c1_shrinks_with_gap() {
        for n in [100.0, 400.0, 1600.0] {
            let mut prev = f64::INFINITY;
            for i in 1..49 {
                let rho2 = 0.5 + 0.01 * i as f64;
                let b = t_c1_bound(&MeanFieldParams::new(n, 4.0, 1.0 - rho2, rho2).unwrap()).unwrap();
                assert!(b < prev, "n = {n}, rho2 = {rho2}");
                prev = b;
            }
        }
    }

    #[test]
    fn phase2_matches_exponential() {
        let p = reference_point();
        let r = phase2_rate(&p);
        let tr = phase2_ode(&p, 30.0, 300.0, DEFAULT_DT).unwrap();
        for (t, z) in tr.points.iter().copied() {
            assert!((z - 30.0 * (-r * t).exp()).abs() < 1e-9);
        }
        assert!(phase2_ode(&p, 0.0, 10.0, 0.1).unwrap().values().all(|z| z == 0.0));
        assert!(phase2_ode(&p, 31.0, 10.0, 0.1).is_err());
        assert!(phase2_ode(&p, -1.0, 10.0, 0.1).is_err());
    }

    #[test]
    fn rk4_grid_ends_on_t_end() {
        let tr = rk4_nonnegative(|x| -x, 1.0, 1.005, 0.01).unwrap();
        assert_eq!(tr.points.last().unwrap().0, 1.005);
        assert_eq!(tr.points.len(), 102);
        assert!(rk4_nonnegative(|x| -x, 1.0, 1.0, 0.0).is_err());
        assert_eq!(tr.value_at(-1.0), 1.0);
        assert!((tr.value_at(0.005) - 0.5 * (1.0 + tr.points[1].1)).abs() < 1e-15);
    }

    #[test]
    fn multinomial_examples() {
        let all_v2 = g(10, 0, 0);
        assert_eq!(assignment_probability(5, 0, 0, &all_v2, 10, 4).unwrap(), 1.0);
        let third = g(1, 1, 1);
        let p = assignment_probability(2, 2, 1, &third, 3, 4).unwrap();
        assert!((p - 30.0 / 243.0).abs() < 1e-15);
        assert!(assignment_probability(2, 2, 2, &third, 3, 4).is_err());
        assert_eq!(assignments(4).count(), 21);
    }

    #[test]
    fn multinomial_sum_with_minority_singletons() {
        // With v1 > 0 the shares sum to less than one.
        let c = GroupCensus {
            v1: 10,
            v2: 30,
            m1: 20,
            m2: 40,
        };
        let total: f64 = assignments(4)
            .map(|(a, b, c2)| assignment_probability(a, b, c2, &c, 100, 4).unwrap())
            .sum();
        assert!((total - 0.9f64.powi(5)).abs() < 1e-12);
    }

    #[test]
    fn drift_edge_cases() {
        assert_eq!(expected_m1_drift(&g(60, 0, 40), 100, 4).unwrap(), 0.0);
        assert!(expected_m1_drift(&g(0, 50, 50), 100, 4).unwrap().abs() < 1e-15);
        assert!(expected_m1_drift(
            &GroupCensus {
                v1: 1,
                v2: 59,
                m1: 0,
                m2: 40
            },
            100,
            4
        )
        .is_err());
        assert!(expected_m1_drift(&g(1, 1, 1), 100, 4).is_err());
    }

    #[test]
    fn drift_equals_scaled_polynomial() {
        // Enumerating the 21 assignments reproduces the polynomial with c = 5 / n^5.
        for n in [20usize, 100] {
            let c = 5.0 / (n as f64).powi(5);
            for m1 in 0..=n {
                for m2 in 0..=n - m1 {
                    let census = g(n - m1 - m2, m1, m2);
                    let drift = expected_m1_drift(&census, n, 4).unwrap();
                    let poly = c * drift_polynomial(&census);
                    assert!((drift - poly).abs() < 1e-12, "n={n} m1={m1} m2={m2}");
                }
            }
        }
    }

    #[test]
    fn fit_recovers_constant() {
        let n = 20;
        let samples: Vec<(f64, f64)> = (1..n)
            .flat_map(|m1| (m1 + 1..=n - m1).map(move |m2| g(n - m1 - m2, m1, m2)))
            .map(|c| (expected_m1_drift(&c, n, 4).unwrap(), drift_polynomial(&c)))
            .collect();
        let (c, rms) = fit_drift_constant(&samples).unwrap();
        assert!((c * (n as f64).powi(5) - 5.0).abs() < 1e-9);
        assert!(rms < 1e-12);
        assert!(fit_drift_constant(&[]).is_none());
    }
}
