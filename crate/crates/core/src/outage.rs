//! Conditional outage probability of a link under integer Nakagami fading.
//!
//! Given the normalized desired power, the normalized powers of the active
//! interferers and the inverse reference SNR `z`, the probability that the
//! SINR falls to `beta` or below has a finite closed form when every Nakagami
//! parameter is an integer. [`monte_carlo_outage`] samples the SINR directly
//! and serves as an independent check.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest excursion of the unclamped probability outside `[0, 1]` that is
/// attributed to round-off.
pub const ROUND_OFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub omega: f64,
    pub m: u32,
}

impl Interferer {
    pub fn new(omega: f64, m: u32) -> Self {
        Interferer { omega, m }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutageInput {
    pub omega: f64,
    pub m: u32,
    pub interferers: Vec<Interferer>,
    pub beta: f64,
    pub z: f64,
}

impl LinkOutageInput {
    pub fn validate(&self) -> Result<()> {
        check_desired(self.omega, self.m, self.beta, self.z)?;
        for (idx, i) in self.interferers.iter().enumerate() {
            check_interferer(idx, i)?;
        }
        Ok(())
    }
}

fn check_desired(omega: f64, m: u32, beta: f64, z: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("desired power must be positive, got {omega}")));
    }
    if m == 0 {
        return Err(Error::Domain("Nakagami parameter must be >= 1".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("threshold must be positive, got {beta}")));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("inverse SNR must be >= 0, got {z}")));
    }
    Ok(())
}

fn check_interferer(idx: usize, i: &Interferer) -> Result<()> {
    if !(i.omega > 0.0 && i.omega.is_finite()) {
        return Err(Error::Domain(format!(
            "interferer {idx} power must be positive, got {}",
            i.omega
        )));
    }
    if i.m == 0 {
        return Err(Error::Domain(format!("interferer {idx} Nakagami parameter must be >= 1")));
    }
    Ok(())
}

type Coeffs = SmallVec<[f64; 4]>;

/// Per-interferer factors `G_0..=G_max_t` for composite threshold `beta1`.
///
/// `G_0 = psi^m`, `G_l = C(l+m-1, l) (omega/m)^l psi^(m+l)` with
/// `psi = 1 / (beta1 omega / m + 1)`.
fn interferer_factors(i: Interferer, beta1: f64, max_t: usize, out: &mut Coeffs) {
    let m = i.m as f64;
    let scaled = i.omega / m;
    let psi = 1.0 / (beta1 * scaled + 1.0);
    out.clear();
    let mut g = psi.powi(i.m as i32);
    out.push(g);
    let step = scaled * psi;
    for l in 1..=max_t {
        let l = l as f64;
        g *= (l + m - 1.0) / l * step;
        out.push(g);
    }
}

/// Folds one interferer into `h` (coefficients `H_0..`) by convolution.
fn convolve_in(h: &mut Coeffs, g: &Coeffs) {
    for t in (0..h.len()).rev() {
        let mut acc = 0.0;
        for (l, gl) in g.iter().enumerate().take(t + 1) {
            acc += h[t - l] * gl;
        }
        h[t] = acc;
    }
}

fn h_coefficients<I>(interferers: I, beta1: f64, max_t: usize) -> Coeffs
where
    I: IntoIterator<Item = Interferer>,
{
    if max_t <= 2 {
        return SmallVec::from_slice(&h_small(interferers, beta1)[..=max_t]);
    }
    let mut h: Coeffs = SmallVec::from_elem(0.0, max_t + 1);
    h[0] = 1.0;
    let mut g = Coeffs::new();
    for i in interferers {
        interferer_factors(i, beta1, max_t, &mut g);
        convolve_in(&mut h, &g);
    }
    h
}

/// `H_0..H_2` with the convolution unrolled; the engine's links never need more.
fn h_small<I>(interferers: I, beta1: f64) -> [f64; 3]
where
    I: IntoIterator<Item = Interferer>,
{
    let (mut h0, mut h1, mut h2) = (1.0, 0.0, 0.0);
    for i in interferers {
        let m = i.m as f64;
        let scaled = i.omega / m;
        let psi = 1.0 / (beta1 * scaled + 1.0);
        let g0 = match i.m {
            1 => psi,
            2 => psi * psi,
            3 => psi * psi * psi,
            _ => psi.powi(i.m as i32),
        };
        let step = scaled * psi;
        let g1 = g0 * m * step;
        let g2 = g1 * (m + 1.0) / 2.0 * step;
        h2 = h2 * g0 + h1 * g1 + h0 * g2;
        h1 = h1 * g0 + h0 * g1;
        h0 *= g0;
    }
    [h0, h1, h2]
}

/// `H_t` for the given interferers: the sum over all multi-indices
/// `{l_i >= 0, sum l_i = t}` of `prod G_{l_i}(i)`.
pub fn coefficient_h(t: i64, interferers: &[Interferer], beta1: f64) -> Result<f64> {
    if t < 0 {
        return Err(Error::Domain(format!("coefficient index must be >= 0, got {t}")));
    }
    if !(beta1 > 0.0 && beta1.is_finite()) {
        return Err(Error::Domain(format!("composite threshold must be positive, got {beta1}")));
    }
    for (idx, i) in interferers.iter().enumerate() {
        check_interferer(idx, i)?;
    }
    let t = t as usize;
    Ok(h_coefficients(interferers.iter().copied(), beta1, t)[t])
}

/// Unclamped closed-form outage; inputs are assumed valid.
pub(crate) fn raw_outage<I>(omega: f64, m: u32, beta: f64, z: f64, interferers: I) -> f64
where
    I: IntoIterator<Item = Interferer>,
{
    let beta1 = beta * m as f64 / omega;
    let max_t = (m - 1) as usize;
    let h = h_coefficients(interferers, beta1, max_t);

    // (beta1 z)^s z^-t = beta1^s z^(s-t); written this way z = 0 leaves only t = s.
    let mut total = 0.0;
    let mut beta_pow = 1.0;
    for s in 0..m as usize {
        let mut inner = 0.0;
        let mut z_pow = 1.0;
        let mut fact = 1.0;
        for k in 0..=s {
            // k = s - t
            if k > 0 {
                z_pow *= z;
                fact *= k as f64;
            }
            inner += z_pow * h[s - k] / fact;
        }
        total += beta_pow * inner;
        beta_pow *= beta1;
    }
    1.0 - (-beta1 * z).exp() * total
}

fn finish(raw: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::Numeric(format!("outage probability evaluated to {raw}")));
    }
    if raw < -ROUND_OFF || raw > 1.0 + ROUND_OFF {
        return Err(Error::Numeric(format!(
            "outage probability {raw} outside [0, 1] beyond round-off"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// Closed-form conditional outage probability of one link.
pub fn outage_probability(input: &LinkOutageInput) -> Result<f64> {
    input.validate()?;
    finish(raw_outage(
        input.omega,
        input.m,
        input.beta,
        input.z,
        input.interferers.iter().copied(),
    ))
}

/// Allocation-free entry point used by the simulation engine. Inputs come
/// from a validated [`crate::channel::LinkTable`].
pub(crate) fn outage_from_parts<I>(omega: f64, m: u32, beta: f64, z: f64, interferers: I) -> Result<f64>
where
    I: IntoIterator<Item = Interferer>,
{
    finish(raw_outage(omega, m, beta, z, interferers))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: u64,
}

/// Fraction of sampled fading states whose SINR is at or below `beta`. Each
/// power gain is a unit-mean gamma variable with shape equal to the link's
/// Nakagami parameter.
pub fn monte_carlo_outage<R: Rng + ?Sized>(
    input: &LinkOutageInput,
    draws: u64,
    rng: &mut R,
) -> Result<McEstimate> {
    input.validate()?;
    if draws == 0 {
        return Err(Error::Argument("at least one draw is required".into()));
    }
    let unit_gamma = |m: u32| Gamma::new(m as f64, 1.0 / m as f64).expect("shape >= 1");
    let desired = unit_gamma(input.m);
    let interferers: Vec<(f64, Gamma<f64>)> = input
        .interferers
        .iter()
        .map(|i| (i.omega, unit_gamma(i.m)))
        .collect();

    let mut outages = 0u64;
    for _ in 0..draws {
        let signal = desired.sample(rng) * input.omega;
        let mut noise = input.z;
        for (omega, dist) in &interferers {
            noise += dist.sample(rng) * omega;
        }
        // signal / noise <= beta, with 0/0 and x/0 treated as infinite SINR
        if noise > 0.0 && signal <= input.beta * noise {
            outages += 1;
        }
    }
    let p = outages as f64 / draws as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / draws as f64).sqrt(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::{prop, prop_assert, proptest, Strategy};

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Straight transcription of G_l using the gamma-function ratio as a
    /// binomial coefficient.
    fn g_direct(l: usize, i: &Interferer, beta1: f64) -> f64 {
        let m = i.m as f64;
        let psi = 1.0 / (beta1 * i.omega / m + 1.0);
        if l == 0 {
            psi.powf(m)
        } else {
            binomial(l as u64 + i.m as u64 - 1, l as u64) * (i.omega / m).powi(l as i32) * psi.powf(m + l as f64)
        }
    }

    /// Exhaustive enumeration over all multi-indices summing to t.
    fn h_enumerated(t: usize, interferers: &[Interferer], beta1: f64) -> f64 {
        fn rec(t: usize, rest: &[Interferer], beta1: f64) -> f64 {
            match rest.split_first() {
                None => {
                    if t == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Some((first, tail)) => (0..=t)
                    .map(|l| g_direct(l, first, beta1) * rec(t - l, tail, beta1))
                    .sum(),
            }
        }
        rec(t, interferers, beta1)
    }

    fn input(omega: f64, m: u32, beta: f64, z: f64, intf: &[(f64, u32)]) -> LinkOutageInput {
        LinkOutageInput {
            omega,
            m,
            beta,
            z,
            interferers: intf.iter().map(|&(o, m)| Interferer::new(o, m)).collect(),
        }
    }

    #[test]
    fn noiseless_without_interference_never_fails() {
        let e = outage_probability(&input(3.7, 1, 1.0, 0.0, &[])).unwrap();
        assert_eq!(e, 0.0);
        let e = outage_probability(&input(0.2, 3, 2.0, 0.0, &[])).unwrap();
        assert!(e.abs() < 1e-15);
    }

    #[test]
    fn noise_only_rayleigh() {
        let e = outage_probability(&input(1.0, 1, 1.0, 1.0, &[])).unwrap();
        assert!((e - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!((e - 0.63212).abs() < 1e-5);
    }

    #[test]
    fn one_rayleigh_interferer_noiseless() {
        let e = outage_probability(&input(1.0, 1, 1.0, 0.0, &[(0.5, 1)])).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn noise_only_matches_gamma_cdf() {
        // Without interference the outage is the gamma CDF P[g <= beta z / omega]
        // with shape m and scale 1/m, i.e. 1 - e^-x sum_{s<m} x^s/s!, x = m beta z / omega.
        for m in 1..=4u32 {
            let (omega, beta, z) = (2.5, 1.5, 0.7);
            let x = m as f64 * beta * z / omega;
            let mut sum = 0.0;
            let mut term = 1.0;
            for s in 0..m {
                if s > 0 {
                    term *= x / s as f64;
                }
                sum += term;
            }
            let expect = 1.0 - (-x).exp() * sum;
            let e = outage_probability(&input(omega, m, beta, z, &[])).unwrap();
            assert!((e - expect).abs() < 1e-13, "m={m}: {e} vs {expect}");
        }
    }

    #[test]
    fn h_coefficient_edge_cases() {
        let intf = [Interferer::new(0.7, 2), Interferer::new(0.1, 1)];
        let h0 = coefficient_h(0, &intf, 1.3).unwrap();
        let expect: f64 = intf
            .iter()
            .map(|i| (1.0 / (1.3 * i.omega / i.m as f64 + 1.0)).powi(i.m as i32))
            .product();
        assert!((h0 - expect).abs() < 1e-15);
        assert_eq!(coefficient_h(0, &[], 1.0).unwrap(), 1.0);
        assert_eq!(coefficient_h(1, &[], 1.0).unwrap(), 0.0);
        assert_eq!(coefficient_h(2, &[], 1.0).unwrap(), 0.0);
        let h1 = coefficient_h(1, &[Interferer::new(1.0, 1)], 1.0).unwrap();
        assert!((h1 - 0.25).abs() < 1e-15);
        assert!(matches!(coefficient_h(-1, &intf, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn convolution_matches_enumeration() {
        let mut rng = seed::rng(99);
        for _ in 0..200 {
            let k = rng.gen_range(0..6);
            let intf: Vec<Interferer> = (0..k)
                .map(|_| Interferer::new(rng.gen_range(0.01..5.0), rng.gen_range(1..=3)))
                .collect();
            let beta1 = rng.gen_range(0.1..4.0);
            for t in 0..=3 {
                let fast = coefficient_h(t, &intf, beta1).unwrap();
                let slow = h_enumerated(t as usize, &intf, beta1);
                assert!((fast - slow).abs() <= 1e-13 * slow.abs().max(1.0), "t={t}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn invalid_inputs_are_domain_errors() {
        for bad in [
            input(0.0, 1, 1.0, 0.0, &[]),
            input(1.0, 0, 1.0, 0.0, &[]),
            input(1.0, 1, 0.0, 0.0, &[]),
            input(1.0, 1, 1.0, -0.1, &[]),
            input(1.0, 1, 1.0, 0.0, &[(-1.0, 1)]),
            input(1.0, 1, 1.0, 0.0, &[(1.0, 0)]),
        ] {
            assert!(matches!(outage_probability(&bad), Err(Error::Domain(_))), "{bad:?}");
        }
        assert!(matches!(
            monte_carlo_outage(&input(1.0, 1, 1.0, 0.0, &[]), 0, &mut seed::rng(0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn oracle_limit_cases() {
        let mut rng = seed::rng(1);
        let est = monte_carlo_outage(&input(1.0, 1, 1.0, 0.0, &[]), 10_000, &mut rng).unwrap();
        assert_eq!(est.estimate, 0.0);
        let est = monte_carlo_outage(&input(1.0, 1, 1e12, 0.1, &[(0.3, 1)]), 10_000, &mut rng).unwrap();
        assert!(est.estimate > 0.999);
    }

    #[test]
    fn oracle_agrees_on_rayleigh_case() {
        let inp = input(1.0, 1, 1.0, 0.0, &[(0.5, 1)]);
        let est = monte_carlo_outage(&inp, 1_000_000, &mut seed::rng(2)).unwrap();
        assert!((est.estimate - 1.0 / 3.0).abs() <= 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn oracle_agrees_on_mixed_case() {
        let inp = input(1.0, 2, 1.0, 0.5, &[(0.2, 1), (0.2, 1)]);
        let closed = outage_probability(&inp).unwrap();
        let est = monte_carlo_outage(&inp, 1_000_000, &mut seed::rng(3)).unwrap();
        assert!((closed - est.estimate).abs() <= 4.0 * est.std_error, "{closed} vs {est:?}");
    }

    fn arb_input() -> impl Strategy<Value = LinkOutageInput> {
        (
            0.05f64..20.0,
            1u32..=3,
            prop::collection::vec((0.001f64..10.0, 1u32..=3), 0..8),
            0.1f64..4.0,
            prop::sample::select(vec![0.0, 0.1, 1.0]),
        )
            .prop_map(|(omega, m, intf, beta, z)| input(omega, m, beta, z, &intf))
    }

    proptest! {
        #[test]
        fn raw_value_stays_in_unit_interval(inp in arb_input()) {
            let raw = raw_outage(inp.omega, inp.m, inp.beta, inp.z, inp.interferers.iter().copied());
            prop_assert!(raw >= -ROUND_OFF && raw <= 1.0 + ROUND_OFF, "{raw}");
        }

        #[test]
        fn monotone_in_each_coordinate(inp in arb_input(), f in 1.01f64..3.0, which in 0usize..4) {
            let base = outage_probability(&inp).unwrap();
            let mut up = inp.clone();
            let tol = 1e-12;
            match which {
                0 => { up.beta *= f; prop_assert!(outage_probability(&up).unwrap() >= base - tol); }
                1 => { up.z = up.z * f + 0.05; prop_assert!(outage_probability(&up).unwrap() >= base - tol); }
                2 => { up.omega *= f; prop_assert!(outage_probability(&up).unwrap() <= base + tol); }
                _ => {
                    if let Some(first) = up.interferers.first_mut() {
                        first.omega *= f;
                        prop_assert!(outage_probability(&up).unwrap() >= base - tol);
                    }
                }
            }
        }

        #[test]
        fn extra_interferer_never_helps(inp in arb_input(), omega in 0.001f64..10.0, m in 1u32..=3) {
            let base = outage_probability(&inp).unwrap();
            let mut more = inp.clone();
            more.interferers.push(Interferer::new(omega, m));
            prop_assert!(outage_probability(&more).unwrap() >= base - 1e-12);
        }
    }
}
