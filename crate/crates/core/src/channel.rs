//! Propagation: power-law path loss, reciprocal lognormal shadowing,
//! distance-dependent Nakagami parameters and normalized received powers.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Linear-domain channel parameters. Shadowing stays in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub alpha: f64,
    /// Shadowing standard deviation in dB; zero disables shadowing.
    pub sigma_s_db: f64,
    /// Line-of-sight radius of the distance-dependent fading model.
    pub r_f: f64,
    /// Interference suppression after despreading.
    pub g_over_h: f64,
    /// Reference SNR at unit distance (linear).
    pub gamma: f64,
    /// SINR threshold (linear).
    pub beta: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let ChannelParams {
            alpha,
            sigma_s_db,
            r_f,
            g_over_h,
            gamma,
            beta,
        } = *self;
        if !(alpha >= 2.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("path-loss exponent must be >= 2, got {alpha}")));
        }
        if !(sigma_s_db >= 0.0 && sigma_s_db.is_finite()) {
            return Err(Error::Argument(format!("shadowing sigma must be >= 0, got {sigma_s_db}")));
        }
        if !(r_f >= 0.0 && r_f.is_finite()) {
            return Err(Error::Argument(format!("line-of-sight radius must be >= 0, got {r_f}")));
        }
        if !(g_over_h >= 1.0 && g_over_h.is_finite()) {
            return Err(Error::Argument(format!("G/h must be >= 1, got {g_over_h}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::Argument(format!("reference SNR must be > 0, got {gamma}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Argument(format!("SINR threshold must be > 0, got {beta}")));
        }
        Ok(())
    }

    /// Inverse reference SNR.
    pub fn z(&self) -> f64 {
        1.0 / self.gamma
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Per-link shadowing in dB, one value per unordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingField {
    n: usize,
    // Packed upper triangle, row-major, diagonal excluded.
    xi: Vec<f64>,
}

impl ShadowingField {
    pub fn zero(n: usize) -> Self {
        ShadowingField {
            n,
            xi: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    /// Shadowing of the link between `i` and `j`, in dB. Zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "shadowing index out of range");
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.xi[a * (2 * self.n - a - 1) / 2 + (b - a - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.xi
    }
}

/// Draws i.i.d. zero-mean Gaussian shadowing (dB) for every unordered pair.
pub fn draw_shadowing<R: Rng + ?Sized>(
    topology: &Topology,
    sigma_s_db: f64,
    rng: &mut R,
) -> Result<ShadowingField> {
    if !(sigma_s_db >= 0.0 && sigma_s_db.is_finite()) {
        return Err(Error::Argument(format!("shadowing sigma must be >= 0, got {sigma_s_db}")));
    }
    let mut field = ShadowingField::zero(topology.len());
    if sigma_s_db > 0.0 {
        let normal = Normal::new(0.0, sigma_s_db).expect("finite positive sigma");
        for v in field.xi.iter_mut() {
            *v = normal.sample(rng);
        }
    }
    Ok(field)
}

/// Nakagami parameter of a link of length `d`: 3 within `r_f/2`, 2 within
/// `r_f`, 1 (Rayleigh) beyond.
pub fn nakagami_m(d: f64, r_f: f64) -> u32 {
    if d <= r_f / 2.0 {
        3
    } else if d <= r_f {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Desired,
    Interferer,
}

/// Normalized power of a transmitter at distance `d` with shadowing `xi_db`.
/// Interference is scaled down by `G/h`; transmit powers are equal.
pub fn normalized_power(kind: SignalKind, d: f64, xi_db: f64, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("link length must be positive, got {d}")));
    }
    let omega = db_to_linear(xi_db) * d.powf(-params.alpha);
    Ok(match kind {
        SignalKind::Desired => omega,
        SignalKind::Interferer => omega / params.g_over_h,
    })
}

/// Precomputed per-pair desired-signal powers and Nakagami parameters for
/// one topology and shadowing realization.
#[derive(Debug, Clone)]
pub struct LinkTable {
    n: usize,
    g_over_h: f64,
    omega: Vec<f64>,
    m: Vec<u8>,
}

impl LinkTable {
    pub fn new(topology: &Topology, shadowing: &ShadowingField, params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        let n = topology.len();
        if shadowing.nodes() != n {
            return Err(Error::Argument(format!(
                "shadowing field covers {} nodes, topology has {n}",
                shadowing.nodes()
            )));
        }
        let mut omega = vec![0.0; n * n];
        let mut m = vec![0u8; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = topology.dist(i, j);
                let w = normalized_power(SignalKind::Desired, d, shadowing.get(i, j), params)?;
                let mij = nakagami_m(d, params.r_f) as u8;
                omega[i * n + j] = w;
                omega[j * n + i] = w;
                m[i * n + j] = mij;
                m[j * n + i] = mij;
            }
        }
        Ok(LinkTable {
            n,
            g_over_h: params.g_over_h,
            omega,
            m,
        })
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    /// Desired-signal normalized power from `i` at `j`.
    #[inline]
    pub fn desired(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.n + j]
    }

    /// Interference normalized power from `i` at `j`.
    #[inline]
    pub fn interference(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.n + j] / self.g_over_h
    }

    #[inline]
    pub fn m(&self, i: usize, j: usize) -> u32 {
        self.m[i * self.n + j] as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::topology::generate_topology;
    use proptest::prelude::*;

    fn params() -> ChannelParams {
        ChannelParams {
            alpha: 3.5,
            sigma_s_db: 8.0,
            r_f: 0.2,
            g_over_h: 96.0,
            gamma: 1.0,
            beta: 1.0,
        }
    }

    #[test]
    fn nakagami_bands() {
        assert_eq!(nakagami_m(0.05, 0.2), 3);
        assert_eq!(nakagami_m(0.1, 0.2), 3);
        assert_eq!(nakagami_m(0.15, 0.2), 2);
        assert_eq!(nakagami_m(0.2, 0.2), 2);
        assert_eq!(nakagami_m(0.5, 0.2), 1);
        assert_eq!(nakagami_m(0.05, 0.0), 1);
        assert_eq!(nakagami_m(1e-3, 0.0), 1);
    }

    #[test]
    fn normalized_power_values() {
        let p = params();
        assert_eq!(normalized_power(SignalKind::Desired, 1.0, 0.0, &p).unwrap(), 1.0);
        let i = normalized_power(SignalKind::Interferer, 1.0, 0.0, &p).unwrap();
        assert!((i - 1.0 / 96.0).abs() < 1e-15);
        let d = normalized_power(SignalKind::Desired, 0.5, 0.0, &p).unwrap();
        assert!((d - 2f64.powf(3.5)).abs() < 1e-12);
        assert!((d - 11.3137).abs() < 1e-4);
        assert!(matches!(
            normalized_power(SignalKind::Desired, 0.0, 0.0, &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn unit_spreading_makes_kinds_coincide() {
        let p = ChannelParams { g_over_h: 1.0, ..params() };
        for &(d, xi) in &[(0.1, 3.0), (0.7, -5.0), (1.3, 0.0)] {
            assert_eq!(
                normalized_power(SignalKind::Desired, d, xi, &p).unwrap(),
                normalized_power(SignalKind::Interferer, d, xi, &p).unwrap()
            );
        }
    }

    #[test]
    fn zero_sigma_gives_zero_field() {
        let t = generate_topology(20, 1.0, 0.05, 0.5, &mut seed::rng(1)).unwrap();
        let f = draw_shadowing(&t, 0.0, &mut seed::rng(2)).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shadowing_is_symmetric_with_requested_spread() {
        let t = generate_topology(450, 1.0, 0.02, 0.5, &mut seed::rng(4)).unwrap();
        let f = draw_shadowing(&t, 8.0, &mut seed::rng(5)).unwrap();
        assert_eq!(f.get(3, 7), f.get(7, 3));
        assert_eq!(f.get(5, 5), 0.0);
        let v = f.values();
        assert!(v.len() >= 100_000);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((var.sqrt() - 8.0).abs() / 8.0 < 0.01, "sd {}", var.sqrt());
    }

    #[test]
    fn link_table_matches_pointwise_functions() {
        let t = generate_topology(15, 1.0, 0.05, 0.5, &mut seed::rng(8)).unwrap();
        let f = draw_shadowing(&t, 8.0, &mut seed::rng(9)).unwrap();
        let p = params();
        let table = LinkTable::new(&t, &f, &p).unwrap();
        for i in 0..t.len() {
            for j in 0..t.len() {
                if i == j {
                    continue;
                }
                let d = t.distance(i, j).unwrap();
                let xi = f.get(i, j);
                assert_eq!(table.desired(i, j), normalized_power(SignalKind::Desired, d, xi, &p).unwrap());
                let intf = normalized_power(SignalKind::Interferer, d, xi, &p).unwrap();
                assert!((table.interference(i, j) - intf).abs() <= 1e-15 * intf);
                assert_eq!(table.m(i, j), nakagami_m(d, p.r_f));
                assert_eq!(table.desired(i, j), table.desired(j, i));
            }
        }
    }

    proptest! {
        #[test]
        fn power_decreases_with_distance(d in 0.01f64..2.0, step in 1e-6f64..1.0, xi in -20.0f64..20.0) {
            let p = params();
            let near = normalized_power(SignalKind::Desired, d, xi, &p).unwrap();
            let far = normalized_power(SignalKind::Desired, d + step, xi, &p).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn nakagami_non_increasing(d in 0.0f64..1.0, step in 0.0f64..1.0, r_f in 0.0f64..0.5) {
            prop_assert!(nakagami_m(d + step, r_f) <= nakagami_m(d, r_f));
        }
    }
}
