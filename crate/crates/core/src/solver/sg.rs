//! Exponentially fitted (Scharfetter-Gummel) electron flux.

use crate::materials::Q;

/// B(t) = t / (e^t - 1), continuous through t = 0.
#[inline]
pub fn bernoulli(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        1.0 - 0.5 * t + t * t / 12.0
    } else {
        let d = t.exp_m1();
        if d.is_infinite() {
            0.0
        } else {
            t / d
        }
    }
}

/// Geometry of one mesh edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    /// Node spacing along the edge (cm).
    pub length_cm: f64,
    /// Cross-section the flux passes through (cm^2).
    pub area_cm2: f64,
}

/// Conventional electron current (A) flowing from node i to node j.
pub fn sg_edge_flux(
    psi_i: f64,
    psi_j: f64,
    n_i: f64,
    n_j: f64,
    mu: f64,
    vt: f64,
    edge: EdgeGeometry,
) -> f64 {
    let t = (psi_j - psi_i) / vt;
    Q * mu * vt / edge.length_cm * (bernoulli(t) * n_j - bernoulli(-t) * n_i) * edge.area_cm2
}

#[cfg(test)]
mod tests {
    use super::*;

    const VT: f64 = 0.025852;
    const EDGE: EdgeGeometry = EdgeGeometry {
        length_cm: 1e-7,
        area_cm2: 1e-13,
    };

    #[test]
    fn bernoulli_reference_values() {
        // 50-digit evaluations of t / expm1(t), rounded to f64
        let cases = [
            (0.0, 1.0),
            (1e-5, 0.999_995_000_008_333_3),
            (-1e-5, 1.000_005_000_008_333_3),
            (0.5, 0.770_747_041_268_399_1),
            (-0.5, 1.270_747_041_268_399),
            (20.0, 4.122_307_253_373_824e-8),
            (-20.0, 20.000_000_041_223_073),
            (700.0, 6.901_773_580_631_84e-302),
            (-700.0, 700.0),
        ];
        for (t, b) in cases {
            let got = bernoulli(t);
            assert!(got.is_finite());
            assert!(((got - b) / b).abs() < 1e-12, "B({t}) = {got}, want {b}");
        }
        assert_eq!(bernoulli(1000.0), 0.0);
    }

    #[test]
    fn zero_field_is_pure_diffusion() {
        let j = sg_edge_flux(0.3, 0.3, 1e18, 3e18, 100.0, VT, EDGE);
        let expect = Q * 100.0 * VT * (3e18 - 1e18) / 1e-7 * 1e-13;
        assert!(((j - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn small_field_uniform_density_is_ohmic() {
        let n = 2e19;
        let dpsi = 1e-6;
        let j = sg_edge_flux(0.0, dpsi, n, n, 100.0, VT, EDGE);
        let expect = -Q * 100.0 * n * dpsi / 1e-7 * 1e-13;
        assert!(((j - expect) / expect).abs() < 1e-6);
    }

    #[test]
    fn extreme_fields_reach_drift_limit() {
        for t in [700.0, -700.0] {
            let dpsi = t * VT;
            let (ni, nj) = (1e18, 5e17);
            let j = sg_edge_flux(0.0, dpsi, ni, nj, 100.0, VT, EDGE);
            assert!(j.is_finite());
            // upwinded drift: only the upstream density survives
            let c = Q * 100.0 * VT / 1e-7 * 1e-13;
            let asym = if t > 0.0 { -c * t * ni } else { c * (-t) * nj };
            assert!(((j - asym) / asym).abs() < 1e-6, "t={t}: {j} vs {asym}");
        }
    }

    #[test]
    fn equilibrium_densities_carry_no_current() {
        for dpsi in [-0.3, -0.01, 0.0, 0.02, 0.5] {
            let ni = 1e15;
            let nj = ni * (dpsi / VT).exp();
            let j = sg_edge_flux(0.1, 0.1 + dpsi, ni, nj, 100.0, VT, EDGE);
            let scale = Q * 100.0 * VT / 1e-7 * 1e-13 * ni.max(nj);
            assert!(j.abs() <= 1e-12 * scale, "{dpsi}: {j}");
        }
    }
}
