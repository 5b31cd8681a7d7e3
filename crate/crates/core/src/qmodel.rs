//! Singlet-state predictions from Bloch directions.
//!
//! Correlations follow ⟨A_k B_j⟩ = −v·(n_k·n_j). Photon polarization angles
//! enter doubled, n = (cos 2φ, sin 2φ, 0); interferometric phases enter as is,
//! n = (cos φ, sin φ, 0).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("direction ({0}, {1}, {2}) is not a unit vector")]
    NotUnit(f64, f64, f64),
    #[error("visibility {0} is outside [0, 1]")]
    Visibility(f64),
    #[error("efficiency {0} is outside (0, 1]")]
    Efficiency(f64),
    #[error("outcome {0} is not +1 or -1")]
    Outcome(i8),
}

/// A unit vector on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction([f64; 3]);

impl Direction {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > 1e-12 {
            return Err(ModelError::NotUnit(x, y, z));
        }
        Ok(Direction([x, y, z]))
    }

    /// Scale a nonzero vector to unit length.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        let n = (x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(ModelError::NotUnit(x, y, z));
        }
        Ok(Direction([x / n, y / n, z / n]))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.iter().zip(other.0).map(|(a, b)| a * b).sum()
    }

    pub fn flipped(&self) -> Direction {
        Direction([-self.0[0], -self.0[1], -self.0[2]])
    }
}

pub fn bloch_from_polarization(degrees: f64) -> Direction {
    let t = (2.0 * degrees).to_radians();
    Direction([t.cos(), t.sin(), 0.0])
}

pub fn bloch_from_phase(radians: f64) -> Direction {
    Direction([radians.cos(), radians.sin(), 0.0])
}

pub fn correlation(a: &Direction, b: &Direction, visibility: f64) -> f64 {
    -visibility * a.dot(b)
}

/// p(A, B) for outcomes ±1: (1 + A·B·E)/4.
pub fn joint_probability(
    a: &Direction,
    b: &Direction,
    visibility: f64,
    outcomes: (i8, i8),
) -> Result<f64, ModelError> {
    for o in [outcomes.0, outcomes.1] {
        if o != 1 && o != -1 {
            return Err(ModelError::Outcome(o));
        }
    }
    let ab = (outcomes.0 * outcomes.1) as f64;
    Ok((1.0 + ab * correlation(a, b, visibility)) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantumState {
    Singlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    pub visibility: f64,
    pub alice: Vec<Direction>,
    pub bob: Vec<Direction>,
    pub state: QuantumState,
}

impl CorrelationModel {
    pub fn singlet(
        visibility: f64,
        alice: Vec<Direction>,
        bob: Vec<Direction>,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(ModelError::Visibility(visibility));
        }
        Ok(CorrelationModel {
            visibility,
            alice,
            bob,
            state: QuantumState::Singlet,
        })
    }

    pub fn correlation(&self, x: usize, y: usize) -> f64 {
        correlation(&self.alice[x], &self.bob[y], self.visibility)
    }

    /// Correlations for the first two settings of each party.
    pub fn correlations_2x2(&self) -> [[f64; 2]; 2] {
        [
            [self.correlation(0, 0), self.correlation(0, 1)],
            [self.correlation(1, 0), self.correlation(1, 1)],
        ]
    }

    /// p(a, b | x, y) with outcome index 0 ↔ +1 and 1 ↔ −1.
    pub fn joint(&self, x: usize, y: usize) -> [[f64; 2]; 2] {
        let e = self.correlation(x, y);
        [
            [(1.0 + e) / 4.0, (1.0 - e) / 4.0],
            [(1.0 - e) / 4.0, (1.0 + e) / 4.0],
        ]
    }
}

/// Which CHSH term carries the minus sign, as (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshSigns {
    pub negated: (usize, usize),
}

impl Default for ChshSigns {
    fn default() -> Self {
        ChshSigns { negated: (1, 1) }
    }
}

impl ChshSigns {
    pub fn all() -> [ChshSigns; 4] {
        [(0, 0), (0, 1), (1, 0), (1, 1)].map(|negated| ChshSigns { negated })
    }
}

/// S = E₀₀ + E₀₁ + E₁₀ − E₁₁.
pub fn chsh_value(e: &[[f64; 2]; 2]) -> f64 {
    chsh_value_with(e, ChshSigns::default())
}

pub fn chsh_value_with(e: &[[f64; 2]; 2], signs: ChshSigns) -> f64 {
    let mut s = 0.0;
    for (x, row) in e.iter().enumerate() {
        for (y, v) in row.iter().enumerate() {
            s += if (x, y) == signs.negated { -v } else { *v };
        }
    }
    s
}

/// Correlations of a deterministic local strategy: Alice answers `a[x]`, Bob `b[y]` (each ±1).
pub fn deterministic_correlations(a: [i8; 2], b: [i8; 2]) -> [[f64; 2]; 2] {
    let mut e = [[0.0; 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            e[x][y] = (a[x] * b[y]) as f64;
        }
    }
    e
}

/// Every deterministic ±1 response function of one party with two settings.
pub fn deterministic_strategies() -> [[i8; 2]; 4] {
    [[1, 1], [1, -1], [-1, 1], [-1, -1]]
}

pub const S_PLUS: f64 = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 4.0;
pub const S_MINUS: f64 = (1.0 - std::f64::consts::FRAC_1_SQRT_2) / 4.0;

/// Efficiencies of Alice's four detectors η₁..η₄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorEfficiencies(pub [f64; 4]);

impl DetectorEfficiencies {
    pub fn new(eta: [f64; 4]) -> Result<Self, ModelError> {
        if let Some(&bad) = eta.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(ModelError::Efficiency(bad));
        }
        Ok(DetectorEfficiencies(eta))
    }
}

/// Weights of Bob's outcome per Alice setting, `[x][b]`; the same for every Y.
/// Detectors 1 and 3 serve X=1, detectors 2 and 4 serve X=0.
pub fn detector_marginals(eff: &DetectorEfficiencies) -> [[f64; 2]; 2] {
    let [e1, e2, e3, e4] = eff.0;
    [
        [e2 * S_PLUS + e4 * S_MINUS, e2 * S_MINUS + e4 * S_PLUS],
        [e1 * S_PLUS + e3 * S_MINUS, e1 * S_MINUS + e3 * S_PLUS],
    ]
}

/// Vertices (20) and face centres (12) of a regular dodecahedron, rotated so
/// that (0, 0, 1) is a vertex.
pub fn dodecahedron_candidates() -> Vec<Direction> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let ip = 1.0 / phi;
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(32);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                pts.push([sx, sy, sz]);
            }
        }
    }
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            pts.push([0.0, s1 * ip, s2 * phi]);
            pts.push([s1 * ip, s2 * phi, 0.0]);
            pts.push([s1 * phi, 0.0, s2 * ip]);
        }
    }
    // Face centres point along the vertices of the dual icosahedron.
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            pts.push([0.0, s1, s2 * phi]);
            pts.push([s1, s2 * phi, 0.0]);
            pts.push([s1 * phi, 0.0, s2]);
        }
    }
    // Rotate (1,1,1)/√3 onto the z axis: axis (1,-1,0)/√2, cos θ = 1/√3.
    let c = 1.0 / 3f64.sqrt();
    let s = (1.0 - c * c).sqrt();
    let k = [
        std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
        0.0,
    ];
    pts.iter()
        .map(|p| {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let v = [p[0] / n, p[1] / n, p[2] / n];
            let kxv = [
                k[1] * v[2] - k[2] * v[1],
                k[2] * v[0] - k[0] * v[2],
                k[0] * v[1] - k[1] * v[0],
            ];
            let kv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
            let r: Vec<f64> = (0..3)
                .map(|i| v[i] * c + kxv[i] * s + k[i] * kv * (1.0 - c))
                .collect();
            Direction::normalized(r[0], r[1], r[2]).expect("nonzero")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn polarization_mapping() {
        let d = bloch_from_polarization(0.0).components();
        assert!(close(d[0], 1.0, 1e-15) && close(d[1], 0.0, 1e-15));
        let d = bloch_from_polarization(45.0).components();
        assert!(close(d[0], 0.0, 1e-15) && close(d[1], 1.0, 1e-15));
        let d = bloch_from_polarization(22.5).components();
        let h = 0.5f64.sqrt();
        assert!(close(d[0], h, 1e-15) && close(d[1], h, 1e-15));
    }

    #[test]
    fn correlation_examples() {
        let a = bloch_from_polarization(0.0);
        assert!(close(correlation(&a, &a, 1.0), -1.0, 1e-15));
        assert!(close(
            correlation(&a, &bloch_from_polarization(45.0), 1.0),
            0.0,
            1e-15
        ));
        let e = correlation(&a, &bloch_from_polarization(22.5), 1.0);
        assert!(close(e, -(45f64.to_radians().cos()), 1e-9));
    }

    #[test]
    fn chsh_examples() {
        assert_eq!(chsh_value(&[[0.0; 2]; 2]), 0.0);
        assert_eq!(chsh_value(&[[1.0, 1.0], [1.0, -1.0]]), 4.0);
        let m = CorrelationModel::singlet(
            1.0,
            vec![bloch_from_polarization(0.0), bloch_from_polarization(45.0)],
            vec![
                bloch_from_polarization(-22.5),
                bloch_from_polarization(-67.5),
            ],
        )
        .unwrap();
        let e = m.correlations_2x2();
        // Here E₁₀ = E₁₁, so the violating combination negates E₀₀.
        let s = chsh_value_with(&e, ChshSigns { negated: (0, 0) });
        assert!(close(s.abs(), 2.0 * SQRT_2, 1e-9), "{s}");
    }

    #[test]
    fn phase_setting_identity() {
        let m = CorrelationModel::singlet(
            1.0,
            vec![bloch_from_phase(FRAC_PI_4), bloch_from_phase(-FRAC_PI_4)],
            vec![bloch_from_phase(0.0), bloch_from_phase(FRAC_PI_2)],
        )
        .unwrap();
        let e = m.correlations_2x2();
        assert!(close(e[0][0], e[0][1], 1e-15));
        assert!(close(e[0][0], e[1][0], 1e-15));
        assert!(close(e[0][0], -e[1][1], 1e-15));
        assert!(close(chsh_value(&e).abs(), 2.0 * SQRT_2, 1e-12));
    }

    #[test]
    fn joint_probability_examples() {
        let a = bloch_from_polarization(10.0);
        assert_eq!(joint_probability(&a, &a, 1.0, (1, 1)).unwrap(), 0.0);
        let b = bloch_from_polarization(55.0);
        for o in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            assert!(close(
                joint_probability(&a, &b, 0.7, o).unwrap(),
                0.25,
                1e-15
            ));
        }
        assert!(joint_probability(&a, &b, 1.0, (0, 1)).is_err());
    }

    #[test]
    fn detector_weights() {
        let w = detector_marginals(&DetectorEfficiencies::new([1.0; 4]).unwrap());
        for row in w {
            for v in row {
                assert!(close(v, 0.5, 1e-15));
            }
        }
        // η₃ → 0 is outside the valid range, so evaluate the formula directly.
        let w = detector_marginals(&DetectorEfficiencies([1.0, 1.0, 0.0, 1.0]));
        assert!(close(w[1][0], 0.426777, 1e-6));
        assert!(close(w[1][1], 0.073223, 1e-6));
        assert!(DetectorEfficiencies::new([1.0, 0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn local_strategies_respect_bound() {
        for a in deterministic_strategies() {
            for b in deterministic_strategies() {
                for signs in ChshSigns::all() {
                    assert!(chsh_value_with(&deterministic_correlations(a, b), signs).abs() <= 2.0);
                }
            }
        }
    }

    #[test]
    fn dodecahedron_set() {
        let pts = dodecahedron_candidates();
        assert_eq!(pts.len(), 32);
        assert!(pts.iter().any(|p| close(p.components()[2], 1.0, 1e-12)));
        for (i, p) in pts.iter().enumerate() {
            let n: f64 = p.components().iter().map(|x| x * x).sum();
            assert!(close(n, 1.0, 1e-12));
            for q in &pts[..i] {
                assert!(p.dot(q) < 1.0 - 1e-9, "duplicate point");
            }
        }
    }

    fn direction() -> impl Strategy<Value = Direction> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-6)
            .prop_map(|(x, y, z)| Direction::normalized(x, y, z).unwrap())
    }

    proptest! {
        #[test]
        fn singlet_marginals_are_half(a in direction(), b in direction(), v in 0.0f64..=1.0) {
            for oa in [1i8, -1] {
                let m = joint_probability(&a, &b, v, (oa, 1)).unwrap() + joint_probability(&a, &b, v, (oa, -1)).unwrap();
                prop_assert!((m - 0.5).abs() < 1e-15);
            }
            let total: f64 = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
                .iter()
                .map(|&o| joint_probability(&a, &b, v, o).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-15);
        }

        #[test]
        fn correlation_symmetries(a in direction(), b in direction(), v in 0.0f64..=1.0) {
            prop_assert!((correlation(&a, &b, v) - correlation(&b, &a, v)).abs() < 1e-15);
            prop_assert!((correlation(&a.flipped(), &b, v) + correlation(&a, &b, v)).abs() < 1e-15);
            let p = |o| joint_probability(&a, &b, v, o).unwrap();
            let e = p((1, 1)) + p((-1, -1)) - p((1, -1)) - p((-1, 1));
            prop_assert!((e - correlation(&a, &b, v)).abs() < 1e-14);
        }
    }
}
