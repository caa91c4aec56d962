//! Emitter array geometries and dipole polarizations.
//!
//! Lengths are in units of the transition wavelength, so the wavenumber is
//! fixed at `K0 = 2π`. Waveguide chains are parameterized directly by the
//! dimensionless phase `θ = k₀ a` accumulated between neighboring emitters.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use thiserror::Error;

use crate::linalg::{norm3, sub3};
use crate::{C64, K0};

/// Largest emitter count a geometry will construct.
pub const MAX_EMITTERS: usize = 100_000;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("lattice spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("emitter count must be at least 1")]
    EmptyArray,
    #[error("emitter count {0} exceeds the configured maximum {MAX_EMITTERS}")]
    TooManyEmitters(usize),
    #[error("waveguide phase must be positive, got {0}")]
    NonPositivePhase(f64),
    #[error("emitters {0} and {1} coincide")]
    CoincidentEmitters(usize, usize),
    #[error("position file line {line}: {message}")]
    PositionFile { line: usize, message: String },
    #[error("failed to read position file: {0}")]
    Io(#[from] std::io::Error),
}

/// Regular lattice families supported by the builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    Chain,
    Square,
    Cubic,
    WaveguideChain,
    Custom,
}

impl LatticeKind {
    /// Spatial dimension of the regular lattice (1 for waveguide chains).
    pub fn dimension(self) -> usize {
        match self {
            LatticeKind::Chain | LatticeKind::WaveguideChain | LatticeKind::Custom => 1,
            LatticeKind::Square => 2,
            LatticeKind::Cubic => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
            LatticeKind::Cubic => "cubic",
            LatticeKind::WaveguideChain => "waveguide_chain",
            LatticeKind::Custom => "custom",
        }
    }
}

/// An array of emitter positions plus lattice metadata.
///
/// For regular lattices `lattice_coords` holds the integer grid coordinates
/// of each emitter, which the distance-class reduction uses to key
/// correlators by separation.
#[derive(Debug, Clone)]
pub struct EmitterArray {
    pub positions: Vec<[f64; 3]>,
    pub kind: LatticeKind,
    /// Nearest-neighbor spacing in wavelengths, or the phase θ = k₀a for
    /// waveguide chains.
    pub spacing: f64,
    lattice_coords: Option<Vec<[i32; 3]>>,
}

impl EmitterArray {
    /// Build a custom array from explicit positions.
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Result<Self, GeometryError> {
        if positions.is_empty() {
            return Err(GeometryError::EmptyArray);
        }
        if positions.len() > MAX_EMITTERS {
            return Err(GeometryError::TooManyEmitters(positions.len()));
        }
        let arr = EmitterArray {
            positions,
            kind: LatticeKind::Custom,
            spacing: 0.0,
            lattice_coords: None,
        };
        arr.validate_distinct()?;
        Ok(arr)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Integer grid coordinates, present only for regular lattices.
    pub fn lattice_coords(&self) -> Option<&[[i32; 3]]> {
        self.lattice_coords.as_deref()
    }

    /// Separation vector r_n - r_m.
    pub fn separation(&self, n: usize, m: usize) -> [f64; 3] {
        sub3(self.positions[n], self.positions[m])
    }

    fn validate_distinct(&self) -> Result<(), GeometryError> {
        let n = self.len();
        for i in 0..n {
            for j in (i + 1)..n {
                if norm3(self.separation(i, j)) == 0.0 {
                    return Err(GeometryError::CoincidentEmitters(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Build a regular lattice with `n_per_side` emitters along each axis.
///
/// The array sits at a lattice corner, axis-aligned, so a chain of three
/// emitters at spacing `a` occupies (0,0,0), (a,0,0), (2a,0,0). For
/// `WaveguideChain` the `a` argument is the phase θ = k₀a and positions are
/// derived as x_n = n·θ/k₀.
pub fn build_lattice(
    kind: LatticeKind,
    n_per_side: usize,
    a: f64,
) -> Result<EmitterArray, GeometryError> {
    if n_per_side == 0 {
        return Err(GeometryError::EmptyArray);
    }
    if !(a > 0.0) {
        return Err(match kind {
            LatticeKind::WaveguideChain => GeometryError::NonPositivePhase(a),
            _ => GeometryError::NonPositiveSpacing(a),
        });
    }
    let dim = kind.dimension();
    let total = n_per_side.pow(dim as u32);
    if total > MAX_EMITTERS {
        return Err(GeometryError::TooManyEmitters(total));
    }
    let step = match kind {
        LatticeKind::WaveguideChain => a / K0,
        _ => a,
    };
    let mut positions = Vec::with_capacity(total);
    let mut coords = Vec::with_capacity(total);
    let side = n_per_side as i32;
    match dim {
        1 => {
            for i in 0..side {
                positions.push([i as f64 * step, 0.0, 0.0]);
                coords.push([i, 0, 0]);
            }
        }
        2 => {
            for i in 0..side {
                for j in 0..side {
                    positions.push([i as f64 * step, j as f64 * step, 0.0]);
                    coords.push([i, j, 0]);
                }
            }
        }
        _ => {
            for i in 0..side {
                for j in 0..side {
                    for k in 0..side {
                        positions.push([i as f64 * step, j as f64 * step, k as f64 * step]);
                        coords.push([i, j, k]);
                    }
                }
            }
        }
    }
    Ok(EmitterArray {
        positions,
        kind,
        spacing: a,
        lattice_coords: Some(coords),
    })
}

/// Build a regular lattice targeting a total emitter count.
///
/// For square and cubic lattices the per-side count is the largest integer
/// whose square/cube does not exceed `n_total`; chains use `n_total` as-is.
pub fn build_lattice_total(
    kind: LatticeKind,
    n_total: usize,
    a: f64,
) -> Result<EmitterArray, GeometryError> {
    if n_total == 0 {
        return Err(GeometryError::EmptyArray);
    }
    let side = match kind.dimension() {
        1 => n_total,
        dim => {
            let mut s = (n_total as f64).powf(1.0 / dim as f64).round() as usize;
            s = s.max(1);
            while s.pow(dim as u32) > n_total {
                s -= 1;
            }
            while (s + 1).pow(dim as u32) <= n_total {
                s += 1;
            }
            s
        }
    };
    build_lattice(kind, side, a)
}

/// Load a custom array from a text file: one emitter per line, three
/// whitespace-separated coordinates in wavelength units, `#` comments allowed.
pub fn load_custom_array(path: &Path) -> Result<EmitterArray, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    parse_custom_array(&text)
}

/// Parse custom-array text (see [`load_custom_array`]).
pub fn parse_custom_array(text: &str) -> Result<EmitterArray, GeometryError> {
    let mut positions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(GeometryError::PositionFile {
                line: idx + 1,
                message: format!("expected 3 coordinates, found {}", fields.len()),
            });
        }
        let mut p = [0.0; 3];
        for (k, f) in fields.iter().enumerate() {
            p[k] = f.parse::<f64>().map_err(|e| GeometryError::PositionFile {
                line: idx + 1,
                message: format!("bad coordinate {f:?}: {e}"),
            })?;
        }
        positions.push(p);
    }
    EmitterArray::from_positions(positions)
}

/// Named dipole orientations used throughout the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationKind {
    LinearZ,
    CircularPlus,
    CircularMinus,
}

impl PolarizationKind {
    pub fn label(self) -> &'static str {
        match self {
            PolarizationKind::LinearZ => "linear_z",
            PolarizationKind::CircularPlus => "circular_plus",
            PolarizationKind::CircularMinus => "circular_minus",
        }
    }
}

/// A unit-normalized complex dipole orientation.
#[derive(Debug, Clone, Copy)]
pub struct Polarization {
    pub d: [C64; 3],
}

impl Polarization {
    /// Construct one of the named unit vectors: linear (0,0,1) or circular
    /// (1,±i,0)/√2.
    pub fn new(kind: PolarizationKind) -> Self {
        let z = C64::new(0.0, 0.0);
        let d = match kind {
            PolarizationKind::LinearZ => [z, z, C64::new(1.0, 0.0)],
            PolarizationKind::CircularPlus => [
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(0.0, FRAC_1_SQRT_2),
                z,
            ],
            PolarizationKind::CircularMinus => [
                C64::new(FRAC_1_SQRT_2, 0.0),
                C64::new(0.0, -FRAC_1_SQRT_2),
                z,
            ],
        };
        Polarization { d }
    }

    /// d†·d, equal to 1 for the named orientations.
    pub fn norm_sq(&self) -> f64 {
        self.d.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Convenience constructor matching the named-orientation API.
pub fn polarization(kind: PolarizationKind) -> Polarization {
    Polarization::new(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chain_positions_are_equidistant() {
        let arr = build_lattice(LatticeKind::Chain, 3, 0.1).unwrap();
        assert_eq!(arr.len(), 3);
        let expect = [[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0]];
        for (p, e) in arr.positions.iter().zip(expect.iter()) {
            for k in 0..3 {
                assert_abs_diff_eq!(p[k], e[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn square_two_per_side_is_four_corners() {
        let arr = build_lattice(LatticeKind::Square, 2, 0.2).unwrap();
        assert_eq!(arr.len(), 4);
        let mut dists: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                dists.push(norm3(arr.separation(i, j)));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // 4 edges of length 0.2 and 2 diagonals of length 0.2√2.
        assert_abs_diff_eq!(dists[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(dists[3], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(dists[4], 0.2 * 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cubic_three_per_side_has_unit_nearest_neighbor_spacing() {
        let a = 0.15;
        let arr = build_lattice(LatticeKind::Cubic, 3, a).unwrap();
        assert_eq!(arr.len(), 27);
        let mut min_dist = f64::INFINITY;
        for i in 0..27 {
            for j in (i + 1)..27 {
                min_dist = min_dist.min(norm3(arr.separation(i, j)));
            }
        }
        assert_abs_diff_eq!(min_dist, a, epsilon = 1e-12);
    }

    #[test]
    fn lattice_regularity_within_tolerance() {
        // Every nearest-neighbor distance reproduces the spacing to 1e-12.
        for (kind, side) in [
            (LatticeKind::Chain, 5),
            (LatticeKind::Square, 3),
            (LatticeKind::Cubic, 2),
        ] {
            let a = 0.13;
            let arr = build_lattice(kind, side, a).unwrap();
            let n = arr.len();
            for i in 0..n {
                let mut nearest = f64::INFINITY;
                for j in 0..n {
                    if i != j {
                        nearest = nearest.min(norm3(arr.separation(i, j)));
                    }
                }
                assert!((nearest - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_distances_invariant_under_chain_reflection() {
        let arr = build_lattice(LatticeKind::Chain, 5, 0.3).unwrap();
        let n = arr.len();
        let mut dists = Vec::new();
        let mut reflected = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                dists.push(norm3(arr.separation(i, j)));
                // Reflection maps index i to n-1-i.
                reflected.push(norm3(arr.separation(n - 1 - i, n - 1 - j)));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        reflected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in dists.iter().zip(reflected.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_distances_invariant_under_square_rotation() {
        let side = 3;
        let arr = build_lattice(LatticeKind::Square, side, 0.2).unwrap();
        let coords = arr.lattice_coords().unwrap().to_vec();
        // 90-degree rotation: (i, j) -> (j, side-1-i); build the index map.
        let rotated_index = |i: i32, j: i32| -> usize {
            let (ri, rj) = (j, side as i32 - 1 - i);
            coords
                .iter()
                .position(|c| c[0] == ri && c[1] == rj)
                .unwrap()
        };
        let n = arr.len();
        for p in 0..n {
            for q in (p + 1)..n {
                let rp = rotated_index(coords[p][0], coords[p][1]);
                let rq = rotated_index(coords[q][0], coords[q][1]);
                assert_abs_diff_eq!(
                    norm3(arr.separation(p, q)),
                    norm3(arr.separation(rp, rq)),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn translation_preserves_pairwise_distances() {
        let mut arr = build_lattice(LatticeKind::Chain, 4, 0.25).unwrap();
        let before: Vec<f64> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .map(|(i, j)| norm3(arr.separation(i, j)))
            .collect();
        for p in arr.positions.iter_mut() {
            p[0] += 1.7;
            p[1] -= 0.4;
            p[2] += 0.9;
        }
        let after: Vec<f64> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .map(|(i, j)| norm3(arr.separation(i, j)))
            .collect();
        for (a, b) in before.iter().zip(after.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn total_count_builder_picks_largest_square_below() {
        let arr = build_lattice_total(LatticeKind::Square, 40, 0.2).unwrap();
        assert_eq!(arr.len(), 36);
        let arr = build_lattice_total(LatticeKind::Cubic, 64, 0.2).unwrap();
        assert_eq!(arr.len(), 64);
        let arr = build_lattice_total(LatticeKind::Chain, 17, 0.2).unwrap();
        assert_eq!(arr.len(), 17);
    }

    #[test]
    fn rejects_nonpositive_spacing_and_oversized_arrays() {
        assert!(matches!(
            build_lattice(LatticeKind::Chain, 3, 0.0),
            Err(GeometryError::NonPositiveSpacing(_))
        ));
        assert!(matches!(
            build_lattice(LatticeKind::Chain, MAX_EMITTERS + 1, 0.1),
            Err(GeometryError::TooManyEmitters(_))
        ));
    }

    #[test]
    fn named_polarizations_are_unit_vectors() {
        for kind in [
            PolarizationKind::LinearZ,
            PolarizationKind::CircularPlus,
            PolarizationKind::CircularMinus,
        ] {
            let p = Polarization::new(kind);
            assert_abs_diff_eq!(p.norm_sq(), 1.0, epsilon = 1e-12);
        }
        let p = Polarization::new(PolarizationKind::LinearZ);
        assert_eq!(p.d[2], C64::new(1.0, 0.0));
        let p = Polarization::new(PolarizationKind::CircularPlus);
        assert_abs_diff_eq!(p.d[1].im, FRAC_1_SQRT_2, epsilon = 1e-15);
        let p = Polarization::new(PolarizationKind::CircularMinus);
        assert_abs_diff_eq!(p.d[1].im, -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn custom_array_parsing_with_comments() {
        let text = "# two emitters\n0 0 0\n0.5 0 0  # second\n\n";
        let arr = parse_custom_array(text).unwrap();
        assert_eq!(arr.len(), 2);
        assert_abs_diff_eq!(arr.positions[1][0], 0.5, epsilon = 1e-15);
        assert_eq!(arr.kind, LatticeKind::Custom);
    }

    #[test]
    fn custom_array_reports_bad_lines() {
        let err = parse_custom_array("0 0\n").unwrap_err();
        match err {
            GeometryError::PositionFile { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_custom_array("0 0 0\n0 0 0\n").unwrap_err();
        assert!(matches!(err, GeometryError::CoincidentEmitters(0, 1)));
    }

    #[test]
    fn waveguide_chain_stores_phase() {
        let theta = 0.3 * std::f64::consts::PI;
        let arr = build_lattice(LatticeKind::WaveguideChain, 4, theta).unwrap();
        assert_eq!(arr.spacing, theta);
        // Positions follow x_n = n θ / k₀.
        assert_abs_diff_eq!(arr.positions[1][0], theta / K0, epsilon = 1e-15);
    }
}
