//! Coherent (J) and dissipative (Γ) coupling matrices between emitters.
//!
//! The off-diagonal couplings follow from contracting the electromagnetic
//! Green's tensor of the environment with the dipole orientation,
//! J_nm - (i/2)Γ_nm = -(3π/k₀) d†·G(r_nm)·d in natural units. The sign of the
//! split into J and Γ is fixed by requiring Γ_nm → 1 as the separation goes
//! to zero and by agreement of the two-atom decay rates with the exact
//! solver. Diagonals are set to Γ_nn = 1 and J_nn = 0 by convention; the
//! divergent real part of the Green's tensor at zero separation is a
//! single-emitter level shift absorbed into the transition frequency.

use std::io::Write;

use ndarray::Array2;
use thiserror::Error;

use crate::geometry::{EmitterArray, Polarization};
use crate::linalg::{dot_conj3, norm3, symmetric_eigenvalues};
use crate::{C64, K0};

/// Dissipative matrices must be positive semidefinite; eigenvalues below
/// -EPS_PSD indicate a construction error and fail hard.
pub const EPS_PSD: f64 = 1e-9;

/// Positivity is verified by dense eigendecomposition up to this size.
const PSD_CHECK_MAX_N: usize = 400;

#[derive(Debug, Error)]
pub enum CouplingsError {
    #[error("emitters {0} and {1} coincide; the Green's tensor diverges at zero separation")]
    CoincidentEmitters(usize, usize),
    #[error("zero separation vector")]
    ZeroSeparation,
    #[error("dissipative matrix has eigenvalue {0:.3e} below -{EPS_PSD:e}; construction is inconsistent")]
    NotPositiveSemidefinite(f64),
    #[error("array must contain at least one emitter")]
    EmptyArray,
    #[error("off-diagonal dissipative coupling |Γ[{0},{1}]| = {2} exceeds the single-emitter rate")]
    OffDiagonalTooLarge(usize, usize, f64),
}

/// Reservoir families that generate coupling matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirKind {
    FreeSpace,
    Waveguide,
    Dicke,
    Independent,
}

impl ReservoirKind {
    pub fn label(self) -> &'static str {
        match self {
            ReservoirKind::FreeSpace => "free_space",
            ReservoirKind::Waveguide => "waveguide",
            ReservoirKind::Dicke => "dicke",
            ReservoirKind::Independent => "independent",
        }
    }
}

/// Free-space electromagnetic propagator between two points.
#[derive(Debug, Clone)]
pub struct GreensTensor {
    pub g: [[C64; 3]; 3],
}

impl GreensTensor {
    /// Contract d†·G·d with a dipole orientation.
    pub fn contract(&self, pol: &Polarization) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                acc += pol.d[i].conj() * self.g[i][j] * pol.d[j];
            }
        }
        acc
    }
}

/// Free-space Green's tensor at separation `r` and wavenumber `k0`.
///
/// With x = k₀|r| the tensor is
/// e^{ix}/(4π k₀² |r|³) · [(x² + ix - 1)𝟙 + (-x² - 3ix + 3) r̂⊗r̂].
pub fn greens_free_space(r: [f64; 3], k0: f64) -> Result<GreensTensor, CouplingsError> {
    let dist = norm3(r);
    if dist == 0.0 {
        return Err(CouplingsError::ZeroSeparation);
    }
    let x = k0 * dist;
    let phase = C64::new(0.0, x).exp();
    let pref = phase / (4.0 * std::f64::consts::PI * k0 * k0 * dist * dist * dist);
    let iso = C64::new(x * x - 1.0, x);
    let aniso = C64::new(3.0 - x * x, -3.0 * x);
    let rhat = [r[0] / dist, r[1] / dist, r[2] / dist];
    let mut g = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = aniso * rhat[i] * rhat[j];
            if i == j {
                v += iso;
            }
            g[i][j] = pref * v;
        }
    }
    Ok(GreensTensor { g })
}

/// Coupling matrices over all emitter pairs.
///
/// `gamma` is real symmetric with unit diagonal; `j` is real symmetric with
/// zero diagonal (real because the free-space and waveguide propagators used
/// here are reciprocal with real phase conventions).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub j: Array2<f64>,
    pub gamma: Array2<f64>,
    pub reservoir: ReservoirKind,
}

impl CouplingMatrix {
    pub fn len(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.nrows() == 0
    }

    fn validate(self) -> Result<Self, CouplingsError> {
        let n = self.len();
        for i in 0..n {
            for k in (i + 1)..n {
                let g = self.gamma[(i, k)];
                if g.abs() > 1.0 + 1e-12 {
                    return Err(CouplingsError::OffDiagonalTooLarge(i, k, g));
                }
            }
        }
        if self.reservoir == ReservoirKind::FreeSpace && n <= PSD_CHECK_MAX_N {
            let evals = symmetric_eigenvalues(&self.gamma);
            if let Some(&min) = evals.first() {
                if min < -EPS_PSD {
                    return Err(CouplingsError::NotPositiveSemidefinite(min));
                }
            }
        }
        Ok(self)
    }

    /// Smallest eigenvalue of the dissipative matrix (dense check sizes only).
    pub fn min_gamma_eigenvalue(&self) -> Option<f64> {
        if self.len() <= PSD_CHECK_MAX_N {
            symmetric_eigenvalues(&self.gamma).first().copied()
        } else {
            None
        }
    }

    /// Write one matrix as CSV, row-major, with a header naming N and the
    /// reservoir kind.
    pub fn write_matrix_csv<W: Write>(
        &self,
        w: &mut W,
        which: MatrixSelect,
    ) -> std::io::Result<()> {
        let m = match which {
            MatrixSelect::J => &self.j,
            MatrixSelect::Gamma => &self.gamma,
        };
        writeln!(
            w,
            "# matrix={} n={} reservoir={}",
            match which {
                MatrixSelect::J => "J",
                MatrixSelect::Gamma => "Gamma",
            },
            self.len(),
            self.reservoir.label()
        )?;
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum MatrixSelect {
    J,
    Gamma,
}

/// Free-space couplings for an emitter array and dipole orientation.
pub fn couplings_free_space(
    array: &EmitterArray,
    pol: &Polarization,
) -> Result<CouplingMatrix, CouplingsError> {
    let n = array.len();
    if n == 0 {
        return Err(CouplingsError::EmptyArray);
    }
    let mut j = Array2::zeros((n, n));
    let mut gamma = Array2::from_diag_elem(n, 1.0);
    for a in 0..n {
        for b in (a + 1)..n {
            let r = array.separation(a, b);
            if norm3(r) == 0.0 {
                return Err(CouplingsError::CoincidentEmitters(a, b));
            }
            let g = greens_free_space(r, K0)?;
            // J - (i/2)Γ = -(3π/k₀) d†·G·d
            let f = -(3.0 * std::f64::consts::PI / K0) * g.contract(pol);
            j[(a, b)] = f.re;
            j[(b, a)] = f.re;
            gamma[(a, b)] = -2.0 * f.im;
            gamma[(b, a)] = -2.0 * f.im;
        }
    }
    CouplingMatrix {
        j,
        gamma,
        reservoir: ReservoirKind::FreeSpace,
    }
    .validate()
}

/// Couplings of a chain coupled to a bidirectional single-mode waveguide.
///
/// The propagator -(i/2)e^{iθ|n-m|} splits into J_nm = (1/2)sin(θ|n-m|) and
/// Γ_nm = cos(θ|n-m|); the closed forms are stored directly so no phase
/// convention can drift.
pub fn couplings_waveguide(n: usize, theta: f64) -> Result<CouplingMatrix, CouplingsError> {
    if n == 0 {
        return Err(CouplingsError::EmptyArray);
    }
    let mut j = Array2::zeros((n, n));
    let mut gamma = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let phase = theta * (a as f64 - b as f64).abs();
            if a == b {
                gamma[(a, b)] = 1.0;
            } else {
                j[(a, b)] = 0.5 * phase.sin();
                gamma[(a, b)] = phase.cos();
            }
        }
    }
    CouplingMatrix {
        j,
        gamma,
        reservoir: ReservoirKind::Waveguide,
    }
    .validate()
}

/// Idealized all-to-all couplings: Γ_nm = 1 for every pair, J = 0.
pub fn couplings_dicke(n: usize) -> Result<CouplingMatrix, CouplingsError> {
    if n == 0 {
        return Err(CouplingsError::EmptyArray);
    }
    Ok(CouplingMatrix {
        j: Array2::zeros((n, n)),
        gamma: Array2::from_elem((n, n), 1.0),
        reservoir: ReservoirKind::Dicke,
    })
}

/// Uncoupled emitters: Γ = 𝟙, J = 0.
pub fn couplings_independent(n: usize) -> Result<CouplingMatrix, CouplingsError> {
    if n == 0 {
        return Err(CouplingsError::EmptyArray);
    }
    Ok(CouplingMatrix {
        j: Array2::zeros((n, n)),
        gamma: Array2::from_diag_elem(n, 1.0),
        reservoir: ReservoirKind::Independent,
    })
}

/// A reservoir strategy: builds coupling matrices from an array geometry.
///
/// Waveguide reservoirs read the phase θ from the array's `spacing` field;
/// Dicke and independent reservoirs only use the emitter count.
pub trait ReservoirModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(
        &self,
        array: &EmitterArray,
        pol: &Polarization,
    ) -> Result<CouplingMatrix, CouplingsError>;
}

struct FreeSpaceReservoir;
struct WaveguideReservoir;
struct DickeReservoir;
struct IndependentReservoir;

impl ReservoirModel for FreeSpaceReservoir {
    fn name(&self) -> &'static str {
        "free_space"
    }
    fn build(
        &self,
        array: &EmitterArray,
        pol: &Polarization,
    ) -> Result<CouplingMatrix, CouplingsError> {
        couplings_free_space(array, pol)
    }
}

impl ReservoirModel for WaveguideReservoir {
    fn name(&self) -> &'static str {
        "waveguide"
    }
    fn build(
        &self,
        array: &EmitterArray,
        _pol: &Polarization,
    ) -> Result<CouplingMatrix, CouplingsError> {
        couplings_waveguide(array.len(), array.spacing)
    }
}

impl ReservoirModel for DickeReservoir {
    fn name(&self) -> &'static str {
        "dicke"
    }
    fn build(
        &self,
        array: &EmitterArray,
        _pol: &Polarization,
    ) -> Result<CouplingMatrix, CouplingsError> {
        couplings_dicke(array.len())
    }
}

impl ReservoirModel for IndependentReservoir {
    fn name(&self) -> &'static str {
        "independent"
    }
    fn build(
        &self,
        array: &EmitterArray,
        _pol: &Polarization,
    ) -> Result<CouplingMatrix, CouplingsError> {
        couplings_independent(array.len())
    }
}

/// All registered reservoir strategies.
pub fn reservoir_registry() -> Vec<Box<dyn ReservoirModel>> {
    vec![
        Box::new(FreeSpaceReservoir),
        Box::new(WaveguideReservoir),
        Box::new(DickeReservoir),
        Box::new(IndependentReservoir),
    ]
}

/// Look up a reservoir strategy by name.
pub fn reservoir_by_name(name: &str) -> Option<Box<dyn ReservoirModel>> {
    reservoir_registry().into_iter().find(|r| r.name() == name)
}

/// Build couplings for a reservoir kind (enum-based convenience wrapper).
pub fn build_couplings(
    kind: ReservoirKind,
    array: &EmitterArray,
    pol: &Polarization,
) -> Result<CouplingMatrix, CouplingsError> {
    reservoir_by_name(kind.label())
        .expect("registry covers all kinds")
        .build(array, pol)
}
