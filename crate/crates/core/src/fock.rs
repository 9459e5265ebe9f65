//! Truncated Fock basis and single-oscillator operator matrices.
//!
//! Matrix elements of Gaussian potentials are evaluated with Gauss–Hermite
//! quadrature. Each oscillator eigenfunction is written as
//! ψ_n(x) = ψ̃_n(x)·e^(−x²/2), where the scaled functions ψ̃_n obey the same
//! three-term recurrence and never underflow on the quadrature grid. The
//! product of the two Gaussians e^(−x²)·e^(−(x−c)²/2w²) is itself a Gaussian,
//! which becomes the quadrature weight after a shift and rescale of x; the
//! remaining integrand is a polynomial, so a rule with at least N nodes is
//! exact for every width.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

/// Largest Hermite-function order accepted by [`hermite_function`].
pub const MAX_HERMITE_ORDER: usize = 4096;

/// Largest change allowed in any coupling-matrix element when the quadrature
/// node count is doubled.
pub const QUADRATURE_SELF_CHECK_TOL: f64 = 1e-10;

/// π^(−1/4).
const PI_M4: f64 = 0.751_125_544_464_942_5;

/// Truncated single-oscillator basis {|0⟩, …, |N−1⟩}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::invalid(
                "cutoff",
                format!("Fock cutoff must be at least 2, got {cutoff}"),
            ));
        }
        Ok(FockSpace { cutoff })
    }

    /// Number of retained Fock states N.
    pub fn dim(&self) -> usize {
        self.cutoff
    }

    /// Gauss–Hermite node count used for this basis: 2N + 64.
    pub fn default_node_count(&self) -> usize {
        2 * self.cutoff + 64
    }

    pub fn default_quadrature(&self) -> QuadratureRule {
        build_quadrature(self.default_node_count()).expect("node count is positive")
    }
}

/// Gauss–Hermite rule for ∫ f(x) e^(−x²) dx ≈ Σ wᵢ f(xᵢ).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Σ wᵢ f(xᵢ), i.e. ∫ f(x) e^(−x²) dx. The weight is *not* applied to `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Scaled Hermite functions ψ̃_n(x) = ψ_n(x)·e^(x²/2) for n = 0..count.
///
/// Overflows only for |x| far outside any Gauss–Hermite grid used here.
pub fn scaled_hermite_functions(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(PI_M4);
    if count == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * PI_M4);
    for n in 1..count - 1 {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Normalized oscillator eigenfunction ψ_n(x).
///
/// Uses the normalized three-term recurrence on the scaled functions with a
/// running power-of-two rescale, so neither large `n` nor large |x| overflows
/// before the final e^(−x²/2) factor is applied.
pub fn hermite_function(n: usize, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_ORDER {
        return Err(Error::BasisOverflow {
            order: n,
            max: MAX_HERMITE_ORDER,
        });
    }
    if !x.is_finite() {
        return Err(Error::invalid("x", "must be finite"));
    }
    let (cur, _, log2_scale) = scaled_pair(n, x);
    let log_mag = (log2_scale as f64) * std::f64::consts::LN_2 - 0.5 * x * x;
    Ok(cur * log_mag.exp())
}

/// Gauss–Hermite nodes (ascending) and weights for weight function e^(−x²).
///
/// Nodes are seeded by the eigenvalues of the symmetric Jacobi matrix and
/// polished by Newton iteration on the rescaled recurrence; weights are
/// formed from the rescaled value of ψ̃_{n−1} so tail weights keep full
/// relative precision until they underflow.
pub fn build_quadrature(node_count: usize) -> Result<QuadratureRule> {
    if node_count == 0 {
        return Err(Error::invalid("node_count", "must be at least 1"));
    }
    if node_count > MAX_HERMITE_ORDER {
        return Err(Error::BasisOverflow {
            order: node_count,
            max: MAX_HERMITE_ORDER,
        });
    }
    let n = node_count;
    let nf = n as f64;
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let seeds = jacobi
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("Jacobi eigensolve failed: {e:?}")))?;
    let half = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..half {
        // Positive root, counted from the largest.
        let mut z = seeds[n - 1 - i].abs();
        if n % 2 == 1 && i == half - 1 {
            z = 0.0;
        } else {
            for _ in 0..8 {
                let (p1, p2, _) = scaled_pair(n, z);
                let dz = p1 / ((2.0 * nf).sqrt() * p2);
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
        }
        let (_, p2, log2_scale) = scaled_pair(n, z);
        let w = (-2.0 * log2_scale as f64 * std::f64::consts::LN_2).exp() / (nf * p2 * p2);
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if nodes.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::Numerical(format!(
            "Gauss–Hermite nodes for n = {n} are not strictly increasing"
        )));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// (ψ̃_n(z), ψ̃_{n−1}(z)) divided by 2^s, and s.
fn scaled_pair(n: usize, z: f64) -> (f64, f64, i32) {
    let mut p1 = PI_M4;
    let mut p2 = 0.0;
    let mut log2_scale = 0i32;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
        if p1.abs() > 1e150 {
            p1 *= 2f64.powi(-500);
            p2 *= 2f64.powi(-500);
            log2_scale += 500;
        }
    }
    (p1, p2, log2_scale)
}

/// Real symmetric matrix ⟨j|exp(−(x̂ − center)²/(2·width²))|k⟩ on `rule`,
/// without any convergence check.
pub fn gaussian_matrix_real(space: &FockSpace, width: f64, center: f64, rule: &QuadratureRule) -> Mat<f64> {
    // e^(−x²)·e^(−a(x−c)²) = e^(−a c²/b)·e^(−b(x−m)²) with b = 1 + a, m = a c/b,
    // so substituting x = m + u/√b leaves a polynomial of degree 2N − 2 in u
    // against the weight e^(−u²).
    let n = space.dim();
    let a = 1.0 / (2.0 * width * width);
    let b = 1.0 + a;
    let m = a * center / b;
    let root_b = b.sqrt();
    let prefactor = (-a * center * center / b).exp() / root_b;
    let mut g = Mat::<f64>::zeros(n, n);
    for (&u, &w) in rule.nodes().iter().zip(rule.weights()) {
        let psi = scaled_hermite_functions(n, m + u / root_b);
        for k in 0..n {
            let f = w * psi[k];
            for j in k..n {
                g[(j, k)] += f * psi[j];
            }
        }
    }
    for k in 0..n {
        for j in k..n {
            g[(j, k)] *= prefactor;
            g[(k, j)] = g[(j, k)];
        }
    }
    g
}

/// Gaussian coupling matrix G[j][k] = ∫ ψ_j(x)·exp(−(x − center)²/(2·width²))·ψ_k(x) dx.
///
/// The result is checked against a rule with twice as many nodes; if any
/// element moves by more than [`QUADRATURE_SELF_CHECK_TOL`] the quadrature is
/// considered unconverged.
pub fn gaussian_coupling_matrix(
    space: &FockSpace,
    width: f64,
    center: f64,
    rule: &QuadratureRule,
) -> Result<HermitianOperator> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::invalid("width", format!("must be positive, got {width}")));
    }
    if !center.is_finite() {
        return Err(Error::invalid("center", "must be finite"));
    }
    let g = gaussian_matrix_real(space, width, center, rule);
    let fine = build_quadrature(2 * rule.node_count())?;
    let g_fine = gaussian_matrix_real(space, width, center, &fine);
    let delta = (&g - &g_fine).norm_max();
    if !(delta < QUADRATURE_SELF_CHECK_TOL) {
        return Err(Error::QuadratureConvergence {
            nodes: rule.node_count(),
            delta,
        });
    }
    HermitianOperator::from_real_symmetric(&g)
}

/// Bare oscillator Hamiltonian a†a + 1/2 = diag(j + 1/2).
pub fn bare_hamiltonian(space: &FockSpace) -> HermitianOperator {
    HermitianOperator::from_diagonal(&bare_energies(space))
}

/// Diagonal of [`bare_hamiltonian`].
pub fn bare_energies(space: &FockSpace) -> Vec<f64> {
    (0..space.dim()).map(|j| j as f64 + 0.5).collect()
}

/// Number operator a†a = diag(j).
pub fn number_operator(space: &FockSpace) -> HermitianOperator {
    HermitianOperator::from_diagonal(&(0..space.dim()).map(|j| j as f64).collect::<Vec<_>>())
}

/// √π, the total weight of any Gauss–Hermite rule.
pub fn total_weight() -> f64 {
    PI.sqrt()
}
