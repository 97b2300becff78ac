//! Seeded random operators and states for sweeps and property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{inner, vector_norm as norm, CMatrix, C64};
use crate::stdform::StandardForm;

pub type QdsRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> QdsRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with unit-variance complex Gaussian entries.
pub fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| complex_normal(rng))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    random_matrix(n, rng).hermitian_part()
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    loop {
        let v = random_vector(n, rng);
        let norm = norm(&v);
        if norm > 1e-8 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Unit vector orthogonal to the unit vector `phi`. Requires `n ≥ 2`.
pub fn random_orthogonal_unit(phi: &[C64], rng: &mut impl Rng) -> Vec<C64> {
    assert!(phi.len() >= 2, "no orthogonal complement in dimension 1");
    loop {
        let mut v = random_vector(phi.len(), rng);
        let overlap = inner(phi, &v);
        for (x, p) in v.iter_mut().zip(phi) {
            *x -= overlap * p;
        }
        let n = norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Haar-ish unitary from Gram-Schmidt on a Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = random_matrix(n, rng);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for c in 0..n {
        let mut v = g.column(c);
        for q in &cols {
            let overlap = inner(q, &v);
            for (x, qi) in v.iter_mut().zip(q) {
                *x -= overlap * qi;
            }
        }
        let nv = norm(&v);
        cols.push(v.into_iter().map(|z| z / nv).collect());
    }
    CMatrix::from_fn(n, n, |r, c| cols[c][r])
}

/// Density matrix of the given rank (trace one, PSD).
pub fn random_density_matrix(n: usize, rank: usize, rng: &mut impl Rng) -> CMatrix {
    let mut rho = CMatrix::zeros(n, n);
    for _ in 0..rank.max(1) {
        let v = random_vector(n, rng);
        rho += &CMatrix::outer(&v, &v);
    }
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr)
}

/// GKSL standard form with random Hermitian part and `jumps` random jump
/// operators.
pub fn random_gksl(n: usize, jumps: usize, rng: &mut impl Rng) -> StandardForm {
    let h = random_hermitian(n, rng);
    let ls: Vec<CMatrix> = (0..jumps)
        .map(|_| random_matrix(n, rng).scale_real(0.5))
        .collect();
    StandardForm::from_hamiltonian_jumps(&h, ls, &Default::default())
        .expect("random Hamiltonian is Hermitian by construction")
}

/// `rank` random Kraus operators on an `n`-dimensional space.
pub fn random_kraus(n: usize, rank: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    (0..rank).map(|_| random_matrix(n, rng)).collect()
}
