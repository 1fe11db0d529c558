//! Seeded random elements, cone points and faces for tests and generators.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{AlgebraSpec, Element, FaceDescriptor};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a base seed and a tag.
pub fn substream(seed: u64, tag: u64) -> TestRng {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    rng(z ^ (z >> 31))
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn unit_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let norm = crate::linalg::norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn random_element(spec: &AlgebraSpec, rng: &mut impl Rng) -> Element {
    Element::new(gaussian_vec(rng, spec.dim()))
}

pub fn unit_element(spec: &AlgebraSpec, rng: &mut impl Rng) -> Element {
    Element::new(unit_vec(rng, spec.dim()))
}

/// `x ∘ x` for a random `x`: a random point of the cone.
pub fn random_cone_point(spec: &AlgebraSpec, rng: &mut impl Rng) -> Element {
    let x = random_element(spec, rng);
    spec.jordan(&x, &x).expect("same algebra")
}

/// Random orthogonal matrix from the QR factorisation of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column signs so the distribution is Haar
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A random face: the span of the positive part of a random element.
pub fn random_face(spec: &AlgebraSpec, rng: &mut impl Rng) -> FaceDescriptor {
    let x = random_element(spec, rng);
    spec.spectral(&x)
        .expect("valid element")
        .select(spec, |l| l > 0.0)
}

/// A random element of `V(c, 1)`.
pub fn random_in_span(spec: &AlgebraSpec, face: &FaceDescriptor, rng: &mut impl Rng) -> Element {
    face.compress(spec, &random_element(spec, rng))
}

/// A random element of `V(c, ½)`.
pub fn random_in_half(spec: &AlgebraSpec, face: &FaceDescriptor, rng: &mut impl Rng) -> Element {
    let x = random_element(spec, rng);
    let (_, half, _) = spec.peirce_split(face, &x).expect("valid face");
    half
}
