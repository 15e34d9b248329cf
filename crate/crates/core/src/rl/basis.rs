use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix3x2, Matrix5, SVector, Vector2, Vector3, Vector5};
use serde::{Deserialize, Serialize};

/// Number of quadratic monomials of `z = (x, u) ∈ R⁵`.
pub const BASIS_LEN: usize = 15;

pub type Basis = SVector<f64, BASIS_LEN>;

/// `(i, j)` index pairs of the monomials `zᵢ·zⱼ`, `i ≤ j`, in row-major
/// upper-triangular order: z₀², z₀z₁, …, z₀z₄, z₁², z₁z₂, …, z₄².
pub const MONOMIALS: [(usize, usize); BASIS_LEN] = {
    let mut out = [(0, 0); BASIS_LEN];
    let mut n = 0;
    let mut i = 0;
    while i < 5 {
        let mut j = i;
        while j < 5 {
            out[n] = (i, j);
            n += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

pub fn stack(x: &Vector2<f64>, u: &Vector3<f64>) -> Vector5<f64> {
    Vector5::new(x[0], x[1], u[0], u[1], u[2])
}

/// All degree-two monomials of `(x, u)` in [`MONOMIALS`] order.
pub fn basis_phi(x: &Vector2<f64>, u: &Vector3<f64>) -> Basis {
    let z = stack(x, u);
    Basis::from_fn(|k, _| {
        let (i, j) = MONOMIALS[k];
        z[i] * z[j]
    })
}

/// Weights of `Q(x, u) = Wᵀφ(x, u) = zᵀHz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QWeights(pub Basis);

impl QWeights {
    /// Symmetric kernel; off-diagonal entries carry half the monomial weight.
    pub fn to_kernel(&self) -> Matrix5<f64> {
        let mut h = Matrix5::zeros();
        for (k, &(i, j)) in MONOMIALS.iter().enumerate() {
            if i == j {
                h[(i, i)] = self.0[k];
            } else {
                h[(i, j)] = 0.5 * self.0[k];
                h[(j, i)] = 0.5 * self.0[k];
            }
        }
        h
    }

    /// Inverse of [`to_kernel`](Self::to_kernel); only the upper triangle of `h` is read.
    pub fn from_kernel(h: &Matrix5<f64>) -> Self {
        QWeights(Basis::from_fn(|k, _| {
            let (i, j) = MONOMIALS[k];
            if i == j {
                h[(i, i)]
            } else {
                2.0 * h[(i, j)]
            }
        }))
    }

    pub fn value(&self, x: &Vector2<f64>, u: &Vector3<f64>) -> f64 {
        self.0.dot(&basis_phi(x, u))
    }

    pub fn hxx(&self) -> Matrix2<f64> {
        self.to_kernel().fixed_view::<2, 2>(0, 0).into()
    }

    pub fn hxu(&self) -> Matrix2x3<f64> {
        self.to_kernel().fixed_view::<2, 3>(0, 2).into()
    }

    pub fn hux(&self) -> Matrix3x2<f64> {
        self.to_kernel().fixed_view::<3, 2>(2, 0).into()
    }

    pub fn huu(&self) -> Matrix3<f64> {
        self.to_kernel().fixed_view::<3, 3>(2, 2).into()
    }

    pub fn as_array(&self) -> [f64; BASIS_LEN] {
        self.0.into()
    }
}

impl Serialize for QWeights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for QWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; BASIS_LEN]>::deserialize(d)?;
        Ok(QWeights(Basis::from(v)))
    }
}
