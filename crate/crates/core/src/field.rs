//! Nodal fields carried along an immersion.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

macro_rules! nodal_field {
    ($(#[$meta:meta])* $name:ident, $elem:ty, $zero:expr, $norm2:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(pub Vec<$elem>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                $name(vec![$zero; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[$elem] {
                &self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, $elem> {
                self.0.iter()
            }

            /// Plain Euclidean norm over all nodal components.
            pub fn norm(&self) -> f64 {
                self.0.iter().map($norm2).sum::<f64>().sqrt()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().map(|x| ($norm2)(x).sqrt()).fold(0.0, f64::max)
            }

            /// `self += alpha * other`
            pub fn axpy(&mut self, alpha: f64, other: &Self) {
                for (a, b) in self.0.iter_mut().zip(&other.0) {
                    *a += *b * alpha;
                }
            }

            pub fn scaled(&self, alpha: f64) -> Self {
                $name(self.0.iter().map(|x| *x * alpha).collect())
            }

            pub fn sub(&self, other: &Self) -> Self {
                $name(self.0.iter().zip(&other.0).map(|(a, b)| *a - *b).collect())
            }

            pub fn add(&self, other: &Self) -> Self {
                $name(self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect())
            }

            pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
                if self.0.len() != expected {
                    return Err(Error::ShapeMismatch { expected, found: self.0.len() });
                }
                Ok(())
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = $elem;
            fn index(&self, n: usize) -> &$elem {
                &self.0[n]
            }
        }

        impl std::ops::IndexMut<usize> for $name {
            fn index_mut(&mut self, n: usize) -> &mut $elem {
                &mut self.0[n]
            }
        }

        impl From<Vec<$elem>> for $name {
            fn from(v: Vec<$elem>) -> Self {
                $name(v)
            }
        }
    };
}

nodal_field!(
    /// Scalar function on the parameter grid (momentum densities, weights, ...).
    ScalarField,
    f64,
    0.0,
    |x: &f64| x * x
);

nodal_field!(
    /// Ambient vector field along the immersion, an element of `T_f Imm`.
    VectorField,
    Vector3<f64>,
    Vector3::zeros(),
    |x: &Vector3<f64>| x.norm_squared()
);

nodal_field!(
    /// Vector field on the parameter domain, in chart components `(X^u, X^v)`.
    TangentField,
    Vector2<f64>,
    Vector2::zeros(),
    |x: &Vector2<f64>| x.norm_squared()
);

impl VectorField {
    /// Pointwise product with a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> VectorField {
        VectorField(self.0.iter().zip(&s.0).map(|(v, a)| v * *a).collect())
    }

    /// Cartesian component `c` as a scalar field.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.0.iter().map(|v| v[c]).collect()
    }

    pub fn from_components(x: &[f64], y: &[f64], z: &[f64]) -> VectorField {
        VectorField(
            x.iter()
                .zip(y)
                .zip(z)
                .map(|((a, b), c)| Vector3::new(*a, *b, *c))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axpy_and_norm() {
        let mut a = VectorField(vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 2.0, 0.0)]);
        let b = VectorField(vec![Vector3::new(0.0, 0.0, 1.0); 2]);
        a.axpy(2.0, &b);
        assert_eq!(a[0], Vector3::new(1.0, 0.0, 2.0));
        assert!((a.norm() - (5.0f64 + 8.0).sqrt()).abs() < 1e-15);
        assert!(a.check_len(3).is_err());
    }

    #[test]
    fn components_round_trip() {
        let f = VectorField(vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0)]);
        let g = VectorField::from_components(&f.component(0), &f.component(1), &f.component(2));
        assert_eq!(f, g);
    }
}
