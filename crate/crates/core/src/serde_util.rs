//! JSON encodings shared by the public document types.

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::num::Real;

#[derive(Serialize, Deserialize)]
struct ReIm<T> {
    re: T,
    im: T,
}

/// `Vec<Complex<T>>` as a list of `{"re": .., "im": ..}` objects.
pub mod complex_vec {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &[Complex<T>], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| ReIm { re: z.re, im: z.im }))
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex<T>>, D::Error> {
        let pairs: Vec<ReIm<T>> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|p| Complex::new(p.re, p.im)).collect())
    }
}

/// A dB value where `+inf` (noiseless) is written as JSON `null`.
pub mod db_or_inf {
    use super::*;

    pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        Ok(Option::<T>::deserialize(d)?.unwrap_or_else(T::infinity))
    }
}
