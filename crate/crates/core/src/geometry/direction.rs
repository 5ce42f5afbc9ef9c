use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::real::Real;

/// A direction on the unit sphere in degrees.
///
/// Azimuth is counter-clockwise positive seen from above (left is positive,
/// 0° is front) and normalized to (−180, 180]. Elevation is positive up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction<T> {
    azimuth: T,
    elevation: T,
}

impl<T: Real> Direction<T> {
    pub fn new(azimuth: T, elevation: T) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::Invalid("non-finite direction".into()));
        }
        let ninety = T::lit(90.0);
        if elevation > ninety || elevation < -ninety {
            return Err(Error::Invalid(format!("elevation {elevation} outside [-90, 90]")));
        }
        Ok(Self { azimuth: normalize_azimuth(azimuth), elevation })
    }

    /// Convenience constructor for `f64` literals; panics on invalid input.
    pub fn deg(azimuth: f64, elevation: f64) -> Self {
        Self::new(T::lit(azimuth), T::lit(elevation)).expect("valid direction literal")
    }

    #[inline]
    pub fn azimuth(&self) -> T {
        self.azimuth
    }

    #[inline]
    pub fn elevation(&self) -> T {
        self.elevation
    }

    /// `(cos el · cos az, cos el · sin az, sin el)`.
    pub fn to_unit_vector(&self) -> Vec3<T> {
        let az = self.azimuth.to_radians();
        let el = self.elevation.to_radians();
        let (saz, caz) = az.sin_cos();
        let (sel, cel) = el.sin_cos();
        Vec3::new(cel * caz, cel * saz, sel)
    }

    /// Inverse of [`to_unit_vector`](Self::to_unit_vector); the input need not be normalized.
    pub fn from_vector(v: Vec3<T>) -> Result<Self> {
        let n = v.norm();
        if !(n > T::zero()) {
            return Err(Error::Invalid("zero vector has no direction".into()));
        }
        let z = (v.z / n).max(-T::one()).min(T::one());
        let elevation = z.asin().to_degrees();
        let azimuth = if v.x == T::zero() && v.y == T::zero() { T::zero() } else { v.y.atan2(v.x).to_degrees() };
        Self::new(azimuth, elevation)
    }

    /// Left-right mirror image: `(−az, el)`.
    pub fn mirrored(&self) -> Self {
        Self { azimuth: normalize_azimuth(-self.azimuth), elevation: self.elevation }
    }

    /// Great-circle distance in degrees.
    pub fn angle_to(&self, other: &Self) -> T {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        // atan2 form stays accurate for nearly (anti)parallel vectors.
        a.cross(b).norm().atan2(a.dot(b)).to_degrees()
    }

    pub fn cast<U: Real>(&self) -> Direction<U> {
        Direction { azimuth: U::lit(self.azimuth.to_f64_lossy()), elevation: U::lit(self.elevation.to_f64_lossy()) }
    }
}

/// Maps any finite azimuth to (−180, 180].
pub fn normalize_azimuth<T: Real>(az: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let mut a = az % full;
    if a <= -half {
        a += full;
    } else if a > half {
        a -= full;
    }
    a
}

/// Signed smallest difference `a − b` in (−180, 180].
pub fn azimuth_difference<T: Real>(a: T, b: T) -> T {
    normalize_azimuth(a - b)
}
