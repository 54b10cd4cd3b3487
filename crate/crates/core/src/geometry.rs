//! Rotations, pinhole cameras and stereo epipolar geometry used to simulate
//! alternative viewpoints of a skeleton.
//!
//! Angles cross the public API in degrees and are converted to radians
//! internally.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::skeleton::SkeletonSequence;

pub type Mat3<T> = [[T; 3]; 3];
pub type Vec3<T> = [T; 3];

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec<T: Real>(a: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| a[j][i]))
}

pub fn determinant<T: Real>(a: &Mat3<T>) -> T {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Adjugate-based inverse; `None` when the determinant vanishes.
pub fn inverse<T: Real>(a: &Mat3<T>) -> Option<Mat3<T>> {
    let det = determinant(a);
    if det.is_zero() || !det.is_finite() {
        return None;
    }
    let c = |i0: usize, j0: usize, i1: usize, j1: usize| a[i0][j0] * a[i1][j1] - a[i0][j1] * a[i1][j0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / det)))
}

pub fn frobenius<T: Real>(a: &Mat3<T>) -> T {
    a.iter().flatten().map(|&v| v * v).sum::<T>().sqrt()
}

fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

fn to_na<T: Real>(a: &Mat3<T>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j].as_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Order in which per-axis rotations are applied: `[first, second, third]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EulerOrder([Axis; 3]);

impl EulerOrder {
    pub const XYZ: Self = Self([Axis::X, Axis::Y, Axis::Z]);
    pub const YXZ: Self = Self([Axis::Y, Axis::X, Axis::Z]);
    pub const ZYX: Self = Self([Axis::Z, Axis::Y, Axis::X]);

    pub fn new(order: [Axis; 3]) -> Result<Self> {
        let distinct = order[0] != order[1] && order[1] != order[2] && order[0] != order[2];
        if !distinct {
            return Err(invalid(format!("{order:?} is not a permutation of the three axes")));
        }
        Ok(Self(order))
    }

    pub fn axes(&self) -> [Axis; 3] {
        self.0
    }
}

/// Composition order used for view grids: altitude about x, then azimuth about y.
pub const VIEW_GRID_ORDER: EulerOrder = EulerOrder::XYZ;

/// Proper rotation. Construction guarantees orthonormality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix<T>(Mat3<T>);

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        Self(identity())
    }

    /// Accepts a matrix within `tol` of orthonormal with positive determinant
    /// and projects it onto the nearest rotation.
    pub fn from_matrix(m: Mat3<T>, tol: f64) -> Result<Self> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("rotation matrix has non-finite entries"));
        }
        let a = to_na(&m);
        let err = (a.transpose() * a - Matrix3::identity()).norm();
        if err > tol || a.determinant() <= 0.0 {
            return Err(invalid(format!("matrix is not a proper rotation (orthonormality error {err:.3e})")));
        }
        let svd = a.svd(true, true);
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let r = u * vt;
        Ok(Self([0, 1, 2].map(|i| [0, 1, 2].map(|j| T::lit(r[(i, j)])))))
    }

    pub fn about(axis: Axis, degrees: T) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self(match axis {
            Axis::X => [[o, z, z], [z, c, s], [z, -s, c]],
            Axis::Y => [[c, z, -s], [z, o, z], [s, z, c]],
            Axis::Z => [[c, s, z], [-s, c, z], [z, z, o]],
        })
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.0
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        mat_vec(&self.0, &p)
    }

    pub fn compose(&self, then: &Self) -> Self {
        Self(mat_mul(&then.0, &self.0))
    }

    pub fn inverse(&self) -> Self {
        Self(transpose(&self.0))
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> T {
        let rtr = mat_mul(&transpose(&self.0), &self.0);
        let i = identity::<T>();
        let d = [0, 1, 2].map(|r| [0, 1, 2].map(|c| rtr[r][c] - i[r][c]));
        frobenius(&d)
    }

    pub fn determinant(&self) -> T {
        determinant(&self.0)
    }
}

/// Composite rotation from per-axis angles in degrees, applied in `order`.
pub fn euler_rotation<T: Real>(theta_x: T, theta_y: T, theta_z: T, order: EulerOrder) -> Result<RotationMatrix<T>> {
    if !(theta_x.is_finite() && theta_y.is_finite() && theta_z.is_finite()) {
        return Err(invalid("Euler angles must be finite"));
    }
    let angle = |a: Axis| match a {
        Axis::X => theta_x,
        Axis::Y => theta_y,
        Axis::Z => theta_z,
    };
    Ok(order.axes().iter().fold(RotationMatrix::identity(), |acc, &a| acc.compose(&RotationMatrix::about(a, angle(a)))))
}

/// Upper-triangular pinhole intrinsics with `k[2][2] = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T>(Mat3<T>);

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(k: Mat3<T>) -> Result<Self> {
        if k[1][0] != T::zero() || k[2][0] != T::zero() || k[2][1] != T::zero() {
            return Err(invalid("intrinsic matrix must be upper-triangular"));
        }
        if k[2][2] != T::one() {
            return Err(invalid("intrinsic matrix must have k[2][2] = 1"));
        }
        if inverse(&k).is_none() {
            return Err(invalid("intrinsic matrix is singular"));
        }
        Ok(Self(k))
    }

    pub fn pinhole(fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        let (o, z) = (T::one(), T::zero());
        Self::new([[fx, z, cx], [z, fy, cy], [z, z, o]])
    }

    pub fn matrix(&self) -> &Mat3<T> {
        &self.0
    }

    /// Homogeneous pixel coordinates `(u, v, 1)` of a camera-frame point.
    pub fn project(&self, p: Vec3<T>) -> Vec3<T> {
        let h = mat_vec(&self.0, &p);
        [h[0] / h[2], h[1] / h[2], T::one()]
    }
}

/// Rigid relation between two camera frames: `p_r = R (p_l − t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<T> {
    pub r: RotationMatrix<T>,
    pub t: Vec3<T>,
}

impl<T: Real> CameraPose<T> {
    pub fn transform(&self, p: Vec3<T>) -> Vec3<T> {
        self.r.apply([p[0] - self.t[0], p[1] - self.t[1], p[2] - self.t[2]])
    }

    pub fn inverse_transform(&self, q: Vec3<T>) -> Vec3<T> {
        let p = self.r.inverse().apply(q);
        [p[0] + self.t[0], p[1] + self.t[1], p[2] + self.t[2]]
    }
}

/// Pixel-space epipolar relation `p_rᵀ F p_l = 0`, rank 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix<T>(Mat3<T>);

impl<T: Real> FundamentalMatrix<T> {
    pub fn matrix(&self) -> &Mat3<T> {
        &self.0
    }

    /// Copy scaled to unit Frobenius norm.
    pub fn normalized(&self) -> Self {
        let n = frobenius(&self.0);
        Self(self.0.map(|row| row.map(|v| v / n)))
    }

    pub fn residual(&self, p_r: &Vec3<T>, p_l: &Vec3<T>) -> T {
        let fp = mat_vec(&self.0, p_l);
        p_r[0] * fp[0] + p_r[1] * fp[1] + p_r[2] * fp[2]
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> [f64; 3] {
        let mut sv: Vec<f64> = to_na(&self.0).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        [sv[0], sv[1], sv[2]]
    }
}

/// Cross-product matrix of `t` with rows `(0, −t_z, t_y), (t_z, 0, −t_x), (−t_y, t_x, 0)`.
pub fn skew<T: Real>(t: &Vec3<T>) -> Mat3<T> {
    let z = T::zero();
    [[z, -t[2], t[1]], [t[2], z, -t[0]], [-t[1], t[0], z]]
}

/// `F = (M_r⁻¹)ᵀ · R · S(t) · M_l⁻¹`.
pub fn fundamental_matrix<T: Real>(
    intr_l: &CameraIntrinsics<T>,
    intr_r: &CameraIntrinsics<T>,
    pose: &CameraPose<T>,
) -> Result<FundamentalMatrix<T>> {
    if pose.t.iter().all(|v| v.is_zero()) {
        return Err(Error::DegenerateGeometry("zero baseline: translation vector is zero".into()));
    }
    let ml_inv = inverse(intr_l.matrix()).ok_or_else(|| invalid("left intrinsics singular"))?;
    let mr_inv = inverse(intr_r.matrix()).ok_or_else(|| invalid("right intrinsics singular"))?;
    let essential = mat_mul(pose.r.matrix(), &skew(&pose.t));
    let f = mat_mul(&mat_mul(&transpose(&mr_inv), &essential), &ml_inv);
    Ok(FundamentalMatrix(f))
}

/// How alternative viewpoints are synthesized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    /// Rotate the hip-centered skeleton about x (altitude) then y (azimuth).
    #[default]
    Euler,
    /// Re-express joints in a virtual camera orbiting the estimated one.
    Camvpc,
}

/// `K × K'` grid of simulated viewpoints, `K = 2·eta_az + 1`, `K' = 2·eta_alt + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewGrid {
    pub eta_az: usize,
    pub eta_alt: usize,
    pub step_deg: f64,
    pub mode: ViewMode,
}

impl Default for ViewGrid {
    fn default() -> Self {
        Self { eta_az: 3, eta_alt: 3, step_deg: 15.0, mode: ViewMode::Euler }
    }
}

impl ViewGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_deg.is_finite() && self.step_deg > 0.0) {
            return Err(invalid(format!("view step must be positive, got {}", self.step_deg)));
        }
        Ok(())
    }

    pub fn k_az(&self) -> usize {
        2 * self.eta_az + 1
    }

    pub fn k_alt(&self) -> usize {
        2 * self.eta_alt + 1
    }

    pub fn len(&self) -> usize {
        self.k_az() * self.k_alt()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(azimuth, altitude)` in degrees of grid cell `(i, j)`.
    pub fn angles(&self, i: usize, j: usize) -> (f64, f64) {
        let az = (i as f64 - self.eta_az as f64) * self.step_deg;
        let alt = (j as f64 - self.eta_alt as f64) * self.step_deg;
        (az, alt)
    }
}

/// Virtual camera at an azimuth/altitude offset from `camera`, orbiting the
/// hip: `p_r = R_cam (R_off p − t) = R_view (p − R_offᵀ t)`.
pub fn offset_camera<T: Real>(camera: &CameraPose<T>, azimuth: T, altitude: T) -> Result<CameraPose<T>> {
    let off = euler_rotation(altitude, azimuth, T::zero(), VIEW_GRID_ORDER)?;
    Ok(CameraPose { r: off.compose(&camera.r), t: off.inverse().apply(camera.t) })
}

/// One simulated view of a sequence. Joints are hip-centered first.
pub fn simulate_view<T: Real>(
    seq: &SkeletonSequence<T>,
    azimuth: T,
    altitude: T,
    mode: ViewMode,
    camera: Option<&CameraPose<T>>,
) -> Result<SkeletonSequence<T>> {
    let centered = seq.hip_centered();
    match mode {
        ViewMode::Euler => {
            let r = euler_rotation(altitude, azimuth, T::zero(), VIEW_GRID_ORDER)?;
            if r == RotationMatrix::identity() {
                return Ok(centered);
            }
            Ok(centered.map_points(|p| r.apply(p)))
        }
        ViewMode::Camvpc => {
            let camera =
                camera.ok_or_else(|| Error::MissingParameter("camvpc view simulation needs a camera pose".into()))?;
            let view = offset_camera(camera, azimuth, altitude)?;
            Ok(centered.map_points(|p| view.transform(p)))
        }
    }
}

/// All `K × K'` views, row-major by (azimuth index, altitude index).
pub fn generate_view_grid<T: Real>(
    seq: &SkeletonSequence<T>,
    grid: &ViewGrid,
    camera: Option<&CameraPose<T>>,
) -> Result<Vec<SkeletonSequence<T>>> {
    grid.validate()?;
    let mut views = Vec::with_capacity(grid.len());
    for i in 0..grid.k_az() {
        for j in 0..grid.k_alt() {
            let (az, alt) = grid.angles(i, j);
            views.push(simulate_view(seq, T::lit(az), T::lit(alt), grid.mode, camera)?);
        }
    }
    Ok(views)
}

/// Camera parameters as exchanged on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub intrinsics_l: [[f64; 3]; 3],
    pub intrinsics_r: [[f64; 3]; 3],
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl CameraRig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn pose<T: Real>(&self) -> Result<CameraPose<T>> {
        let r = RotationMatrix::from_matrix(self.rotation.map(|row| row.map(T::lit)), 1e-6)?;
        Ok(CameraPose { r, t: self.translation.map(T::lit) })
    }

    pub fn intrinsics<T: Real>(&self) -> Result<(CameraIntrinsics<T>, CameraIntrinsics<T>)> {
        Ok((
            CameraIntrinsics::new(self.intrinsics_l.map(|row| row.map(T::lit)))?,
            CameraIntrinsics::new(self.intrinsics_r.map(|row| row.map(T::lit)))?,
        ))
    }

    pub fn fundamental<T: Real>(&self) -> Result<FundamentalMatrix<T>> {
        let (l, r) = self.intrinsics()?;
        fundamental_matrix(&l, &r, &self.pose()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::SkeletonGraph;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn diff(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
        frobenius(&[0, 1, 2].map(|i| [0, 1, 2].map(|j| a[i][j] - b[i][j])))
    }

    #[test]
    fn zero_angles_give_identity() {
        for order in [EulerOrder::XYZ, EulerOrder::YXZ, EulerOrder::ZYX] {
            let r = euler_rotation(0.0, 0.0, 0.0, order).unwrap();
            assert_eq!(r, RotationMatrix::identity());
        }
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = euler_rotation(90.0f64, 0.0, 0.0, EulerOrder::XYZ).unwrap();
        let p = r.apply([0.0, 1.0, 0.0]);
        assert!(p[0].abs() < 1e-15 && p[1].abs() < 1e-15 && (p[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_matters() {
        let a = euler_rotation(30.0, 45.0, 0.0, EulerOrder::XYZ).unwrap();
        let b = euler_rotation(30.0, 45.0, 0.0, EulerOrder::YXZ).unwrap();
        assert!(diff(a.matrix(), b.matrix()) > 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(euler_rotation(f64::NAN, 0.0, 0.0, EulerOrder::XYZ).is_err());
        assert!(EulerOrder::new([Axis::X, Axis::X, Axis::Z]).is_err());
    }

    #[test]
    fn random_rotations_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let angles: [f64; 3] = [(); 3].map(|_| rng.random_range(-360.0..360.0));
            let r = euler_rotation(angles[0], angles[1], angles[2], EulerOrder::ZYX).unwrap();
            assert!(r.orthonormality_error() <= 1e-12);
            assert!((r.determinant() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fundamental_of_pure_translation() {
        let id = CameraIntrinsics::new(identity()).unwrap();
        let pose = CameraPose { r: RotationMatrix::identity(), t: [1.0, 0.0, 0.0] };
        let f = fundamental_matrix(&id, &id, &pose).unwrap();
        assert_eq!(*f.matrix(), [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn zero_translation_is_degenerate() {
        let id = CameraIntrinsics::<f64>::new(identity()).unwrap();
        let pose = CameraPose { r: RotationMatrix::identity(), t: [0.0; 3] };
        assert!(matches!(fundamental_matrix(&id, &id, &pose), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        assert!(CameraIntrinsics::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]).is_err());
        assert!(CameraIntrinsics::new([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    }

    #[test]
    fn camvpc_requires_camera() {
        let g = Arc::new(SkeletonGraph::new(1, vec![], 0).unwrap());
        let seq = SkeletonSequence::new(Array3::<f64>::zeros((1, 1, 3)), None, g).unwrap();
        let err = simulate_view(&seq, 0.0, 0.0, ViewMode::Camvpc, None).unwrap_err();
        assert!(matches!(err, Error::MissingParameter(_)));
    }

    #[test]
    fn camera_rig_json() {
        let text = r#"{"intrinsics_l": [[500,0,320],[0,500,240],[0,0,1]],
                       "intrinsics_r": [[510,0,330],[0,505,250],[0,0,1]],
                       "rotation": [[1,0,0],[0,1,0],[0,0,1]],
                       "translation": [0.3, 0, 0]}"#;
        let rig = CameraRig::from_json(text).unwrap();
        let f = rig.fundamental::<f64>().unwrap();
        let sv = f.singular_values();
        assert!(sv[2] <= 1e-9 * sv[0]);
    }
}
