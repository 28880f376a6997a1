//! Linear pose initialization for a given focal length, ignoring distortion.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector2, Vector3, SVD};

use crate::geometry::Correspondence;

/// Pose `(R, t)` of a camera with focal length `f` and principal point `c`.
pub(crate) fn linear_pose(corrs: &[&Correspondence], f: f64, c: Vector2<f64>) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let img: Vec<Vector2<f64>> = corrs.iter().map(|k| (k.x2d - c) / f).collect();
    let pts: Vec<Vector3<f64>> = corrs.iter().map(|k| k.x3d).collect();
    let n = pts.len() as f64;
    let centroid = pts.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    // thin point clouds (a noisy pattern) are treated as planar; DLT is ill-posed there
    let planar = eig.eigenvalues[order[2]] <= 1e-4 * eig.eigenvalues[order[0]];
    let pose = if planar {
        let b1: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
        let b2: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
        planar_pose(&img, &pts, centroid, b1, b2)
    } else {
        dlt_pose(&img, &pts)
    }?;
    let (r, t) = pose;
    let in_front = pts.iter().filter(|p| (r * *p + t).z > 0.0).count();
    (2 * in_front > pts.len()).then_some(pose)
}

/// Null vector of `AᵀA` (eigenvector of the smallest eigenvalue).
fn null_vector(a: &DMatrix<f64>) -> Option<nalgebra::DVector<f64>> {
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(eig.eigenvectors.column(imin).into())
}

/// Isotropic normalization of 2D points: mean at zero, mean distance √2.
fn normalizer(pts: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().sum::<Vector2<f64>>() / n;
    let d = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if d > 0.0 { std::f64::consts::SQRT_2 / d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn nearest_rotation(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = SVD::new(*m, true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    Some(r)
}

fn planar_pose(
    img: &[Vector2<f64>],
    pts: &[Vector3<f64>],
    centroid: Vector3<f64>,
    b1: Vector3<f64>,
    b2: Vector3<f64>,
) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    let b3 = b1.cross(&b2);
    let q = Matrix3::from_columns(&[b1, b2, b3]);
    let plane: Vec<Vector2<f64>> = pts
        .iter()
        .map(|p| {
            let d = p - centroid;
            Vector2::new(b1.dot(&d), b2.dot(&d))
        })
        .collect();
    let tp = normalizer(&plane);
    let ti = normalizer(img);
    let mut a = DMatrix::zeros(2 * pts.len(), 9);
    for (k, (u, x)) in plane.iter().zip(img).enumerate() {
        let u = tp * u.push(1.0);
        let x = ti * x.push(1.0);
        let u = [u.x, u.y, 1.0];
        for c in 0..3 {
            a[(2 * k, c)] = u[c];
            a[(2 * k, 6 + c)] = -x.x * u[c];
            a[(2 * k + 1, 3 + c)] = u[c];
            a[(2 * k + 1, 6 + c)] = -x.y * u[c];
        }
    }
    let h = null_vector(&a)?;
    let hn = Matrix3::from_row_slice(h.as_slice());
    let h = ti.try_inverse()? * hn * tp;
    let (m1, m2, m3) = (
        h.column(0).into_owned(),
        h.column(1).into_owned(),
        h.column(2).into_owned(),
    );
    let mut lambda = 2.0 / (m1.norm() + m2.norm());
    if (lambda * m3).z < 0.0 {
        lambda = -lambda;
    }
    let r1 = lambda * m1;
    let r2 = lambda * m2;
    let rp = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]))?;
    let tp = lambda * m3;
    // camera from world: Rp Qᵀ (X − X̄) + tp
    let r = rp * q.transpose();
    let t = tp - r * centroid;
    Some((r, t))
}

fn dlt_pose(img: &[Vector2<f64>], pts: &[Vector3<f64>]) -> Option<(Matrix3<f64>, Vector3<f64>)> {
    if pts.len() < 6 {
        return None;
    }
    let ti = normalizer(img);
    let n = pts.len() as f64;
    let c = pts.iter().sum::<Vector3<f64>>() / n;
    let s = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if s > 0.0 { 3f64.sqrt() / s } else { 1.0 };
    let mut a = DMatrix::zeros(2 * pts.len(), 12);
    for (k, (p, x)) in pts.iter().zip(img).enumerate() {
        let q = (p - c) * s;
        let x = ti * x.push(1.0);
        let u = [q.x, q.y, q.z, 1.0];
        for j in 0..4 {
            a[(2 * k, j)] = u[j];
            a[(2 * k, 8 + j)] = -x.x * u[j];
            a[(2 * k + 1, 4 + j)] = u[j];
            a[(2 * k + 1, 8 + j)] = -x.y * u[j];
        }
    }
    let v = null_vector(&a)?;
    let pn = nalgebra::Matrix3x4::from_row_slice(v.as_slice());
    let p = ti.try_inverse()? * pn;
    let m = p.fixed_columns::<3>(0).into_owned();
    let svd = SVD::new(m, false, false);
    let mut scale = svd.singular_values.mean();
    if m.determinant() < 0.0 {
        scale = -scale;
    }
    let r = nearest_rotation(&(m / scale))?;
    // undo the 3D normalization: P maps s(X − c)
    let t = p.column(3).into_owned() / scale - r * c * s;
    Some((r, t / s))
}
