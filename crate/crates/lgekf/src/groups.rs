//! Concrete group realizations: SO(3), the extended pose group SE2(3), the
//! vector group R^d, and a direct-product combinator.
//!
//! Algebra coordinate orderings are fixed here and everything downstream
//! (covariance indexing in particular) depends on them:
//!
//! * SE2(3): (rotation, velocity, position), embedded as a 5x5 matrix with
//!   the rotation block top-left, the velocity and position columns at
//!   indices 3 and 4, and a 2x2 identity bottom-right.
//! * R^d: embedded as (d+1)x(d+1) matrices with the vector in the last
//!   column; exp and log are the identity on coordinates.
//! * Products: block-diagonal embedding, concatenated algebra coordinates in
//!   component order.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::lie::{ClosedForms, GroupDescriptor, GroupElement, LieError};
use crate::so3;

fn fixed3(m: &DMatrix<f64>, row: usize, col: usize) -> Matrix3<f64> {
    m.fixed_view::<3, 3>(row, col).into_owned()
}

fn col3(m: &DMatrix<f64>, col: usize) -> Vector3<f64> {
    Vector3::new(m[(0, col)], m[(1, col)], m[(2, col)])
}

fn set_block(dst: &mut DMatrix<f64>, row: usize, col: usize, src: &Matrix3<f64>) {
    for i in 0..3 {
        for j in 0..3 {
            dst[(row + i, col + j)] = src[(i, j)];
        }
    }
}

/// SO(3) with Rodrigues closed forms for every operation.
pub fn so3() -> GroupDescriptor {
    let basis = vec![
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
    ];
    let overrides = ClosedForms {
        exp: Some(Arc::new(|w: &DVector<f64>| {
            let r = so3::exp(&Vector3::new(w[0], w[1], w[2]));
            DMatrix::from_fn(3, 3, |i, j| r[(i, j)])
        })),
        log: Some(Arc::new(|m: &DMatrix<f64>| {
            let w = so3::log(&fixed3(m, 0, 0))?;
            Ok(DVector::from_vec(vec![w.x, w.y, w.z]))
        })),
        adjoint: Some(Arc::new(|m: &DMatrix<f64>| m.clone())),
        ad: Some(Arc::new(|w: &DVector<f64>| {
            let s = so3::skew(&Vector3::new(w[0], w[1], w[2]));
            DMatrix::from_fn(3, 3, |i, j| s[(i, j)])
        })),
        jac_right: Some(Arc::new(|w: &DVector<f64>| {
            let j = so3::jac_right(&Vector3::new(w[0], w[1], w[2]));
            DMatrix::from_fn(3, 3, |i, j_| j[(i, j_)])
        })),
        jac_right_inv: Some(Arc::new(|w: &DVector<f64>| {
            let v = Vector3::new(w[0], w[1], w[2]);
            if v.norm() > 2.0 * std::f64::consts::PI - 1e-3 {
                return Err(LieError::SeriesDivergence);
            }
            let j = so3::jac_right_inv(&v);
            Ok(DMatrix::from_fn(3, 3, |i, j_| j[(i, j_)]))
        })),
        membership: Some(Arc::new(|m: &DMatrix<f64>| {
            let r = fixed3(m, 0, 0);
            (r.transpose() * r - Matrix3::identity()).norm() + (r.determinant() - 1.0).abs()
        })),
        project: Some(Arc::new(|m: &DMatrix<f64>| {
            let p = so3::project(&fixed3(m, 0, 0));
            DMatrix::from_fn(3, 3, |i, j| p[(i, j)])
        })),
    };
    GroupDescriptor::new("SO(3)", 3, basis)
        .expect("SO(3) basis is independent")
        .with_overrides(overrides)
}

/// Builds the 5x5 SE2(3) embedding from its parts.
pub fn se23_matrix(r: &Matrix3<f64>, v: &Vector3<f64>, p: &Vector3<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::identity(5, 5);
    set_block(&mut m, 0, 0, r);
    for i in 0..3 {
        m[(i, 3)] = v[i];
        m[(i, 4)] = p[i];
    }
    m
}

/// Splits a 5x5 SE2(3) embedding into (rotation, velocity, position).
pub fn se23_parts(m: &DMatrix<f64>) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>) {
    (fixed3(m, 0, 0), col3(m, 3), col3(m, 4))
}

fn se23_vec_parts(z: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(z[0], z[1], z[2]),
        Vector3::new(z[3], z[4], z[5]),
        Vector3::new(z[6], z[7], z[8]),
    )
}

/// SE2(3), the extended pose group. Exp and log use the SO(3) closed forms
/// for the rotation block and the left-Jacobian relation for the velocity
/// and position columns; the group Jacobians fall back to the generic series.
pub fn se23() -> GroupDescriptor {
    let mut basis = Vec::with_capacity(9);
    let so3_desc = so3();
    for e in so3_desc.basis() {
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = e[(i, j)];
            }
        }
        basis.push(m);
    }
    for col in [3usize, 4] {
        for i in 0..3 {
            let mut m = DMatrix::zeros(5, 5);
            m[(i, col)] = 1.0;
            basis.push(m);
        }
    }
    let overrides = ClosedForms {
        exp: Some(Arc::new(|z: &DVector<f64>| {
            let (phi, nu, rho) = se23_vec_parts(z);
            let r = so3::exp(&phi);
            let jl = so3::jac_left(&phi);
            se23_matrix(&r, &(jl * nu), &(jl * rho))
        })),
        log: Some(Arc::new(|m: &DMatrix<f64>| {
            let (r, v, p) = se23_parts(m);
            let phi = so3::log(&r)?;
            let jli = so3::jac_left_inv(&phi);
            let nu = jli * v;
            let rho = jli * p;
            Ok(DVector::from_vec(vec![
                phi.x, phi.y, phi.z, nu.x, nu.y, nu.z, rho.x, rho.y, rho.z,
            ]))
        })),
        adjoint: Some(Arc::new(|m: &DMatrix<f64>| {
            let (r, v, p) = se23_parts(m);
            let mut ad = DMatrix::zeros(9, 9);
            set_block(&mut ad, 0, 0, &r);
            set_block(&mut ad, 3, 3, &r);
            set_block(&mut ad, 6, 6, &r);
            set_block(&mut ad, 3, 0, &(so3::skew(&v) * r));
            set_block(&mut ad, 6, 0, &(so3::skew(&p) * r));
            ad
        })),
        ad: Some(Arc::new(|z: &DVector<f64>| {
            let (phi, nu, rho) = se23_vec_parts(z);
            let px = so3::skew(&phi);
            let mut ad = DMatrix::zeros(9, 9);
            set_block(&mut ad, 0, 0, &px);
            set_block(&mut ad, 3, 3, &px);
            set_block(&mut ad, 6, 6, &px);
            set_block(&mut ad, 3, 0, &so3::skew(&nu));
            set_block(&mut ad, 6, 0, &so3::skew(&rho));
            ad
        })),
        jac_right: None,
        jac_right_inv: None,
        membership: Some(Arc::new(|m: &DMatrix<f64>| {
            let r = fixed3(m, 0, 0);
            let mut res =
                (r.transpose() * r - Matrix3::identity()).norm() + (r.determinant() - 1.0).abs();
            for i in 3..5 {
                for j in 0..5 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    res += (m[(i, j)] - expected).abs();
                }
            }
            res
        })),
        project: Some(Arc::new(|m: &DMatrix<f64>| {
            let (r, v, p) = se23_parts(m);
            se23_matrix(&so3::project(&r), &v, &p)
        })),
    };
    GroupDescriptor::new("SE2(3)", 5, basis)
        .expect("SE2(3) basis is independent")
        .with_overrides(overrides)
}

/// The vector group R^d under addition, embedded in (d+1)x(d+1) matrices.
pub fn vector_group(d: usize) -> GroupDescriptor {
    let n = d + 1;
    let mut basis = Vec::with_capacity(d);
    for i in 0..d {
        let mut m = DMatrix::zeros(n, n);
        m[(i, d)] = 1.0;
        basis.push(m);
    }
    let dd = d;
    let overrides = ClosedForms {
        exp: Some(Arc::new(move |x: &DVector<f64>| {
            let mut m = DMatrix::identity(dd + 1, dd + 1);
            for i in 0..dd {
                m[(i, dd)] = x[i];
            }
            m
        })),
        log: Some(Arc::new(move |m: &DMatrix<f64>| {
            Ok(DVector::from_fn(dd, |i, _| m[(i, dd)]))
        })),
        adjoint: Some(Arc::new(move |_: &DMatrix<f64>| DMatrix::identity(dd, dd))),
        ad: Some(Arc::new(move |_: &DVector<f64>| DMatrix::zeros(dd, dd))),
        jac_right: Some(Arc::new(move |_: &DVector<f64>| DMatrix::identity(dd, dd))),
        jac_right_inv: Some(Arc::new(move |_: &DVector<f64>| {
            Ok(DMatrix::identity(dd, dd))
        })),
        membership: Some(Arc::new(move |m: &DMatrix<f64>| {
            let mut res = 0.0;
            for i in 0..=dd {
                for j in 0..=dd {
                    if j == dd && i < dd {
                        continue; // free column
                    }
                    let expected = if i == j { 1.0 } else { 0.0 };
                    res += (m[(i, j)] - expected).abs();
                }
            }
            res
        })),
        project: Some(Arc::new(move |m: &DMatrix<f64>| {
            let mut p = DMatrix::identity(dd + 1, dd + 1);
            for i in 0..dd {
                p[(i, dd)] = m[(i, dd)];
            }
            p
        })),
    };
    GroupDescriptor::new(format!("R^{d}"), n, basis)
        .expect("vector basis is independent")
        .with_overrides(overrides)
}

/// Precomputed block layout of a direct product.
struct ProductLayout {
    components: Vec<GroupDescriptor>,
    alg_off: Vec<usize>,
    mat_off: Vec<usize>,
    dim: usize,
    mat_size: usize,
}

impl ProductLayout {
    fn sub_vec(&self, idx: usize, v: &DVector<f64>) -> DVector<f64> {
        let c = &self.components[idx];
        v.rows(self.alg_off[idx], c.dim()).into_owned()
    }

    fn sub_mat(&self, idx: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        let c = &self.components[idx];
        m.view(
            (self.mat_off[idx], self.mat_off[idx]),
            (c.mat_size(), c.mat_size()),
        )
        .into_owned()
    }

    fn assemble_mat(&self, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.mat_size, self.mat_size);
        for (idx, b) in blocks.iter().enumerate() {
            let o = self.mat_off[idx];
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    m[(o + i, o + j)] = b[(i, j)];
                }
            }
        }
        m
    }

    fn assemble_alg(&self, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (idx, b) in blocks.iter().enumerate() {
            let o = self.alg_off[idx];
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    m[(o + i, o + j)] = b[(i, j)];
                }
            }
        }
        m
    }
}

/// Direct product of matrix Lie groups: block-diagonal embedding, all
/// operators assembled block-diagonally from the component operators.
pub fn product(components: Vec<GroupDescriptor>) -> Result<GroupDescriptor, LieError> {
    if components.is_empty() {
        return Err(LieError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let mut alg_off = Vec::with_capacity(components.len());
    let mut mat_off = Vec::with_capacity(components.len());
    let mut dim = 0;
    let mut mat_size = 0;
    for c in &components {
        alg_off.push(dim);
        mat_off.push(mat_size);
        dim += c.dim();
        mat_size += c.mat_size();
    }
    let name = components
        .iter()
        .map(|c| c.name().to_string())
        .collect::<Vec<_>>()
        .join(" x ");

    let mut basis = Vec::with_capacity(dim);
    for (idx, c) in components.iter().enumerate() {
        for e in c.basis() {
            let mut m = DMatrix::zeros(mat_size, mat_size);
            let o = mat_off[idx];
            for i in 0..c.mat_size() {
                for j in 0..c.mat_size() {
                    m[(o + i, o + j)] = e[(i, j)];
                }
            }
            basis.push(m);
        }
    }

    let layout = Arc::new(ProductLayout {
        components,
        alg_off,
        mat_off,
        dim,
        mat_size,
    });

    let l = layout.clone();
    let exp: crate::lie::ExpFn = Arc::new(move |z: &DVector<f64>| {
        let blocks: Vec<DMatrix<f64>> = l
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.exp(&l.sub_vec(i, z))
                    .expect("component exp is total on finite input")
                    .matrix()
                    .clone()
            })
            .collect();
        l.assemble_mat(&blocks)
    });

    let l = layout.clone();
    let log: crate::lie::LogFn = Arc::new(move |m: &DMatrix<f64>| {
        let mut out = DVector::zeros(l.dim);
        for (i, c) in l.components.iter().enumerate() {
            let sub = GroupElement::from_matrix_unchecked(l.sub_mat(i, m));
            let z = c.log(&sub)?;
            out.rows_mut(l.alg_off[i], c.dim()).copy_from(&z);
        }
        Ok(out)
    });

    let l = layout.clone();
    let adjoint: crate::lie::AdjointFn = Arc::new(move |m: &DMatrix<f64>| {
        let blocks: Vec<DMatrix<f64>> = l
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.adjoint(&GroupElement::from_matrix_unchecked(l.sub_mat(i, m)))
                    .expect("component adjoint")
            })
            .collect();
        l.assemble_alg(&blocks)
    });

    let l = layout.clone();
    let ad: crate::lie::AdFn = Arc::new(move |z: &DVector<f64>| {
        let blocks: Vec<DMatrix<f64>> = l
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.ad(&l.sub_vec(i, z)).expect("component ad"))
            .collect();
        l.assemble_alg(&blocks)
    });

    let l = layout.clone();
    let jac_right: crate::lie::JacFn = Arc::new(move |z: &DVector<f64>| {
        let blocks: Vec<DMatrix<f64>> = l
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| c.jac_right(&l.sub_vec(i, z)).expect("component jacobian"))
            .collect();
        l.assemble_alg(&blocks)
    });

    let l = layout.clone();
    let jac_right_inv: crate::lie::JacInvFn = Arc::new(move |z: &DVector<f64>| {
        let mut blocks = Vec::with_capacity(l.components.len());
        for (i, c) in l.components.iter().enumerate() {
            blocks.push(c.jac_right_inv(&l.sub_vec(i, z))?);
        }
        Ok(l.assemble_alg(&blocks))
    });

    let l = layout.clone();
    let membership: crate::lie::MembershipFn = Arc::new(move |m: &DMatrix<f64>| {
        let mut res = 0.0;
        for (i, c) in l.components.iter().enumerate() {
            res += c.membership_residual(&l.sub_mat(i, m));
        }
        // off-diagonal blocks must vanish
        for (i, _) in l.components.iter().enumerate() {
            for (j, cj) in l.components.iter().enumerate() {
                if i == j {
                    continue;
                }
                let ci = &l.components[i];
                let block = m.view((l.mat_off[i], l.mat_off[j]), (ci.mat_size(), cj.mat_size()));
                res += block.norm();
            }
        }
        res
    });

    let l = layout.clone();
    let project: crate::lie::ProjectFn = Arc::new(move |m: &DMatrix<f64>| {
        let blocks: Vec<DMatrix<f64>> = l
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.project(&GroupElement::from_matrix_unchecked(l.sub_mat(i, m)))
                    .matrix()
                    .clone()
            })
            .collect();
        l.assemble_mat(&blocks)
    });

    Ok(
        GroupDescriptor::new(name, mat_size, basis)?.with_overrides(ClosedForms {
            exp: Some(exp),
            log: Some(log),
            adjoint: Some(adjoint),
            ad: Some(ad),
            jac_right: Some(jac_right),
            jac_right_inv: Some(jac_right_inv),
            membership: Some(membership),
            project: Some(project),
        }),
    )
}

/// The case-study state group SE2(3) x R^3 x R^3.
pub fn navigation_group() -> GroupDescriptor {
    product(vec![se23(), vector_group(3), vector_group(3)])
        .expect("navigation product is well formed")
}
