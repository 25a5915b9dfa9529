//! Flat-facet 3-node shell element: CST membrane + Mindlin bending with a
//! discrete-shear-gap (DSG) transverse shear field and a stabilized shear
//! stiffness against locking. Drilling rotation carries a small artificial
//! stiffness.
//!
//! Local DOF order per node: (u, v, w, theta_x, theta_y, theta_z) in the facet
//! frame; element matrices are 18x18. The Mindlin section rotations are
//! beta_x = theta_y and beta_y = -theta_x, with shear strain
//! gamma = (dw/dx + beta_x, dw/dy + beta_y).

#[derive(Debug, Clone)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub thickness: f64,
}

/// Shear correction factor of the Mindlin plate.
const KAPPA: f64 = 5.0 / 6.0;
/// Drilling stiffness as a fraction of the largest local diagonal.
const DRILLING_FRACTION: f64 = 1e-4;
/// Shear stabilization: k_s scaled by t^2 / (t^2 + ALPHA_STAB * h_e^2).
const ALPHA_STAB: f64 = 0.1;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Element stiffness (18x18, facet-global frame) and lumped mass diagonal.
///
/// The DSG shear field singles out node 1, so the raw element depends on the
/// vertex ordering. Averaging the stiffness over all six orderings makes it a
/// function of the point set alone, which keeps the assembled operator
/// exactly mirror-symmetric on mirror-symmetric meshes.
pub fn shell_triangle(p: [[f64; 3]; 3], mat: &Material) -> ([[f64; 18]; 18], [f64; 18]) {
    const PERMS: [[usize; 3]; 6] =
        [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]];
    let mut k = [[0.0f64; 18]; 18];
    let mut m = [0.0f64; 18];
    for perm in PERMS {
        let q = [p[perm[0]], p[perm[1]], p[perm[2]]];
        let (kq, mq) = shell_triangle_ordered(q, mat);
        for a in 0..3 {
            for b in 0..3 {
                for ii in 0..6 {
                    for jj in 0..6 {
                        k[6 * perm[a] + ii][6 * perm[b] + jj] += kq[6 * a + ii][6 * b + jj] / 6.0;
                    }
                }
            }
            for ii in 0..6 {
                m[6 * perm[a] + ii] += mq[6 * a + ii] / 6.0;
            }
        }
    }
    (k, m)
}

/// Stiffness and mass for one specific vertex ordering.
fn shell_triangle_ordered(p: [[f64; 3]; 3], mat: &Material) -> ([[f64; 18]; 18], [f64; 18]) {
    // facet frame: e1 along the first edge, n the facet normal
    let e1 = normalize(sub(p[1], p[0]));
    let n = normalize(cross(sub(p[1], p[0]), sub(p[2], p[0])));
    let e2 = cross(n, e1);
    let r = [e1, e2, n];

    // local in-plane coordinates
    let mut x = [0.0f64; 3];
    let mut y = [0.0f64; 3];
    for i in 0..3 {
        let d = sub(p[i], p[0]);
        x[i] = dot(d, e1);
        y[i] = dot(d, e2);
    }
    let a = x[1] - x[0];
    let b = y[1] - y[0];
    let c = y[2] - y[0];
    let d = x[2] - x[0];
    let det = a * c - b * d; // 2A
    let area = 0.5 * det;
    debug_assert!(area > 0.0);

    // shape function gradients
    let gx = [(b - c) / det, c / det, -b / det];
    let gy = [(d - a) / det, -d / det, a / det];

    let t = mat.thickness;
    let e = mat.youngs_modulus;
    let nu = mat.poisson_ratio;
    // plane-stress constitutive matrix
    let f = e / (1.0 - nu * nu);
    let cmat = [[f, f * nu, 0.0], [f * nu, f, 0.0], [0.0, 0.0, f * (1.0 - nu) / 2.0]];

    // membrane: rows (eps_x, eps_y, gamma_xy), node columns (u, v)
    let mut bm = [[0.0f64; 18]; 3];
    // bending: rows are curvatures of (beta_x, beta_y); columns (w, tx, ty)
    let mut bb = [[0.0f64; 18]; 3];
    // DSG shear: rows (gamma_xz, gamma_yz)
    let mut bs = [[0.0f64; 18]; 2];
    for i in 0..3 {
        let o = 6 * i;
        bm[0][o] = gx[i];
        bm[1][o + 1] = gy[i];
        bm[2][o] = gy[i];
        bm[2][o + 1] = gx[i];
        // (w, beta_x, beta_y) map to local DOFs (w, theta_y, -theta_x)
        let (wc, txc, tyc) = (o + 2, o + 3, o + 4);
        // bending B acting on (beta_x, beta_y)
        bb[0][tyc] = gx[i]; // d beta_x / dx
        bb[1][txc] = -gy[i]; // d beta_y / dy with beta_y = -theta_x
        bb[2][tyc] = gy[i];
        bb[2][txc] = -gx[i];
        let _ = wc;
    }
    // DSG shear B, per node in (w, beta_x, beta_y), frozen closed form
    let half = 0.5;
    let bs_nodes = [
        [[b - c, det * half, 0.0], [d - a, 0.0, det * half]],
        [[c, a * c * half, b * c * half], [-d, -a * d * half, -b * d * half]],
        [[-b, -b * d * half, -b * c * half], [a, a * d * half, a * c * half]],
    ];
    for i in 0..3 {
        let o = 6 * i;
        for row in 0..2 {
            let v = bs_nodes[i][row];
            bs[row][o + 2] += v[0] / det;
            bs[row][o + 4] += v[1] / det; // beta_x = theta_y
            bs[row][o + 3] += -v[2] / det; // beta_y = -theta_x
        }
    }

    let mut k = [[0.0f64; 18]; 18];
    // membrane t*A*Bm' C Bm and bending (t^3/12)*A*Bb' C Bb
    let wm = t * area;
    let wb = t * t * t / 12.0 * area;
    for i in 0..18 {
        for j in 0..18 {
            let mut sm = 0.0;
            let mut sb = 0.0;
            for r1 in 0..3 {
                for r2 in 0..3 {
                    let cc = cmat[r1][r2];
                    if cc != 0.0 {
                        sm += bm[r1][i] * cc * bm[r2][j];
                        sb += bb[r1][i] * cc * bb[r2][j];
                    }
                }
            }
            k[i][j] += wm * sm + wb * sb;
        }
    }
    // stabilized shear
    let g = e / (2.0 * (1.0 + nu));
    let l01 = (a * a + b * b).sqrt();
    let l02 = (c * c + d * d).sqrt();
    let l12 = ((x[2] - x[1]).powi(2) + (y[2] - y[1]).powi(2)).sqrt();
    let he = l01.max(l02).max(l12);
    let ks = KAPPA * g * t * (t * t / (t * t + ALPHA_STAB * he * he)) * area;
    for i in 0..18 {
        for j in 0..18 {
            k[i][j] += ks * (bs[0][i] * bs[0][j] + bs[1][i] * bs[1][j]);
        }
    }
    // drilling stiffness on the three local theta_z DOFs
    let mut dmax = 0.0f64;
    for i in 0..18 {
        dmax = dmax.max(k[i][i]);
    }
    for i in 0..3 {
        k[6 * i + 5][6 * i + 5] += DRILLING_FRACTION * dmax;
    }

    // rotate to the global frame: Kg = T' Kl T with T = blockdiag(R x6)
    let mut kg = [[0.0f64; 18]; 18];
    for bi in 0..6 {
        for bj in 0..6 {
            for ii in 0..3 {
                for jj in 0..3 {
                    let mut s = 0.0;
                    for li in 0..3 {
                        for lj in 0..3 {
                            s += r[li][ii] * k[3 * bi + li][3 * bj + lj] * r[lj][jj];
                        }
                    }
                    kg[3 * bi + ii][3 * bj + jj] = s;
                }
            }
        }
    }

    // lumped mass: isotropic per node, invariant under the frame rotation
    let mt = mat.density * t * area / 3.0;
    let mr = mat.density * t * t * t / 12.0 * area / 3.0;
    let mut m = [0.0f64; 18];
    for i in 0..3 {
        let o = 6 * i;
        m[o] = mt;
        m[o + 1] = mt;
        m[o + 2] = mt;
        m[o + 3] = mr;
        m[o + 4] = mr;
        m[o + 5] = mr;
    }
    (kg, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat() -> Material {
        Material {
            youngs_modulus: 7.0e10,
            poisson_ratio: 0.3,
            density: 2700.0,
            thickness: 0.003,
        }
    }

    fn tri() -> [[f64; 3]; 3] {
        [[0.0, 0.0, 0.0], [0.02, 0.0, 0.0], [0.005, 0.018, 0.0]]
    }

    #[test]
    fn stiffness_is_symmetric_and_psd_diag() {
        let (k, m) = shell_triangle(tri(), &mat());
        let mut kmax: f64 = 0.0;
        for i in 0..18 {
            for j in 0..18 {
                kmax = kmax.max(k[i][j].abs());
            }
        }
        for i in 0..18 {
            assert!(k[i][i] > 0.0);
            assert!(m[i] > 0.0);
            for j in 0..18 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-10 * kmax, "asym at ({i},{j})");
            }
        }
    }

    /// All six rigid-body modes must carry zero strain energy, including for
    /// a tilted facet.
    #[test]
    fn rigid_modes_have_zero_energy() {
        for p in [tri(), [[0.0, 0.0, 0.002], [0.02, 0.0, 0.0], [0.006, 0.017, 0.005]]] {
            let (k, _) = shell_triangle(p, &mat());
            let mut kmax: f64 = 0.0;
            for i in 0..18 {
                kmax = kmax.max(k[i][i]);
            }
            let modes: Vec<[f64; 6]> = vec![
                [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            ];
            for (mi, md) in modes.iter().enumerate() {
                let rot = [md[3], md[4], md[5]];
                let mut u = [0.0f64; 18];
                for node in 0..3 {
                    let r = p[node];
                    let disp = [
                        md[0] + rot[1] * r[2] - rot[2] * r[1],
                        md[1] + rot[2] * r[0] - rot[0] * r[2],
                        md[2] + rot[0] * r[1] - rot[1] * r[0],
                    ];
                    for c in 0..3 {
                        u[6 * node + c] = disp[c];
                        u[6 * node + 3 + c] = rot[c];
                    }
                }
                let mut energy = 0.0;
                for i in 0..18 {
                    for j in 0..18 {
                        energy += u[i] * k[i][j] * u[j];
                    }
                }
                // rotations with a component along the facet normal pick up
                // the (intentional) diagonal drilling stiffness, bounded by
                // 3 * DRILLING_FRACTION * kmax; everything else must vanish
                let tol = if mi < 3 { 1e-10 * kmax } else { 4.0 * DRILLING_FRACTION * kmax };
                assert!(energy.abs() < tol, "mode {mi}: energy {energy:e}");
            }
            // rotation about an in-plane axis of the *flat* facet is exactly
            // drilling-free
            if p[0][2] == 0.0 && p[1][2] == 0.0 && p[2][2] == 0.0 {
                let mut u = [0.0f64; 18];
                for node in 0..3 {
                    u[6 * node + 2] = p[node][1]; // w = y
                    u[6 * node + 3] = 1.0; // theta_x = 1
                }
                let mut energy = 0.0;
                for i in 0..18 {
                    for j in 0..18 {
                        energy += u[i] * k[i][j] * u[j];
                    }
                }
                assert!(energy.abs() < 1e-10 * kmax, "flat theta_x mode: {energy:e}");
            }
        }
    }

    /// Constant-curvature patch: pure bending about the local x axis on a flat
    /// facet stores the analytic plate energy 0.5 * D * kappa^2 * A (nu terms
    /// cancel for single-curvature fields only in the chi_xx entry; here we
    /// verify against the exact quadratic form with the element's own D).
    #[test]
    fn pure_bending_energy_matches_plate_rigidity() {
        let p = tri();
        let m = mat();
        let (k, _) = shell_triangle(p, &m);
        // w = -x^2/2 * kappa, beta_x = dw/dx... choose the shear-free Kirchhoff
        // field: w = -kappa x^2 / 2, beta_x = kappa x (so dw/dx + beta_x = 0)
        let kap = 3.0;
        let mut u = [0.0f64; 18];
        for node in 0..3 {
            let xx = p[node][0];
            u[6 * node + 2] = -kap * xx * xx / 2.0;
            u[6 * node + 4] = kap * xx; // theta_y = beta_x
        }
        let mut energy = 0.0;
        for i in 0..18 {
            for j in 0..18 {
                energy += u[i] * k[i][j] * u[j];
            }
        }
        energy *= 0.5;
        let dflex = m.youngs_modulus * m.thickness.powi(3)
            / (12.0 * (1.0 - m.poisson_ratio * m.poisson_ratio));
        let (x1, y1) = (p[1][0], p[1][1]);
        let (x2, y2) = (p[2][0], p[2][1]);
        let area = 0.5 * (x1 * y2 - y1 * x2);
        let exact = 0.5 * dflex * kap * kap * area;
        // curvature from the linear beta field is exact and the discrete
        // shear gap vanishes identically on this Kirchhoff field, so the
        // match is exact up to rounding
        assert!(
            (energy - exact).abs() < 1e-6 * exact,
            "energy {energy:e} vs exact {exact:e}"
        );
    }
}
