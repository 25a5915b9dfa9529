//! Global system assembly: banded elastic stiffness, lumped mass, boundary
//! rotation springs, simply-supported constraints, point load.

use platebead_core::types::PlateConfig;

use crate::banded::SymBanded;
use crate::element::{shell_triangle, Material};
use crate::error::FemError;
use crate::mesh::ShellMesh;

/// Assembled plate system. Stiffness splits into the elastic part (subject to
/// the hysteretic loss factor) and the real boundary-spring diagonal; mass is
/// lumped. Constraints are applied by identity-row substitution: constrained
/// DOFs keep a unit diagonal in `k_elastic` and zero mass/spring/load.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub n: usize,
    pub k_elastic: SymBanded<f64>,
    pub k_spring: Vec<f64>,
    pub mass: Vec<f64>,
    pub force: Vec<f64>,
    pub constrained: Vec<bool>,
    pub loss_factor: f64,
    pub node_count: usize,
    /// DOF index of the loaded z-translation
    pub load_dof: usize,
}

pub const DOFS_PER_NODE: usize = 6;

fn material(cfg: &PlateConfig) -> Material {
    Material {
        youngs_modulus: cfg.youngs_modulus,
        poisson_ratio: cfg.poisson_ratio,
        density: cfg.density,
        thickness: cfg.thickness,
    }
}

/// Elastic stiffness and lumped mass of the free (unconstrained, unsprung)
/// structure. Exposed for rigid-body-mode verification.
pub fn assemble_free(mesh: &ShellMesh, cfg: &PlateConfig) -> (SymBanded<f64>, Vec<f64>) {
    let n = DOFS_PER_NODE * mesh.node_count();
    // neighboring cells differ by at most ny+1 node indices
    let hb = DOFS_PER_NODE * (mesh.ny + 1) + (DOFS_PER_NODE - 1);
    let mut k = SymBanded::zeros(n, hb);
    let mut m = vec![0.0; n];
    let mat = material(cfg);
    for tri in mesh.triangles() {
        let p = [mesh.coords(tri[0]), mesh.coords(tri[1]), mesh.coords(tri[2])];
        let (ke, me) = shell_triangle(p, &mat);
        let dofs: Vec<usize> = tri
            .iter()
            .flat_map(|&node| (0..DOFS_PER_NODE).map(move |d| DOFS_PER_NODE * node + d))
            .collect();
        for (li, &gi) in dofs.iter().enumerate() {
            m[gi] += me[li];
            for (lj, &gj) in dofs.iter().enumerate() {
                if gi >= gj {
                    k.add(gi, gj, ke[li][lj]);
                }
            }
        }
    }
    (k, m)
}

/// Full constrained system with springs and the unit point load.
pub fn assemble(mesh: &ShellMesh, cfg: &PlateConfig) -> Result<FemSystem, FemError> {
    let (mut k, mut m) = assemble_free(mesh, cfg);
    let n = k.n;
    let nodes = mesh.node_count();

    // rotation springs on the edge-tangent rotation DOF of boundary nodes:
    // theta_x along the y = const edges, theta_y along the x = const edges
    let mut spring = vec![0.0; n];
    for node in 0..nodes {
        let ix = node / mesh.ny;
        let iy = node % mesh.ny;
        if iy == 0 || iy == mesh.ny - 1 {
            spring[DOFS_PER_NODE * node + 3] += cfg.rot_stiffness;
        }
        if ix == 0 || ix == mesh.nx - 1 {
            spring[DOFS_PER_NODE * node + 4] += cfg.rot_stiffness;
        }
    }

    // constraints: z = 0 on all boundary nodes; minimal in-plane restraints
    // (both in-plane translations at one corner, uy at the opposite corner
    // along y = 0) against the remaining rigid modes
    let mut constrained = vec![false; n];
    for node in 0..nodes {
        if mesh.is_boundary(node) {
            constrained[DOFS_PER_NODE * node + 2] = true;
        }
    }
    let c0 = mesh.node(0, 0);
    let c1 = mesh.node(mesh.nx - 1, 0);
    constrained[DOFS_PER_NODE * c0] = true;
    constrained[DOFS_PER_NODE * c0 + 1] = true;
    constrained[DOFS_PER_NODE * c1 + 1] = true;

    // identity-row substitution
    let hb = k.hb;
    for j in 0..n {
        if constrained[j] {
            for i in j..(j + hb + 1).min(n) {
                k.set(i, j, 0.0);
            }
            for i in j.saturating_sub(hb)..j {
                k.set(j, i, 0.0);
            }
            k.set(j, j, 1.0);
            m[j] = 0.0;
            spring[j] = 0.0;
        }
    }

    let load_node = mesh.nearest_node(cfg.load_x, cfg.load_y);
    let load_dof = DOFS_PER_NODE * load_node + 2;
    if constrained[load_dof] {
        return Err(FemError::Singular("load lands on a constrained boundary DOF".into()));
    }
    let mut force = vec![0.0; n];
    force[load_dof] = 1.0;

    Ok(FemSystem {
        n,
        k_elastic: k,
        k_spring: spring,
        mass: m,
        force,
        constrained,
        loss_factor: cfg.loss_factor,
        node_count: nodes,
        load_dof,
    })
}
