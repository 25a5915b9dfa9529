//! Structured shell mesh over the plate rectangle with per-node z-offsets
//! sampled from the beading pattern.

use platebead_core::types::{BeadingPattern, PlateConfig};

use crate::error::FemError;

/// Regular nx x ny node grid (nx along the length, ny along the width) with
/// two triangles per cell. Node (ix, iy) has index `ix * ny + iy`, which keeps
/// the assembled bandwidth at ~6*(ny+1) when ny <= nx.
#[derive(Debug, Clone)]
pub struct ShellMesh {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// per-node z-offset, meters
    pub z: Vec<f64>,
}

impl ShellMesh {
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    /// 3D position of a node.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let ix = idx / self.ny;
        let iy = idx % self.ny;
        [ix as f64 * self.dx, iy as f64 * self.dy, self.z[idx]]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let ix = idx / self.ny;
        let iy = idx % self.ny;
        ix == 0 || iy == 0 || ix == self.nx - 1 || iy == self.ny - 1
    }

    /// Node nearest to a physical (x, y) position.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let ix = (x / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let iy = (y / self.dy).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        self.node(ix, iy)
    }

    /// Triangles as node-index triples, two per cell, counter-clockwise seen
    /// from +z. The split diagonal alternates with cell parity so the
    /// triangulation is mirror-symmetric whenever the cell counts are even.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut tris = Vec::with_capacity(2 * (self.nx - 1) * (self.ny - 1));
        for ix in 0..self.nx - 1 {
            for iy in 0..self.ny - 1 {
                let n00 = self.node(ix, iy);
                let n10 = self.node(ix + 1, iy);
                let n01 = self.node(ix, iy + 1);
                let n11 = self.node(ix + 1, iy + 1);
                if (ix + iy) % 2 == 0 {
                    tris.push([n00, n10, n11]);
                    tris.push([n00, n11, n01]);
                } else {
                    tris.push([n00, n10, n01]);
                    tris.push([n10, n11, n01]);
                }
            }
        }
        tris
    }

    /// OBJ-style plain-text dump for visual debugging.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for i in 0..self.node_count() {
            let p = self.coords(i);
            s.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        for t in self.triangles() {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }
}

/// Build the mesh: node z = bilinear sample of the pattern at the node
/// position, scaled by the bead height.
pub fn build_mesh(
    cfg: &PlateConfig,
    pattern: &BeadingPattern,
    nx: usize,
    ny: usize,
) -> Result<ShellMesh, FemError> {
    if nx < 8 || ny < 8 {
        return Err(FemError::InvalidMesh(format!("resolution {nx}x{ny} below the 8x8 minimum")));
    }
    cfg.validate()?;
    pattern.validate()?;
    let dx = cfg.length / (nx - 1) as f64;
    let dy = cfg.width / (ny - 1) as f64;
    let mut z = vec![0.0; nx * ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let x = ix as f64 * dx;
            let y = iy as f64 * dy;
            // pattern pixel centers sit at (c + 0.5) * pitch
            let col = x / pattern.pixel_pitch_x - 0.5;
            let row = y / pattern.pixel_pitch_y - 0.5;
            z[ix * ny + iy] = pattern.grid.sample_bilinear(row, col) * cfg.bead_height;
        }
    }
    Ok(ShellMesh { nx, ny, dx, dy, z })
}
