//! Uniform box meshes: the supercell torus `[0,N)^d` and the unit box with
//! homogeneous Dirichlet conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub dim: usize,
    /// Box side length (identical on every axis).
    pub extent: usize,
    /// Cells per unit length, `1/h`.
    pub cells_per_unit: usize,
    pub bc: Boundary,
}

impl Mesh {
    pub fn new(dim: usize, extent: usize, cells_per_unit: usize, bc: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidSpec(format!("mesh dimension must be 1, 2 or 3 (got {dim})")));
        }
        if extent == 0 || cells_per_unit == 0 {
            return Err(Error::InvalidSpec("mesh extent and resolution must be positive".into()));
        }
        let mesh = Self {
            dim,
            extent,
            cells_per_unit,
            bc,
        };
        if bc == Boundary::Dirichlet && mesh.cells_per_axis() < 2 {
            return Err(Error::InvalidSpec("Dirichlet mesh needs at least 2 cells per axis".into()));
        }
        Ok(mesh)
    }

    /// Periodic mesh of the supercell torus `[0,N)^d`.
    pub fn torus(dim: usize, supercell_size: usize, cells_per_unit: usize) -> Result<Self> {
        Self::new(dim, supercell_size, cells_per_unit, Boundary::Periodic)
    }

    /// Dirichlet mesh of the unit box `(0,1)^d`.
    pub fn unit_box(dim: usize, cells_per_unit: usize) -> Result<Self> {
        Self::new(dim, 1, cells_per_unit, Boundary::Dirichlet)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    pub fn cells_per_axis(&self) -> usize {
        self.extent * self.cells_per_unit
    }

    pub fn nodes_per_axis(&self) -> usize {
        match self.bc {
            Boundary::Periodic => self.cells_per_axis(),
            Boundary::Dirichlet => self.cells_per_axis() + 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn element_count(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    pub fn volume(&self) -> f64 {
        (self.extent as f64).powi(self.dim as i32)
    }

    /// Multi-index of a node (axis 0 fastest).
    pub fn node_multi(&self, node: usize) -> [usize; 3] {
        let n = self.nodes_per_axis();
        let mut idx = [0; 3];
        let mut rem = node;
        for v in idx.iter_mut().take(self.dim) {
            *v = rem % n;
            rem /= n;
        }
        idx
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        let n = self.nodes_per_axis();
        let mut index = 0;
        let mut stride = 1;
        for &k in multi.iter().take(self.dim) {
            index += k * stride;
            stride *= n;
        }
        index
    }

    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let idx = self.node_multi(node);
        let h = self.h();
        let mut x = [0.0; 3];
        for i in 0..self.dim {
            x[i] = idx[i] as f64 * h;
        }
        x
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        if self.bc == Boundary::Periodic {
            return false;
        }
        let last = self.nodes_per_axis() - 1;
        self.node_multi(node)
            .iter()
            .take(self.dim)
            .any(|&k| k == 0 || k == last)
    }

    /// Multi-index of an element's lower corner.
    pub fn element_multi(&self, element: usize) -> [usize; 3] {
        let n = self.cells_per_axis();
        let mut idx = [0; 3];
        let mut rem = element;
        for v in idx.iter_mut().take(self.dim) {
            *v = rem % n;
            rem /= n;
        }
        idx
    }

    /// Global nodes of an element, local node `a` having bit `i` set when it
    /// sits on the upper face along axis `i`.
    pub fn element_nodes(&self, element: usize, out: &mut [usize; 8]) {
        let corner = self.element_multi(element);
        let n = self.nodes_per_axis();
        let periodic = self.bc == Boundary::Periodic;
        for (a, slot) in out.iter_mut().enumerate().take(1 << self.dim) {
            let mut multi = [0; 3];
            for i in 0..self.dim {
                let k = corner[i] + ((a >> i) & 1);
                multi[i] = if periodic { k % n } else { k };
            }
            *slot = self.node_index(&multi);
        }
    }

    /// Neighbouring nodes (3^d stencil, deduplicated and sorted).
    pub fn node_neighbors(&self, node: usize) -> Vec<usize> {
        let idx = self.node_multi(node);
        let n = self.nodes_per_axis() as i64;
        let periodic = self.bc == Boundary::Periodic;
        let mut out = Vec::with_capacity(27);
        for code in 0..3usize.pow(self.dim as u32) {
            let mut rem = code;
            let mut multi = [0usize; 3];
            let mut inside = true;
            for i in 0..self.dim {
                let off = (rem % 3) as i64 - 1;
                rem /= 3;
                let k = idx[i] as i64 + off;
                if periodic {
                    multi[i] = k.rem_euclid(n) as usize;
                } else if k < 0 || k >= n {
                    inside = false;
                } else {
                    multi[i] = k as usize;
                }
            }
            if inside {
                out.push(self.node_index(&multi));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Numbering of the unknowns: all nodes on a torus, interior nodes for
/// Dirichlet meshes. Unknown `dof = free_node * m + component`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub components: usize,
    node_to_free: Vec<Option<usize>>,
    free_to_node: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, components: usize) -> Self {
        let mut node_to_free = vec![None; mesh.node_count()];
        let mut free_to_node = Vec::new();
        for (node, slot) in node_to_free.iter_mut().enumerate() {
            if !mesh.is_boundary_node(node) {
                *slot = Some(free_to_node.len());
                free_to_node.push(node);
            }
        }
        Self {
            components,
            node_to_free,
            free_to_node,
        }
    }

    pub fn free_nodes(&self) -> usize {
        self.free_to_node.len()
    }

    pub fn len(&self) -> usize {
        self.free_to_node.len() * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.free_to_node.is_empty()
    }

    #[inline]
    pub fn free(&self, node: usize) -> Option<usize> {
        self.node_to_free[node]
    }

    #[inline]
    pub fn node(&self, free: usize) -> usize {
        self.free_to_node[free]
    }
}
