use alloc::vec::Vec;

/// How a missing neighbour at a rectangle edge is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum End {
    /// Dirichlet value half a spacing away (cell-centred unknowns, ghost
    /// `2b - u`).
    Cell,
    /// Dirichlet value one full spacing away (face unknowns next to a wall
    /// node).
    Node,
    /// Zero flux (ghost `u`).
    Neumann,
}

impl End {
    fn weight(self) -> f64 {
        match self {
            End::Cell => 2.0,
            End::Node => 1.0,
            End::Neumann => 0.0,
        }
    }
}

/// `shift * I + scale * A` on an `nx x ny` block, where `A` is the
/// five-point negative Laplacian with homogeneous closures given by `ends`
/// (west, east, south, north). `A` is symmetric positive semi-definite.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub nx: usize,
    pub ny: usize,
    pub cx: f64,
    pub cy: f64,
    pub ends: [End; 4],
    pub shift: f64,
    pub scale: f64,
}

impl Stencil {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, ends: [End; 4]) -> Self {
        Self {
            nx,
            ny,
            cx: 1.0 / (hx * hx),
            cy: 1.0 / (hy * hy),
            ends,
            shift: 0.0,
            scale: 1.0,
        }
    }

    pub fn with_shift_scale(mut self, shift: f64, scale: f64) -> Self {
        self.shift = shift;
        self.scale = scale;
        self
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let (cx, cy) = (self.cx, self.cy);
        let [w, e, s, n] = self.ends.map(End::weight);
        for j in 0..ny {
            let row = j * nx;
            for i in 0..nx {
                let k = row + i;
                let c = x[k];
                let mut a = 0.0;
                a += if i > 0 { cx * (c - x[k - 1]) } else { cx * w * c };
                a += if i + 1 < nx { cx * (c - x[k + 1]) } else { cx * e * c };
                a += if j > 0 { cy * (c - x[k - nx]) } else { cy * s * c };
                a += if j + 1 < ny { cy * (c - x[k + nx]) } else { cy * n * c };
                y[k] = self.shift * c + self.scale * a;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let [w, e, s, n] = self.ends.map(End::weight);
        let mut d = Vec::with_capacity(self.len());
        for j in 0..ny {
            for i in 0..nx {
                let mut a = 0.0;
                a += self.cx * if i > 0 { 1.0 } else { w };
                a += self.cx * if i + 1 < nx { 1.0 } else { e };
                a += self.cy * if j > 0 { 1.0 } else { s };
                a += self.cy * if j + 1 < ny { 1.0 } else { n };
                d.push(self.shift + self.scale * a);
            }
        }
        d
    }

    /// `<A x, x>` with unit weights.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut y = alloc::vec![0.0; x.len()];
        self.apply(x, &mut y);
        crate::grid::dot(&y, x)
    }
}
