//! Periodic L×L lattice carrying one qudit per edge.
//!
//! Coordinates: sites `(x, y)` with `x` growing east and `y` growing north,
//! both taken mod L. Each site owns two edges:
//!
//! * `h(x, y)` from `(x, y)` to `(x+1, y)`, index `2 (y L + x)`,
//! * `v(x, y)` from `(x, y)` to `(x, y+1)`, index `2 (y L + x) + 1`.
//!
//! Plaquette `P(x, y)` is the face with south-west corner `(x, y)`. An `X^a`
//! on a horizontal edge adds `+a` to the plaquette to its north and `-a` to
//! the one to its south; on a vertical edge `+a` goes east and `-a` west.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zd::{XOperator, Zd, ZdCharge};

/// One signed edge incidence of a stabilizer generator.
pub type Incidence = [(usize, i8); 4];

#[derive(Clone, Debug)]
pub struct TorusLattice {
    size: usize,
    modulus: Zd,
    plaquettes: Vec<Incidence>,
    vertices: Vec<Incidence>,
}

/// Per-plaquette Z_d charges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Syndrome {
    modulus: Zd,
    charges: Vec<u8>,
}

/// Logical X winding numbers `(w1, w2)`. Ordered lexicographically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub w1: u8,
    pub w2: u8,
}

impl ClassLabel {
    pub fn new(w1: u8, w2: u8) -> Self {
        ClassLabel { w1, w2 }
    }

    pub fn index(self, d: Zd) -> usize {
        self.w1 as usize * d.as_usize() + self.w2 as usize
    }

    pub fn from_index(index: usize, d: Zd) -> Self {
        let d = d.as_usize();
        ClassLabel {
            w1: (index / d) as u8,
            w2: (index % d) as u8,
        }
    }

    pub fn shifted(self, by: ClassLabel, d: Zd) -> Self {
        ClassLabel {
            w1: d.add(self.w1, by.w1),
            w2: d.add(self.w2, by.w2),
        }
    }

    pub fn all(d: Zd) -> impl Iterator<Item = ClassLabel> {
        (0..d.as_usize() * d.as_usize()).map(move |i| ClassLabel::from_index(i, d))
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.w1, self.w2)
    }
}

impl Syndrome {
    pub fn new(modulus: Zd, charges: Vec<u8>) -> Self {
        let d = modulus.get();
        Syndrome {
            modulus,
            charges: charges.into_iter().map(|c| c % d).collect(),
        }
    }

    pub fn zero(modulus: Zd, len: usize) -> Self {
        Syndrome {
            modulus,
            charges: vec![0; len],
        }
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn charges(&self) -> &[u8] {
        &self.charges
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.charges.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn charge(&self, p: usize) -> ZdCharge {
        self.modulus.charge(self.charges[p] as i64)
    }

    pub fn total(&self) -> u8 {
        let m = self.modulus;
        self.charges.iter().fold(0, |acc, &c| m.add(acc, c))
    }

    pub fn is_trivial(&self) -> bool {
        self.charges.iter().all(|&c| c == 0)
    }
}

#[inline]
fn wrap(v: isize, l: usize) -> usize {
    v.rem_euclid(l as isize) as usize
}

impl TorusLattice {
    pub fn new(size: usize, d: u32) -> Result<Self> {
        Self::with_modulus(size, Zd::new(d)?)
    }

    pub fn with_modulus(size: usize, modulus: Zd) -> Result<Self> {
        if size < 2 || !size.is_multiple_of(2) {
            return Err(Error::InvalidLatticeSize {
                size,
                reason: "linear size must be even and at least 2".into(),
            });
        }
        let mut lat = TorusLattice {
            size,
            modulus,
            plaquettes: Vec::with_capacity(size * size),
            vertices: Vec::with_capacity(size * size),
        };
        for y in 0..size as isize {
            for x in 0..size as isize {
                lat.plaquettes.push([
                    (lat.h_edge(x, y), 1),
                    (lat.v_edge(x, y), 1),
                    (lat.h_edge(x, y + 1), -1),
                    (lat.v_edge(x + 1, y), -1),
                ]);
                lat.vertices.push([
                    (lat.h_edge(x, y), 1),
                    (lat.h_edge(x - 1, y), -1),
                    (lat.v_edge(x, y), -1),
                    (lat.v_edge(x, y - 1), 1),
                ]);
            }
        }
        Ok(lat)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        2 * self.size * self.size
    }

    #[inline]
    pub fn num_plaquettes(&self) -> usize {
        self.size * self.size
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.size * self.size
    }

    #[inline]
    pub fn site(&self, x: isize, y: isize) -> usize {
        wrap(y, self.size) * self.size + wrap(x, self.size)
    }

    #[inline]
    pub fn h_edge(&self, x: isize, y: isize) -> usize {
        2 * self.site(x, y)
    }

    #[inline]
    pub fn v_edge(&self, x: isize, y: isize) -> usize {
        2 * self.site(x, y) + 1
    }

    #[inline]
    pub fn plaquette(&self, x: isize, y: isize) -> usize {
        self.site(x, y)
    }

    pub fn plaquette_incidence(&self, p: usize) -> &Incidence {
        &self.plaquettes[p]
    }

    pub fn vertex_incidence(&self, v: usize) -> &Incidence {
        &self.vertices[v]
    }

    /// Z-exponent vector of the plaquette generator `B_p`.
    pub fn plaquette_z_powers(&self, p: usize) -> Vec<u8> {
        let mut z = vec![0u8; self.num_edges()];
        for &(e, s) in &self.plaquettes[p] {
            z[e] = self.modulus.add(z[e], self.modulus.reduce(s as i64));
        }
        z
    }

    fn check_len(&self, op: &XOperator) -> Result<()> {
        if op.len() != self.num_edges() {
            return Err(Error::LengthMismatch {
                expected: self.num_edges(),
                found: op.len(),
            });
        }
        if op.modulus() != self.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus.get(),
                right: op.modulus().get(),
            });
        }
        Ok(())
    }

    pub fn syndrome(&self, error: &XOperator) -> Result<Syndrome> {
        self.check_len(error)?;
        let m = self.modulus;
        let ex = error.exponents();
        let charges = self
            .plaquettes
            .iter()
            .map(|inc| {
                inc.iter().fold(0u8, |acc, &(e, s)| {
                    if s > 0 {
                        m.add(acc, ex[e])
                    } else {
                        m.sub(acc, ex[e])
                    }
                })
            })
            .collect();
        Ok(Syndrome {
            modulus: m,
            charges,
        })
    }

    /// Exponent vector of `Π_v A_v^{k_v}`.
    pub fn vertex_stabilizer(&self, vertex_exponents: &[u8]) -> Result<XOperator> {
        if vertex_exponents.len() != self.num_vertices() {
            return Err(Error::LengthMismatch {
                expected: self.num_vertices(),
                found: vertex_exponents.len(),
            });
        }
        let m = self.modulus;
        let mut op = XOperator::identity(m, self.num_edges());
        for (inc, &k) in self.vertices.iter().zip(vertex_exponents) {
            let k = k % m.get();
            if k == 0 {
                continue;
            }
            for &(e, s) in inc {
                op.apply(e, if s > 0 { k } else { m.neg(k) });
            }
        }
        Ok(op)
    }

    /// Edges of the row-0 horizontal cut (measures `w1`) and the column-0
    /// vertical cut (measures `w2`).
    pub fn cut_edges(&self) -> (Vec<usize>, Vec<usize>) {
        let l = self.size as isize;
        let c1 = (0..l).map(|x| self.h_edge(x, 0)).collect();
        let c2 = (0..l).map(|y| self.v_edge(0, y)).collect();
        (c1, c2)
    }

    pub fn winding(&self, op: &XOperator) -> Result<ClassLabel> {
        self.check_len(op)?;
        let m = self.modulus;
        let l = self.size as isize;
        let ex = op.exponents();
        let w1 = (0..l).fold(0u8, |acc, x| m.add(acc, ex[self.h_edge(x, 0)]));
        let w2 = (0..l).fold(0u8, |acc, y| m.add(acc, ex[self.v_edge(0, y)]));
        Ok(ClassLabel { w1, w2 })
    }

    /// Logical representative `X̄_1^{w1} X̄_2^{w2}`: a northward dual loop on the
    /// horizontal edges of column 0 and an eastward dual loop on the vertical
    /// edges of row 0.
    pub fn logical(&self, label: ClassLabel) -> XOperator {
        let m = self.modulus;
        let l = self.size as isize;
        let mut op = XOperator::identity(m, self.num_edges());
        for y in 0..l {
            op.apply(self.h_edge(0, y), label.w1 % m.get());
        }
        for x in 0..l {
            op.apply(self.v_edge(x, 0), label.w2 % m.get());
        }
        op
    }

    /// Deterministic operator with syndrome `s`.
    ///
    /// Charges in each row are pushed west along vertical edges into column 0,
    /// then down column 0 along horizontal edges into `P(0, 0)`. The tree
    /// avoids both cut lines, so the result always has winding `(0, 0)`.
    pub fn canonical_representative(&self, s: &Syndrome) -> Result<XOperator> {
        if s.len() != self.num_plaquettes() {
            return Err(Error::LengthMismatch {
                expected: self.num_plaquettes(),
                found: s.len(),
            });
        }
        let total = s.total();
        if total != 0 {
            return Err(Error::ChargeNotNeutral(total));
        }
        let m = self.modulus;
        let l = self.size as isize;
        let mut residual = s.charges().to_vec();
        let mut op = XOperator::identity(m, self.num_edges());
        for y in 0..l {
            for x in (1..l).rev() {
                let p = self.plaquette(x, y);
                let c = residual[p];
                if c != 0 {
                    // X^c on v(x, y) accounts for +c at P(x, y) and -c at P(x-1, y).
                    op.apply(self.v_edge(x, y), c);
                    residual[p] = 0;
                    let w = self.plaquette(x - 1, y);
                    residual[w] = m.add(residual[w], c);
                }
            }
        }
        for y in (1..l).rev() {
            let p = self.plaquette(0, y);
            let c = residual[p];
            if c != 0 {
                // X^c on h(0, y) accounts for +c at P(0, y) and -c at P(0, y-1).
                op.apply(self.h_edge(0, y), c);
                residual[p] = 0;
                let s = self.plaquette(0, y - 1);
                residual[s] = m.add(residual[s], c);
            }
        }
        debug_assert!(residual.iter().all(|&c| c == 0));
        Ok(op)
    }

    /// Sums the four fine charges of each 2×2 block into the coarse plaquette
    /// of the half-size lattice.
    pub fn coarse_grain(&self, s: &Syndrome) -> Result<Syndrome> {
        if s.len() != self.num_plaquettes() {
            return Err(Error::LengthMismatch {
                expected: self.num_plaquettes(),
                found: s.len(),
            });
        }
        let m = self.modulus;
        let half = self.size / 2;
        let mut out = vec![0u8; half * half];
        for y in 0..self.size {
            for x in 0..self.size {
                let c = (y / 2) * half + x / 2;
                out[c] = m.add(out[c], s.charges()[y * self.size + x]);
            }
        }
        Ok(Syndrome {
            modulus: m,
            charges: out,
        })
    }
}
