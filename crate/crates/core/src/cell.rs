//! The ten-qudit unit cell used by one renormalization step.
//!
//! A cell covers a 2×2 block of plaquettes with south-west site `(2i, 2j)`.
//! Local qudit labels map onto lattice edges as follows (`h`/`v` as in
//! [`crate::lattice`], coordinates relative to the cell origin):
//!
//! ```text
//!   0 = h(0, 2)  top of NW          shared: local 9 of the northern cell
//!   1 = v(0, 1)  left of NW         shared: local 8 of the western cell
//!   2 = h(1, 2)  top of NE
//!   3 = v(1, 1)  between NW and NE
//!   4 = h(0, 1)  between NW and SW
//!   5 = v(0, 0)  left of SW
//!   6 = h(1, 1)  between NE and SE
//!   7 = v(1, 0)  between SW and SE
//!   8 = v(2, 1)  right of NE        shared: local 1 of the eastern cell
//!   9 = h(0, 0)  bottom of SW       shared: local 0 of the southern cell
//! ```
//!
//! The NW, NE and SW plaquettes are measured; SE is left to fluctuate and the
//! cell's total charge becomes the coarse plaquette. `L0` carries flow through
//! the northern boundary (edges 0 and 2) and maps onto coarse edge
//! `h'(i, j+1)`; `L1` carries flow through the western boundary (edges 1 and
//! 5) and maps onto coarse edge `v'(i, j)`.

use crate::error::{Error, Result};
use crate::lattice::TorusLattice;
use crate::zd::{XOperator, Zd, ZdCharge};

pub const CELL_QUDITS: usize = 10;

/// Local labels of the four qudits shared with neighbouring cells.
pub const BOUNDARY_QUDITS: [usize; 4] = [0, 1, 8, 9];

/// Signed local incidence of the measured plaquettes NW, NE, SW.
pub const MEASURED_PLAQUETTES: [[(usize, i8); 4]; 3] = [
    [(1, 1), (4, 1), (0, -1), (3, -1)],
    [(3, 1), (6, 1), (2, -1), (8, -1)],
    [(5, 1), (9, 1), (4, -1), (7, -1)],
];

/// Generator order used for coordinates and the basis matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    S0,
    S1,
    S2,
    T0,
    T1,
    T2,
    E0,
    E1,
    L0,
    L1,
}

impl Generator {
    pub const ALL: [Generator; 10] = [
        Generator::S0,
        Generator::S1,
        Generator::S2,
        Generator::T0,
        Generator::T1,
        Generator::T2,
        Generator::E0,
        Generator::E1,
        Generator::L0,
        Generator::L1,
    ];

    /// Signed support `(qudit, ±1)`.
    fn support(self) -> &'static [(usize, i8)] {
        match self {
            Generator::S0 => &[(0, 1), (2, -1), (3, -1)],
            Generator::S1 => &[(1, 1), (4, -1), (5, -1)],
            Generator::S2 => &[(3, 1), (4, 1), (6, -1), (7, -1)],
            Generator::T0 => &[(4, 1), (7, -1)],
            Generator::T1 => &[(6, 1)],
            Generator::T2 => &[(7, -1)],
            Generator::E0 => &[(6, 1), (8, 1)],
            Generator::E1 => &[(7, -1), (9, -1)],
            Generator::L0 => &[(2, 1), (6, 1)],
            Generator::L1 => &[(5, 1), (7, 1)],
        }
    }
}

pub type CellVector = [u8; CELL_QUDITS];

/// Charges `(a0, a1, a2)` of the NW, NE and SW plaquettes of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DefectTriple {
    pub a: [u8; 3],
}

impl DefectTriple {
    pub fn new(a0: u8, a1: u8, a2: u8) -> Self {
        DefectTriple { a: [a0, a1, a2] }
    }

    pub fn charges(&self, m: Zd) -> [ZdCharge; 3] {
        self.a.map(|c| m.charge(c as i64))
    }
}

/// Unique decomposition `op = t · l · e · s` of a ten-qudit operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CosetCoordinates {
    pub t: DefectTriple,
    pub l: [u8; 2],
    pub e: [u8; 2],
    pub s: [u8; 3],
}

#[derive(Clone, Debug)]
pub struct CellBasis {
    modulus: Zd,
    generators: [CellVector; 10],
    /// `coords = inverse · x`, row per generator in [`Generator::ALL`] order.
    inverse: [[u8; 10]; 10],
    /// `l` group elements, index `i * d + j` for `L0^i L1^j`.
    l_table: Vec<CellVector>,
    /// Every element of `⟨E0, E1⟩ · ⟨S0, S1, S2⟩`.
    es_table: Vec<CellVector>,
    /// Exponent of qudit `q` in `S2^a · (L0 L1)^b · (E0 E1 S0 S1)^c`, at
    /// `((q d + a) d + b) d + c`. Each qudit meets at most one generator of
    /// each factor, which is what the factored cell sums rely on.
    group_offsets: Vec<u8>,
}

fn measured_syndrome(m: Zd, x: &CellVector) -> [u8; 3] {
    MEASURED_PLAQUETTES.map(|inc| {
        inc.iter().fold(0u8, |acc, &(q, s)| {
            if s > 0 {
                m.add(acc, x[q])
            } else {
                m.sub(acc, x[q])
            }
        })
    })
}

fn add_vec(m: Zd, a: &CellVector, b: &CellVector) -> CellVector {
    let mut out = *a;
    for (o, &v) in out.iter_mut().zip(b) {
        *o = m.add(*o, v);
    }
    out
}

fn scale_vec(m: Zd, a: &CellVector, k: u8) -> CellVector {
    a.map(|v| m.mul(v, k))
}

/// Determinant of an integer matrix (fraction-free Bareiss elimination).
fn determinant(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

impl CellBasis {
    pub fn new(modulus: Zd) -> Result<Self> {
        let m = modulus;
        let d = m.as_usize();
        let generators = Generator::ALL.map(|g| {
            let mut v = [0u8; 10];
            for &(q, s) in g.support() {
                v[q] = m.reduce(s as i64);
            }
            v
        });

        // Defect pattern check: T_i is the i-th unit defect, everything else
        // is invisible to the measured plaquettes.
        for (g, v) in Generator::ALL.iter().zip(&generators) {
            let syn = measured_syndrome(m, v);
            let want = match g {
                Generator::T0 => [1, 0, 0],
                Generator::T1 => [0, 1, 0],
                Generator::T2 => [0, 0, 1],
                _ => [0, 0, 0],
            };
            if syn != want {
                return Err(Error::BasisValidation(format!(
                    "{g:?} has measured syndrome {syn:?}, expected {want:?}"
                )));
            }
        }

        // Columns of the basis matrix are the generators; invert it through
        // the adjugate, which needs the integer determinant to be a unit.
        let signed: Vec<Vec<i128>> = (0..10)
            .map(|q| {
                Generator::ALL
                    .iter()
                    .map(|g| {
                        g.support()
                            .iter()
                            .find(|&&(p, _)| p == q)
                            .map_or(0, |&(_, s)| s as i128)
                    })
                    .collect()
            })
            .collect();
        let det = determinant(signed.clone());
        let det_mod = m.reduce((det % m.get() as i128) as i64);
        let det_inv = m.inverse(det_mod).ok_or_else(|| {
            Error::BasisValidation(format!("determinant {det} is not a unit mod {d}"))
        })?;
        let mut inverse = [[0u8; 10]; 10];
        for (r, row) in inverse.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                // inverse[r][c] = cofactor(c, r) / det
                let minor: Vec<Vec<i128>> = signed
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != c)
                    .map(|(_, row)| {
                        row.iter()
                            .enumerate()
                            .filter(|&(j, _)| j != r)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let cof = determinant(minor) * if (r + c) % 2 == 0 { 1 } else { -1 };
                let cof = m.reduce((cof % m.get() as i128) as i64);
                *slot = m.mul(cof, det_inv);
            }
        }

        let g = |gen: Generator| generators[gen as usize];
        let mut l_table = Vec::with_capacity(d * d);
        for i in 0..d as u8 {
            for j in 0..d as u8 {
                l_table.push(add_vec(
                    m,
                    &scale_vec(m, &g(Generator::L0), i),
                    &scale_vec(m, &g(Generator::L1), j),
                ));
            }
        }
        let mut es_table = Vec::with_capacity(d.pow(5));
        for e0 in 0..d as u8 {
            for e1 in 0..d as u8 {
                let ev = add_vec(
                    m,
                    &scale_vec(m, &g(Generator::E0), e0),
                    &scale_vec(m, &g(Generator::E1), e1),
                );
                for s0 in 0..d as u8 {
                    for s1 in 0..d as u8 {
                        for s2 in 0..d as u8 {
                            let mut v = add_vec(m, &ev, &scale_vec(m, &g(Generator::S0), s0));
                            v = add_vec(m, &v, &scale_vec(m, &g(Generator::S1), s1));
                            v = add_vec(m, &v, &scale_vec(m, &g(Generator::S2), s2));
                            es_table.push(v);
                        }
                    }
                }
            }
        }

        let mut group_offsets = Vec::with_capacity(CELL_QUDITS * d * d * d);
        for q in 0..CELL_QUDITS {
            let coef = |gen: Generator| g(gen)[q];
            let s2 = coef(Generator::S2);
            let l = m.add(coef(Generator::L0), coef(Generator::L1));
            let v = [Generator::E0, Generator::E1, Generator::S0, Generator::S1]
                .into_iter()
                .fold(0, |acc, gen| m.add(acc, coef(gen)));
            for a in 0..d as u8 {
                for b in 0..d as u8 {
                    for c in 0..d as u8 {
                        group_offsets.push(m.add(m.add(m.mul(s2, a), m.mul(l, b)), m.mul(v, c)));
                    }
                }
            }
        }

        let basis = CellBasis {
            modulus,
            generators,
            inverse,
            l_table,
            es_table,
            group_offsets,
        };
        for gen in Generator::ALL {
            let c = basis.coordinates_raw(&basis.generators[gen as usize]);
            let mut want = [0u8; 10];
            want[gen as usize] = 1;
            if c != want {
                return Err(Error::BasisValidation(format!(
                    "coordinate inverse fails on {gen:?}"
                )));
            }
        }
        Ok(basis)
    }

    #[inline]
    pub fn modulus(&self) -> Zd {
        self.modulus
    }

    pub fn generator(&self, g: Generator) -> XOperator {
        XOperator::from_exponents(self.modulus, self.generators[g as usize].to_vec())
    }

    #[inline]
    pub fn generator_vector(&self, g: Generator) -> &CellVector {
        &self.generators[g as usize]
    }

    /// `t(a) = T0^{a0} T1^{a1} T2^{a2}`.
    pub fn defect_vector(&self, a: DefectTriple) -> CellVector {
        let m = self.modulus;
        let mut v = [0u8; 10];
        for (i, gen) in [Generator::T0, Generator::T1, Generator::T2]
            .iter()
            .enumerate()
        {
            v = add_vec(
                m,
                &v,
                &scale_vec(m, &self.generators[*gen as usize], a.a[i]),
            );
        }
        v
    }

    pub fn defect_representative(&self, a: DefectTriple) -> XOperator {
        XOperator::from_exponents(self.modulus, self.defect_vector(a).to_vec())
    }

    /// Syndrome of a ten-qudit vector on the three measured plaquettes.
    pub fn measured_syndrome(&self, x: &CellVector) -> DefectTriple {
        DefectTriple {
            a: measured_syndrome(self.modulus, x),
        }
    }

    fn coordinates_raw(&self, x: &CellVector) -> [u8; 10] {
        let m = self.modulus;
        self.inverse.map(|row| {
            row.iter()
                .zip(x)
                .fold(0u8, |acc, (&a, &b)| m.add(acc, m.mul(a, b)))
        })
    }

    pub fn coset_coordinates(&self, op: &XOperator) -> Result<CosetCoordinates> {
        if op.len() != CELL_QUDITS {
            return Err(Error::LengthMismatch {
                expected: CELL_QUDITS,
                found: op.len(),
            });
        }
        let mut x = [0u8; 10];
        x.copy_from_slice(op.exponents());
        Ok(self.coordinates(&x))
    }

    pub fn coordinates(&self, x: &CellVector) -> CosetCoordinates {
        let c = self.coordinates_raw(x);
        CosetCoordinates {
            s: [c[0], c[1], c[2]],
            t: DefectTriple::new(c[3], c[4], c[5]),
            e: [c[6], c[7]],
            l: [c[8], c[9]],
        }
    }

    pub fn compose_coordinates(&self, c: &CosetCoordinates) -> CellVector {
        let m = self.modulus;
        let ks = [
            c.s[0], c.s[1], c.s[2], c.t.a[0], c.t.a[1], c.t.a[2], c.e[0], c.e[1], c.l[0], c.l[1],
        ];
        let mut v = [0u8; 10];
        for (g, &k) in self.generators.iter().zip(&ks) {
            v = add_vec(m, &v, &scale_vec(m, g, k));
        }
        v
    }

    #[inline]
    pub(crate) fn l_table(&self) -> &[CellVector] {
        &self.l_table
    }

    #[inline]
    pub(crate) fn es_table(&self) -> &[CellVector] {
        &self.es_table
    }

    #[inline]
    pub(crate) fn group_offsets(&self) -> &[u8] {
        &self.group_offsets
    }
}

/// Placement of every cell of the 2×2 tiling on a lattice.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    fine_size: usize,
    coarse_size: usize,
    /// Global edge index of each local qudit, per cell in row-major order.
    qudits: Vec<[usize; CELL_QUDITS]>,
    /// Global plaquette indices `[NW, NE, SW, SE]` per cell.
    plaquettes: Vec<[usize; 4]>,
    /// Coarse edges receiving the `L0` and `L1` marginals, per cell.
    coarse_edges: Vec<[usize; 2]>,
}

impl CellGeometry {
    pub fn new(lattice: &TorusLattice) -> Result<Self> {
        let l = lattice.size();
        if !l.is_multiple_of(4) {
            return Err(Error::InvalidLatticeSize {
                size: l,
                reason: "cell tiling needs L divisible by 4 so the coarse size stays even".into(),
            });
        }
        let half = l / 2;
        let coarse = TorusLattice::with_modulus(half, lattice.modulus())?;
        let mut qudits = Vec::with_capacity(half * half);
        let mut plaquettes = Vec::with_capacity(half * half);
        let mut coarse_edges = Vec::with_capacity(half * half);
        for j in 0..half as isize {
            for i in 0..half as isize {
                let (x, y) = (2 * i, 2 * j);
                let h = |dx, dy| lattice.h_edge(x + dx, y + dy);
                let v = |dx, dy| lattice.v_edge(x + dx, y + dy);
                qudits.push([
                    h(0, 2),
                    v(0, 1),
                    h(1, 2),
                    v(1, 1),
                    h(0, 1),
                    v(0, 0),
                    h(1, 1),
                    v(1, 0),
                    v(2, 1),
                    h(0, 0),
                ]);
                plaquettes.push([
                    lattice.plaquette(x, y + 1),
                    lattice.plaquette(x + 1, y + 1),
                    lattice.plaquette(x, y),
                    lattice.plaquette(x + 1, y),
                ]);
                coarse_edges.push([coarse.h_edge(i, j + 1), coarse.v_edge(i, j)]);
            }
        }
        Ok(CellGeometry {
            fine_size: l,
            coarse_size: half,
            qudits,
            plaquettes,
            coarse_edges,
        })
    }

    #[inline]
    pub fn fine_size(&self) -> usize {
        self.fine_size
    }

    #[inline]
    pub fn coarse_size(&self) -> usize {
        self.coarse_size
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.qudits.len()
    }

    /// Row-major cell index of cell `(i, j)`, wrapping periodically.
    #[inline]
    pub fn cell(&self, i: isize, j: isize) -> usize {
        let n = self.coarse_size as isize;
        (j.rem_euclid(n) * n + i.rem_euclid(n)) as usize
    }

    #[inline]
    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        (c % self.coarse_size, c / self.coarse_size)
    }

    #[inline]
    pub fn qudits(&self, c: usize) -> &[usize; CELL_QUDITS] {
        &self.qudits[c]
    }

    #[inline]
    pub fn plaquettes(&self, c: usize) -> &[usize; 4] {
        &self.plaquettes[c]
    }

    #[inline]
    pub fn coarse_edges(&self, c: usize) -> [usize; 2] {
        self.coarse_edges[c]
    }

    pub fn north(&self, c: usize) -> usize {
        let (i, j) = self.cell_coords(c);
        self.cell(i as isize, j as isize + 1)
    }

    pub fn south(&self, c: usize) -> usize {
        let (i, j) = self.cell_coords(c);
        self.cell(i as isize, j as isize - 1)
    }

    pub fn east(&self, c: usize) -> usize {
        let (i, j) = self.cell_coords(c);
        self.cell(i as isize + 1, j as isize)
    }

    pub fn west(&self, c: usize) -> usize {
        let (i, j) = self.cell_coords(c);
        self.cell(i as isize - 1, j as isize)
    }

    /// Defect triple of cell `c` read off a fine syndrome.
    pub fn defect(&self, c: usize, charges: &[u8]) -> DefectTriple {
        let p = &self.plaquettes[c];
        DefectTriple::new(charges[p[0]], charges[p[1]], charges[p[2]])
    }
}
