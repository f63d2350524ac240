//! Linear finite elements on a uniform 1D mesh with homogeneous Dirichlet
//! conditions: mass/stiffness assembly, L² and Ritz projections, the
//! discrete L² norm and tridiagonal solves.
//!
//! Unknowns live on the interior nodes `x_1..x_{n-1}`; vector index `i`
//! refers to node `x_{i+1}`.

use crate::error::{invalid, Error, Result};

/// Uniform mesh of `[a, b]` with `n_cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    a: f64,
    b: f64,
    n_cells: usize,
}

impl Mesh1D {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("mesh endpoints must satisfy a < b, got [{a}, {b}]")));
        }
        if n_cells == 0 {
            return Err(invalid("mesh needs at least one cell"));
        }
        Ok(Self { a, b, n_cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    /// Node `x_i = a + i h`, `0 ≤ i ≤ n_cells`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn interior_len(&self) -> usize {
        self.n_cells - 1
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.n_cells).map(move |i| self.node(i))
    }

    fn require_interior(&self) -> Result<()> {
        if self.n_cells < 2 {
            Err(invalid("assembly needs at least two cells (one interior node)"))
        } else {
            Ok(())
        }
    }
}

/// Tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiag {
    sub: Vec<f64>,
    main: Vec<f64>,
    sup: Vec<f64>,
}

impl TriDiag {
    pub fn new(sub: Vec<f64>, main: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let m = main.len();
        if m == 0 {
            return Err(invalid("tridiagonal matrix must be non-empty"));
        }
        if sub.len() != m - 1 || sup.len() != m - 1 {
            return Err(invalid(format!(
                "diagonal lengths {}, {}, {} do not fit size {m}",
                sub.len(),
                m,
                sup.len()
            )));
        }
        Ok(Self { sub, main, sup })
    }

    /// Symmetric Toeplitz matrix with constant diagonal and off-diagonal.
    pub fn toeplitz(size: usize, diag: f64, off: f64) -> Result<Self> {
        if size == 0 {
            return Err(invalid("tridiagonal matrix must be non-empty"));
        }
        Self::new(vec![off; size - 1], vec![diag; size], vec![off; size - 1])
    }

    /// 1×1 matrix `[value]`.
    pub fn scalar(value: f64) -> Self {
        Self {
            sub: Vec::new(),
            main: vec![value],
            sup: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.main.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn main(&self) -> &[f64] {
        &self.main
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn is_symmetric(&self) -> bool {
        self.sub == self.sup
    }

    /// `out = self · x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.size();
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        for i in 0..m {
            let mut v = self.main[i] * x[i];
            if i > 0 {
                v += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < m {
                v += self.sup[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.apply(x, &mut out);
        out
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &TriDiag, b: f64) -> Result<TriDiag> {
        if self.size() != other.size() {
            return Err(invalid(format!(
                "cannot combine matrices of sizes {} and {}",
                self.size(),
                other.size()
            )));
        }
        let lin = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Ok(TriDiag {
            sub: lin(&self.sub, &other.sub),
            main: lin(&self.main, &other.main),
            sup: lin(&self.sup, &other.sup),
        })
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let m = self.size();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let mut r = 0.0;
            if i > 0 {
                r += self.sub[i - 1].abs();
            }
            if i + 1 < m {
                r += self.sup[i].abs();
            }
            lo = lo.min(self.main[i] - r);
            hi = hi.max(self.main[i] + r);
        }
        (lo, hi)
    }

    /// LU factorization without pivoting (Thomas algorithm), reusable for
    /// many right-hand sides.
    pub fn factorize(&self) -> Result<TriDiagFactor> {
        let m = self.size();
        let mut upper = vec![0.0; m.saturating_sub(1)];
        let mut inv_pivot = vec![0.0; m];
        let mut prev_upper = 0.0;
        for i in 0..m {
            let pivot = if i == 0 {
                self.main[0]
            } else {
                self.main[i] - self.sub[i - 1] * prev_upper
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < m {
                upper[i] = self.sup[i] * inv_pivot[i];
                prev_upper = upper[i];
            }
        }
        Ok(TriDiagFactor {
            sub: self.sub.clone(),
            upper,
            inv_pivot,
        })
    }
}

/// Thomas factorization of a [`TriDiag`].
#[derive(Debug, Clone)]
pub struct TriDiagFactor {
    sub: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl TriDiagFactor {
    pub fn size(&self) -> usize {
        self.inv_pivot.len()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let m = self.size();
        debug_assert_eq!(rhs.len(), m);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - self.sub[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }
}

/// Solves `matrix · x = rhs` in O(m).
pub fn thomas_solve(matrix: &TriDiag, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != matrix.size() {
        return Err(invalid(format!(
            "right-hand side has length {}, matrix size is {}",
            rhs.len(),
            matrix.size()
        )));
    }
    let factor = matrix.factorize()?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// Mass matrix: `2h/3` on the diagonal, `h/6` off it.
pub fn assemble_mass(mesh: &Mesh1D) -> Result<TriDiag> {
    mesh.require_interior()?;
    let h = mesh.h();
    TriDiag::toeplitz(mesh.interior_len(), 2.0 * h / 3.0, h / 6.0)
}

/// Stiffness matrix: `2/h` on the diagonal, `−1/h` off it.
pub fn assemble_stiffness(mesh: &Mesh1D) -> Result<TriDiag> {
    mesh.require_interior()?;
    let h = mesh.h();
    TriDiag::toeplitz(mesh.interior_len(), 2.0 / h, -1.0 / h)
}

/// Piecewise-linear function given by its interior nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    pub mesh: Mesh1D,
    pub coeffs: Vec<f64>,
}

impl FemFunction {
    pub fn new(mesh: Mesh1D, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.interior_len() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                mesh.interior_len(),
                coeffs.len()
            )));
        }
        Ok(Self { mesh, coeffs })
    }

    /// Nodal interpolant; boundary values are taken as zero.
    pub fn interpolate(mesh: Mesh1D, f: impl Fn(f64) -> f64) -> Self {
        let coeffs = mesh.interior_nodes().map(f).collect();
        Self { mesh, coeffs }
    }

    /// Point evaluation (zero outside `[a, b]`).
    pub fn eval(&self, x: f64) -> f64 {
        let m = &self.mesh;
        if x <= m.a() || x >= m.b() {
            return 0.0;
        }
        let s = (x - m.a()) / m.h();
        let cell = (s.floor() as usize).min(m.n_cells() - 1);
        let frac = s - cell as f64;
        let nodal = |i: usize| {
            if i == 0 || i == m.n_cells() {
                0.0
            } else {
                self.coeffs[i - 1]
            }
        };
        (1.0 - frac) * nodal(cell) + frac * nodal(cell + 1)
    }
}

/// Description of a datum to be projected onto the finite element space.
#[derive(Clone, Copy)]
pub enum Datum<'a> {
    /// Smooth function, integrated with 3-point Gauss quadrature per cell.
    Smooth(&'a (dyn Fn(f64) -> f64 + Sync)),
    /// Indicator of `(lo, hi)`, integrated exactly.
    Indicator { lo: f64, hi: f64 },
}

impl std::fmt::Debug for Datum<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Datum::Smooth(_) => f.write_str("Smooth(..)"),
            Datum::Indicator { lo, hi } => write!(f, "Indicator({lo}, {hi})"),
        }
    }
}

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Load vector `b_i = ∫ v φ_i` over the interior hat functions.
pub fn load_vector(mesh: &Mesh1D, datum: Datum<'_>) -> Result<Vec<f64>> {
    mesh.require_interior()?;
    let n = mesh.n_cells();
    let h = mesh.h();
    let mut load = vec![0.0; mesh.interior_len()];
    let mut add = |node: usize, v: f64| {
        if node >= 1 && node < n {
            load[node - 1] += v;
        }
    };
    for cell in 0..n {
        let xl = mesh.node(cell);
        let xr = mesh.node(cell + 1);
        let (left, right) = match datum {
            Datum::Smooth(f) => {
                let mid = 0.5 * (xl + xr);
                let mut left = 0.0;
                let mut right = 0.0;
                for (g, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                    let x = mid + 0.5 * h * g;
                    let fx = f(x);
                    if !fx.is_finite() {
                        return Err(Error::NonFiniteDatum { x });
                    }
                    let jw = 0.5 * h * w * fx;
                    left += jw * (xr - x) / h;
                    right += jw * (x - xl) / h;
                }
                (left, right)
            }
            Datum::Indicator { lo, hi } => {
                let s = lo.max(xl);
                let e = hi.min(xr);
                if e > s {
                    // trapezoid is exact for the linear hats
                    let len = e - s;
                    let left = 0.5 * len * ((xr - s) / h + (xr - e) / h);
                    let right = 0.5 * len * ((s - xl) / h + (e - xl) / h);
                    (left, right)
                } else {
                    (0.0, 0.0)
                }
            }
        };
        add(cell, left);
        add(cell + 1, right);
    }
    Ok(load)
}

/// Mesh plus its assembled mass and stiffness matrices.
#[derive(Debug, Clone)]
pub struct Fem1dSystem {
    pub mesh: Mesh1D,
    pub mass: TriDiag,
    pub stiffness: TriDiag,
    mass_factor: TriDiagFactor,
    stiffness_factor: TriDiagFactor,
}

impl Fem1dSystem {
    pub fn new(mesh: Mesh1D) -> Result<Self> {
        let mass = assemble_mass(&mesh)?;
        let stiffness = assemble_stiffness(&mesh)?;
        let mass_factor = mass.factorize()?;
        let stiffness_factor = stiffness.factorize()?;
        Ok(Self {
            mesh,
            mass,
            stiffness,
            mass_factor,
            stiffness_factor,
        })
    }

    pub fn dof(&self) -> usize {
        self.mesh.interior_len()
    }

    /// L² projection `P_h v`: solves `M c = (v, φ_i)`.
    pub fn l2_project(&self, datum: Datum<'_>) -> Result<FemFunction> {
        let mut c = load_vector(&self.mesh, datum)?;
        self.mass_factor.solve_in_place(&mut c);
        FemFunction::new(self.mesh, c)
    }

    /// Ritz projection `R_h v` of `v ∈ H¹₀` from its Laplacian: solves
    /// `A c = −(Δv, φ_i)`.
    pub fn ritz_project(&self, laplacian: &(dyn Fn(f64) -> f64 + Sync)) -> Result<FemFunction> {
        let mut c = load_vector(&self.mesh, Datum::Smooth(laplacian))?;
        for x in c.iter_mut() {
            *x = -*x;
        }
        self.stiffness_factor.solve_in_place(&mut c);
        FemFunction::new(self.mesh, c)
    }

    /// `sqrt(cᵀ M c)`.
    pub fn l2_norm(&self, coeffs: &[f64]) -> Result<f64> {
        discrete_l2_norm_with(&self.mass, coeffs)
    }
}

fn discrete_l2_norm_with(mass: &TriDiag, coeffs: &[f64]) -> Result<f64> {
    if coeffs.len() != mass.size() {
        return Err(invalid(format!(
            "coefficient vector has length {}, expected {}",
            coeffs.len(),
            mass.size()
        )));
    }
    let mc = mass.mul_vec(coeffs);
    let q: f64 = mc.iter().zip(coeffs).map(|(a, b)| a * b).sum();
    Ok(q.max(0.0).sqrt())
}

/// Discrete L² norm `sqrt(cᵀ M c)` of a coefficient vector on `mesh`.
pub fn discrete_l2_norm(mesh: &Mesh1D, coeffs: &[f64]) -> Result<f64> {
    let mass = assemble_mass(mesh)?;
    discrete_l2_norm_with(&mass, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Mesh1D {
        Mesh1D::new(0.0, 1.0, n).unwrap()
    }

    fn dense_solve(t: &TriDiag, rhs: &[f64]) -> Vec<f64> {
        let m = t.size();
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            a[i][i] = t.main()[i];
            if i > 0 {
                a[i][i - 1] = t.sub()[i - 1];
            }
            if i + 1 < m {
                a[i][i + 1] = t.sup()[i];
            }
            a[i][m] = rhs[i];
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for row in col + 1..m {
                let f = a[row][col] / a[col][col];
                for k in col..=m {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|k| a[i][k] * x[k]).sum();
            x[i] = (a[i][m] - s) / a[i][i];
        }
        x
    }

    fn slope(hs: &[f64], errs: &[f64]) -> f64 {
        let n = hs.len() as f64;
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn mass_small_meshes() {
        let m = assemble_mass(&unit(2)).unwrap();
        assert_eq!(m.size(), 1);
        assert!((m.main()[0] - 1.0 / 3.0).abs() < 1e-15);
        let m = assemble_mass(&unit(4)).unwrap();
        for d in m.main() {
            assert!((d - 1.0 / 6.0).abs() < 1e-15);
        }
        for o in m.sub() {
            assert!((o - 1.0 / 24.0).abs() < 1e-15);
        }
        let m = assemble_mass(&unit(10)).unwrap();
        let ones = vec![1.0; m.size()];
        let rs = m.mul_vec(&ones);
        for r in &rs[1..rs.len() - 1] {
            assert!((r - 0.1).abs() < 1e-15);
        }
        assert!(m.is_symmetric());
        let (lo, hi) = m.gershgorin_bounds();
        assert!(lo >= 0.1 / 3.0 - 1e-15 && hi <= 0.1 + 1e-15 && lo > 0.0);
    }

    #[test]
    fn stiffness_small_meshes() {
        let a = assemble_stiffness(&unit(2)).unwrap();
        assert_eq!(a.main(), &[4.0]);
        let a = assemble_stiffness(&unit(10)).unwrap();
        let ones = vec![1.0; a.size()];
        let r = a.mul_vec(&ones);
        for v in &r[1..r.len() - 1] {
            assert!(v.abs() < 1e-12);
        }
        assert!(a.is_symmetric());
        assert!(assemble_stiffness(&unit(1)).is_err());
    }

    #[test]
    fn discrete_eigenvalues_converge() {
        // Eigenvectors are sin(kπx) samples; eigenvalues of M⁻¹A have the
        // closed form (6/h²)(1 − cos kπh)/(2 + cos kπh). Check against (kπ)²
        // and that the error ratio under refinement is 4.
        for k in 1..=3 {
            let mut errs = Vec::new();
            for n in [20usize, 40, 80] {
                let mesh = unit(n);
                let sys = Fem1dSystem::new(mesh).unwrap();
                let v = FemFunction::interpolate(mesh, |x| (k as f64 * PI * x).sin());
                let av = sys.stiffness.mul_vec(&v.coeffs);
                let mut w = av.clone();
                sys.mass_factor.solve_in_place(&mut w);
                let lam = w[n / 4 - 1] / v.coeffs[n / 4 - 1];
                let exact = (k as f64 * PI).powi(2);
                errs.push((lam - exact).abs() / exact);
            }
            assert!(errs[0] < 0.05, "k={k} {errs:?}");
            let r = (errs[0] / errs[1]).log2();
            assert!((r - 2.0).abs() < 0.05, "k={k} rate={r}");
        }
    }

    #[test]
    fn thomas_identity_and_dense() {
        let t = TriDiag::toeplitz(5, 1.0, 0.0).unwrap();
        let rhs = [1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(thomas_solve(&t, &rhs).unwrap(), rhs.to_vec());

        // deterministic pseudo-random SPD tridiagonal
        let mut s = 12345u64;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let m = 50;
        let off: Vec<f64> = (0..m - 1).map(|_| rnd() - 0.5).collect();
        let main: Vec<f64> = (0..m).map(|_| 1.5 + rnd()).collect();
        let t = TriDiag::new(off.clone(), main, off).unwrap();
        let rhs: Vec<f64> = (0..m).map(|_| rnd() * 2.0 - 1.0).collect();
        let x = thomas_solve(&t, &rhs).unwrap();
        let d = dense_solve(&t, &rhs);
        for (a, b) in x.iter().zip(&d) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = t.mul_vec(&x);
        let rn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in r.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-12 * rn);
        }
    }

    #[test]
    fn thomas_round_trip_on_stiffness() {
        let mesh = Mesh1D::new(0.0, PI, 200).unwrap();
        let a = assemble_stiffness(&mesh).unwrap();
        let x0: Vec<f64> = mesh.interior_nodes().map(|x| x.sin() + 0.3 * (3.0 * x).cos()).collect();
        let rhs = a.mul_vec(&x0);
        let x = thomas_solve(&a, &rhs).unwrap();
        for (p, q) in x.iter().zip(&x0) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let t = TriDiag::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(thomas_solve(&t, &[1.0, 1.0]), Err(Error::ZeroPivot { row: 0 }));
        assert!(TriDiag::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn l2_projection_of_sin_is_second_order() {
        let zero = |_: f64| 0.0;
        let sys = Fem1dSystem::new(Mesh1D::new(0.0, PI, 16).unwrap()).unwrap();
        assert!(sys.l2_project(Datum::Smooth(&zero)).unwrap().coeffs.iter().all(|&c| c == 0.0));

        let sin = |x: f64| x.sin();
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let mesh = Mesh1D::new(0.0, PI, n).unwrap();
            let sys = Fem1dSystem::new(mesh).unwrap();
            let p = sys.l2_project(Datum::Smooth(&sin)).unwrap();
            let e = mesh
                .interior_nodes()
                .zip(&p.coeffs)
                .fold(0.0f64, |m, (x, c)| m.max((c - x.sin()).abs()));
            hs.push(mesh.h());
            errs.push(e);
        }
        let s = slope(&hs, &errs);
        assert!((s - 2.0).abs() < 0.1, "slope {s}");
    }

    #[test]
    fn indicator_load_matches_overlap_integrals() {
        // Hat φ_i overlap with (0, 1/2): 1 for nodes well inside, h/2 for the
        // node at 1/2 and zero to the right of it.
        let mesh = unit(10);
        let load = load_vector(&mesh, Datum::Indicator { lo: 0.0, hi: 0.5 }).unwrap();
        let h = 0.1;
        for (idx, b) in load.iter().enumerate() {
            let i = idx + 1;
            let expect = if i < 5 {
                h
            } else if i == 5 {
                h / 2.0
            } else {
                0.0
            };
            assert!((b - expect).abs() < 1e-15, "node {i}");
        }
        // a cut through a cell: (0, 0.33) on h = 0.1
        let load = load_vector(&mesh, Datum::Indicator { lo: 0.0, hi: 0.33 }).unwrap();
        // node 3 (x=0.3): left cell full (h/2) + ∫_{0.3}^{0.33} (0.4−x)/h dx
        let expect3 = 0.05 + (0.4 * 0.03 - 0.5 * (0.33f64.powi(2) - 0.09)) / h;
        assert!((load[2] - expect3).abs() < 1e-14);
        // node 4 (x=0.4): ∫_{0.3}^{0.33} (x−0.3)/h dx
        let expect4 = (0.5 * (0.33f64.powi(2) - 0.09) - 0.3 * 0.03) / h;
        assert!((load[3] - expect4).abs() < 1e-14);
    }

    #[test]
    fn ritz_projection_properties() {
        let neg_sin = |x: f64| -x.sin();
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for n in [8usize, 16, 32, 64] {
            let mesh = Mesh1D::new(0.0, PI, n).unwrap();
            let sys = Fem1dSystem::new(mesh).unwrap();
            let r = sys.ritz_project(&neg_sin).unwrap();
            let e = mesh
                .interior_nodes()
                .zip(&r.coeffs)
                .fold(0.0f64, |m, (x, c)| m.max((c - x.sin()).abs()));
            hs.push(mesh.h());
            errs.push(e);

            // defining equation
            let ar = sys.stiffness.mul_vec(&r.coeffs);
            let load = load_vector(&mesh, Datum::Smooth(&neg_sin)).unwrap();
            for (p, q) in ar.iter().zip(&load) {
                assert!((p + q).abs() < 1e-12);
            }
        }
        // In 1D the Ritz projection is nodally exact up to quadrature error,
        // so the nodal error sits far below h².
        assert!(errs.iter().zip(&hs).all(|(e, h)| *e < h * h));

        let zero = |_: f64| 0.0;
        let sys = Fem1dSystem::new(unit(8)).unwrap();
        assert!(sys.ritz_project(&zero).unwrap().coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn galerkin_orthogonality() {
        // (v − R_h v)' against each hat derivative, integrated cell by cell.
        let mesh = Mesh1D::new(0.0, PI, 12).unwrap();
        let sys = Fem1dSystem::new(mesh).unwrap();
        // v(x) = x(π − x)(1 + x)
        let dv = |x: f64| (PI - x) * (1.0 + x) - x * (1.0 + x) + x * (PI - x);
        let lap = |x: f64| -2.0 * (1.0 + x) + 2.0 * (PI - 2.0 * x);
        let r = sys.ritz_project(&lap).unwrap();
        let h = mesh.h();
        let nodal = |i: usize| if i == 0 || i == 12 { 0.0 } else { r.coeffs[i - 1] };
        for i in 1..12 {
            let mut s = 0.0;
            for (cell, sign) in [(i - 1, 1.0 / h), (i, -1.0 / h)] {
                let xl = mesh.node(cell);
                let slope_r = (nodal(cell + 1) - nodal(cell)) / h;
                let mid = xl + 0.5 * h;
                for (g, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                    let x = mid + 0.5 * h * g;
                    s += 0.5 * h * w * (dv(x) - slope_r) * sign;
                }
            }
            assert!(s.abs() < 1e-12, "node {i}: {s}");
        }
    }

    #[test]
    fn l2_norm_properties() {
        let mesh = Mesh1D::new(0.0, PI, 400).unwrap();
        assert_eq!(discrete_l2_norm(&mesh, &vec![0.0; 399]).unwrap(), 0.0);
        let s = FemFunction::interpolate(mesh, f64::sin);
        let n = discrete_l2_norm(&mesh, &s.coeffs).unwrap();
        assert!((n - (PI / 2.0).sqrt()).abs() < 1e-4);
        let doubled: Vec<f64> = s.coeffs.iter().map(|c| 2.0 * c).collect();
        assert!((discrete_l2_norm(&mesh, &doubled).unwrap() - 2.0 * n).abs() < 1e-14);
        assert!(discrete_l2_norm(&mesh, &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(coeffs in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let mesh = unit(10);
            let sys = Fem1dSystem::new(mesh).unwrap();
            let f = FemFunction::new(mesh, coeffs.clone()).unwrap();
            let eval = move |x: f64| f.eval(x);
            let p = sys.l2_project(Datum::Smooth(&eval)).unwrap();
            for (a, b) in p.coeffs.iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
