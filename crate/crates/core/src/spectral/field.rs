use std::io::Write;
use std::sync::Arc;

use super::{EigenBasis, SpectralError};
use crate::kernels::dot;

/// A function on the domain held by its eigen-coefficients `ξₙ = (ξ, φₙ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    basis: Arc<EigenBasis>,
    coeffs: Vec<f64>,
}

pub(crate) fn same_basis(a: &Arc<EigenBasis>, b: &Arc<EigenBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Field {
    pub fn new(basis: Arc<EigenBasis>, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != basis.len() {
            return Err(SpectralError::BasisMismatch);
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<EigenBasis>) -> Self {
        let n = basis.len();
        Self { basis, coeffs: vec![0.0; n] }
    }

    /// `φ_k` itself.
    pub fn mode(basis: Arc<EigenBasis>, k: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[k] = 1.0;
        f
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `L²` norm, which is the Euclidean norm of the coefficients by Parseval.
    pub fn norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|x| c * x).collect() }
    }

    pub fn add(&self, other: &Field) -> Result<Self, SpectralError> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(SpectralError::BasisMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { basis: self.basis.clone(), coeffs })
    }

    /// Pointwise value `Σ cₙ φₙ(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, SpectralError> {
        if !self.basis.domain().contains(x) {
            return Err(SpectralError::OutsideDomain(x.to_vec()));
        }
        Ok(self.coeffs.iter().enumerate().map(|(k, c)| c * self.basis.phi(k, x)).sum())
    }
}

/// One [`Field`] per time node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    basis: Arc<EigenBasis>,
    data: Vec<f64>,
}

impl FieldSeries {
    pub fn zeros(basis: Arc<EigenBasis>, nodes: usize) -> Self {
        let n = basis.len();
        Self { basis, data: vec![0.0; n * nodes] }
    }

    /// `data[i·N + k]` is coefficient `k` at node `i`.
    pub fn from_flat(basis: Arc<EigenBasis>, data: Vec<f64>) -> Result<Self, SpectralError> {
        if !data.len().is_multiple_of(basis.len()) {
            return Err(SpectralError::BasisMismatch);
        }
        Ok(Self { basis, data })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    /// Number of time nodes.
    pub fn len(&self) -> usize {
        self.data.len() / self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let n = self.modes();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.modes();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn field(&self, i: usize) -> Field {
        Field { basis: self.basis.clone(), coeffs: self.node(i).to_vec() }
    }

    pub fn set_field(&mut self, i: usize, f: &Field) -> Result<(), SpectralError> {
        if !same_basis(&self.basis, &f.basis) {
            return Err(SpectralError::BasisMismatch);
        }
        self.node_mut(i).copy_from_slice(&f.coeffs);
        Ok(())
    }

    /// Coefficient `k` over time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.data.iter().skip(k).step_by(self.modes()).copied().collect()
    }

    pub fn set_column(&mut self, k: usize, values: &[f64]) {
        let n = self.modes();
        for (i, v) in values.iter().enumerate() {
            self.data[i * n + k] = *v;
        }
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `‖u(tᵢ)‖` per node.
    pub fn norms(&self) -> Vec<f64> {
        self.data.chunks(self.modes()).map(|c| dot(c, c).sqrt()).collect()
    }
}

/// Tensor trapezoid mesh with `cells` intervals per axis, boundary nodes included.
///
/// The trapezoid rule on `M` cells integrates `sin(aπx/L)·sin(bπx/L)` exactly for
/// `a + b < 2M`, so projection is exact for modes up to index `M − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    axes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl Mesh {
    pub fn uniform(domain: super::Domain, cells: usize) -> Result<Self, SpectralError> {
        domain.validate()?;
        if cells < 2 {
            return Err(SpectralError::InvalidDomain(format!("mesh needs at least 2 cells, got {cells}")));
        }
        let mut axes = Vec::new();
        let mut weights = Vec::new();
        for l in domain.extents() {
            let h = l / cells as f64;
            axes.push((0..=cells).map(|i| i as f64 * h).collect());
            let mut w = vec![h; cells + 1];
            w[0] = 0.5 * h;
            w[cells] = 0.5 * h;
            weights.push(w);
        }
        Ok(Self { axes, weights })
    }

    /// Eight points per shortest wavelength of the basis, at least 16 cells.
    pub fn for_basis(basis: &EigenBasis) -> Self {
        Self::uniform(basis.domain(), (4 * basis.max_index()).max(16)).expect("basis domain is valid")
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cells(&self) -> usize {
        self.axes[0].len() - 1
    }

    /// Number of points, row-major with the first axis outermost.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match self.dim() {
            1 => self.axes[0].iter().map(|&x| vec![x]).collect(),
            _ => self.axes[0]
                .iter()
                .flat_map(|&x| self.axes[1].iter().map(move |&y| vec![x, y]))
                .collect(),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self.dim() {
            1 => self.weights[0].clone(),
            _ => self.weights[0]
                .iter()
                .flat_map(|&a| self.weights[1].iter().map(move |&b| a * b))
                .collect(),
        }
    }

    /// Quadrature of `Σ w f²`.
    pub fn l2_norm_sq(&self, values: &[f64]) -> f64 {
        self.weights().iter().zip(values).map(|(w, f)| w * f * f).sum()
    }
}

/// Cached `φₖ` samples on a mesh; reuse it when projecting many snapshots.
#[derive(Debug, Clone)]
pub struct Transform {
    basis: Arc<EigenBasis>,
    weights: Vec<f64>,
    /// `table[k·P + p] = φₖ(point p)`.
    table: Vec<f64>,
    points: usize,
    resolved: bool,
}

impl Transform {
    pub fn new(basis: Arc<EigenBasis>, mesh: &Mesh) -> Result<Self, SpectralError> {
        if mesh.dim() != basis.domain().dim() {
            return Err(SpectralError::InvalidDomain("mesh and basis dimensions differ".into()));
        }
        let pts = mesh.points();
        let mut table = Vec::with_capacity(pts.len() * basis.len());
        for k in 0..basis.len() {
            table.extend(pts.iter().map(|p| basis.phi(k, p)));
        }
        let resolved = mesh.cells() >= 2 * basis.max_index();
        Ok(Self { basis, weights: mesh.weights(), table, points: pts.len(), resolved })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    /// At least four mesh points per shortest wavelength.
    pub fn is_resolved(&self) -> bool {
        self.resolved
    }

    pub fn project(&self, values: &[f64]) -> Result<Field, SpectralError> {
        if values.len() != self.points {
            return Err(SpectralError::GridMismatch(format!(
                "{} samples for a mesh of {} points",
                values.len(),
                self.points
            )));
        }
        let wf: Vec<f64> = self.weights.iter().zip(values).map(|(w, f)| w * f).collect();
        let coeffs = self.table.chunks(self.points).map(|phi| dot(phi, &wf)).collect();
        let field = Field { basis: self.basis.clone(), coeffs };
        if !self.resolved {
            let total: f64 = wf.iter().zip(values).map(|(a, f)| a * f).sum();
            let aliased = (total - field.norm().powi(2)).max(0.0).sqrt();
            log::warn!(
                "mesh under-resolves mode {}: unrepresented L2 mass ≈ {aliased:.3e}",
                self.basis.max_index()
            );
        }
        Ok(field)
    }

    pub fn synthesize(&self, field: &Field) -> Result<Vec<f64>, SpectralError> {
        if !same_basis(&self.basis, &field.basis) {
            return Err(SpectralError::BasisMismatch);
        }
        let mut out = vec![0.0; self.points];
        for (phi, c) in self.table.chunks(self.points).zip(&field.coeffs) {
            if *c != 0.0 {
                for (o, p) in out.iter_mut().zip(phi) {
                    *o += c * p;
                }
            }
        }
        Ok(out)
    }
}

/// Coefficients of mesh samples by trapezoid quadrature against each `φₖ`.
pub fn project(values: &[f64], mesh: &Mesh, basis: Arc<EigenBasis>) -> Result<Field, SpectralError> {
    Transform::new(basis, mesh)?.project(values)
}

/// `Σ cₖ φₖ` at the mesh points.
pub fn synthesize(field: &Field, mesh: &Mesh) -> Result<Vec<f64>, SpectralError> {
    Transform::new(field.basis.clone(), mesh)?.synthesize(field)
}

/// Snapshot CSV with header `x,u` (interval) or `x,y,u` (rectangle).
pub fn write_field_csv<W: Write>(field: &Field, mesh: &Mesh, mut out: W) -> Result<(), SpectralError> {
    let values = synthesize(field, mesh)?;
    match mesh.dim() {
        1 => writeln!(out, "x,u")?,
        _ => writeln!(out, "x,y,u")?,
    }
    for (p, v) in mesh.points().iter().zip(values) {
        let coords: Vec<String> = p.iter().map(|c| format!("{c:e}")).collect();
        writeln!(out, "{},{v:e}", coords.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::Domain;

    fn line(n: usize) -> Arc<EigenBasis> {
        Arc::new(EigenBasis::new(Domain::Interval { length: PI }, n).unwrap())
    }

    #[test]
    fn projecting_a_mode_recovers_unit_coefficient() {
        let b = line(8);
        let mesh = Mesh::uniform(b.domain(), 256).unwrap();
        let values: Vec<f64> = mesh.points().iter().map(|p| b.phi(1, p)).collect();
        let f = project(&values, &mesh, b).unwrap();
        for (k, c) in f.coeffs().iter().enumerate() {
            let e = if k == 1 { 1.0 } else { 0.0 };
            assert!((c - e).abs() < 1e-8, "k={k}: {c}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let b = line(5);
        let mesh = Mesh::for_basis(&b);
        let f = project(&vec![0.0; mesh.len()], &mesh, b.clone()).unwrap();
        assert!(f.coeffs().iter().all(|&c| c == 0.0));
        assert!(synthesize(&Field::zeros(b), &mesh).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesize_first_mode_at_midpoint() {
        let b = line(3);
        let f = Field::mode(b, 0);
        assert!((f.evaluate(&[PI / 2.0]).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!(matches!(f.evaluate(&[4.0]), Err(SpectralError::OutsideDomain(_))));
    }

    #[test]
    fn parseval_on_mesh() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Arc::new(EigenBasis::new(Domain::Rectangle { lx: 1.0, ly: 2.0 }, 12).unwrap());
        let coeffs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = Field::new(b.clone(), coeffs).unwrap();
        let mesh = Mesh::for_basis(&b);
        let values = synthesize(&f, &mesh).unwrap();
        assert!((mesh.l2_norm_sq(&values) - f.norm().powi(2)).abs() < 1e-6);
    }

    #[test]
    fn series_columns_and_norms() {
        let b = line(3);
        let mut s = FieldSeries::zeros(b.clone(), 4);
        s.set_column(1, &[1.0, 2.0, 3.0, 4.0]);
        s.node_mut(2)[0] = 4.0;
        assert_eq!(s.column(1), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.norms()[2], 5.0);
        assert_eq!(s.field(3).coeffs(), &[0.0, 4.0, 0.0]);
    }

    #[test]
    fn basis_mismatch_is_detected() {
        let a = Field::zeros(line(3));
        let b = Field::zeros(line(4));
        assert!(matches!(a.add(&b), Err(SpectralError::BasisMismatch)));
    }

    #[test]
    fn csv_snapshot_has_header_and_rows() {
        let b = line(2);
        let mesh = Mesh::uniform(b.domain(), 4).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&Field::mode(b, 0), &mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,u\n"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn project_inverts_synthesize(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 1..24),
            rect in any::<bool>(),
        ) {
            let n = coeffs.len();
            let domain = if rect { Domain::Rectangle { lx: 1.3, ly: 0.7 } } else { Domain::Interval { length: 2.0 } };
            let b = Arc::new(EigenBasis::new(domain, n).unwrap());
            let f = Field::new(b.clone(), coeffs).unwrap();
            let t = Transform::new(b, &Mesh::for_basis(&f.basis)).unwrap();
            let back = t.project(&t.synthesize(&f).unwrap()).unwrap();
            for (a, c) in back.coeffs().iter().zip(f.coeffs()) {
                prop_assert!((a - c).abs() < 1e-8);
            }
        }
    }
}
