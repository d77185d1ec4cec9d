//! The neural operator `a -> Psi . Realize(Phi_app)(E(a))`: construction,
//! evaluation, error decomposition, the nonsmooth extension and bundle IO.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{abs_shift, sample_family, CoefficientField, DataFamily};
use crate::encoder::Encoder;
use crate::fem::{FemVector, Problem};
use crate::mesh::{read_mesh, write_mesh, Polygon};
use crate::reduced_basis::{weak_greedy, GreedyTrace, ReducedBasis, SnapshotSet};
use crate::relu_net::{abs_shift_net, build_phi_app, build_phi_input, sparse_concat, NetBuildReport, NeuralNet};
use crate::richardson::{ReducedOperator, ReducedSystem};
use crate::table::{num, Table};
use crate::{Error, Result};

/// Training and accuracy parameters of [`build_operator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSettings {
    pub training_count: usize,
    /// Target `N`; the basis has at most `N + 1` vectors.
    pub n: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Lattice resolution of the membership check.
    #[serde(default = "default_grid")]
    pub grid_n: usize,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_grid() -> usize {
    64
}

/// Everything the accuracy guarantee depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub net: NetBuildReport,
    /// Basis size is `n + 1`.
    pub n: usize,
    pub m: usize,
    /// `max(beta, envelope of the encoded training data)`.
    pub beta_tilde: f64,
    pub a_min: Option<f64>,
    pub selection: Vec<Option<usize>>,
}

/// Nonzero reconstruction basis values at every FEM quadrature point.
type QuadratureBasis = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
pub struct NeuralOperator {
    problem: Arc<Problem>,
    encoder: Arc<Encoder>,
    basis: ReducedBasis,
    reduced: ReducedOperator,
    xi: Arc<QuadratureBasis>,
    approximator: NeuralNet,
    certificates: Certificates,
}

fn quadrature_basis(problem: &Problem, encoder: &Encoder) -> Result<QuadratureBasis> {
    problem
        .space()
        .quadrature_points()
        .par_iter()
        .map(|&x| encoder.basis_values(x))
        .collect()
}

fn reconstruction_samples(xi: &QuadratureBasis, y: &[f64]) -> Vec<f64> {
    xi.iter()
        .map(|row| row.iter().map(|&(k, v)| y[k] * v).sum())
        .collect()
}

/// `(alpha B_a0)^-1 D_k` with `D_k = Q^T K(xi_k) Q`, assembled with the FEM quadrature.
fn input_tensor(problem: &Problem, reduced: &ReducedOperator, xi: &QuadratureBasis, m: usize) -> Vec<DMatrix<f64>> {
    let mut by_channel: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (q, row) in xi.iter().enumerate() {
        for &(k, v) in row {
            by_channel[k].push((q, v));
        }
    }
    let nq = xi.len();
    let q_mat = reduced.basis();
    by_channel
        .par_iter()
        .map(|entries| {
            let mut samples = vec![0.0; nq];
            for &(q, v) in entries {
                samples[q] = v;
            }
            let k = problem.space().assemble_stiffness_sampled(&samples);
            let d = q_mat.tr_mul(&k.mul_dense(q_mat));
            reduced.solve_nominal(&(0.5 * (&d + d.transpose())))
        })
        .collect()
}

/// Snapshots, weak greedy and network construction for samples of `family`.
pub fn build_operator(
    problem: Arc<Problem>,
    family: &DataFamily,
    domain: &Polygon,
    encoder: Arc<Encoder>,
    settings: &BuildSettings,
) -> Result<(NeuralOperator, GreedyTrace)> {
    let fields = sample_family(family, domain, settings.training_count, settings.seed, settings.grid_n)?;
    build_from_fields(problem, fields, encoder, settings)
}

/// As [`build_operator`] with explicit training coefficients.
pub fn build_from_fields(
    problem: Arc<Problem>,
    fields: Vec<CoefficientField>,
    encoder: Arc<Encoder>,
    settings: &BuildSettings,
) -> Result<(NeuralOperator, GreedyTrace)> {
    if settings.n > fields.len() {
        return Err(Error::InvalidInput(format!(
            "N = {} exceeds the {} training snapshots",
            settings.n,
            fields.len()
        )));
    }
    let snapshots = SnapshotSet::from_fields(&problem, fields)?;
    let (basis, trace) = weak_greedy(&problem, &snapshots, settings.n, settings.gamma)?;
    let op = NeuralOperator::assemble(problem, basis, encoder, &snapshots.coefficients, settings.epsilon)?;
    Ok((op, trace))
}

impl NeuralOperator {
    /// Builds `Phi_app` for a given basis; `training` fixes the envelope `beta_tilde`.
    pub fn assemble(
        problem: Arc<Problem>,
        basis: ReducedBasis,
        encoder: Arc<Encoder>,
        training: &[CoefficientField],
        epsilon: f64,
    ) -> Result<Self> {
        let reduced = ReducedOperator::new(&problem, basis.ortho())?;
        let mut e1 = DVector::zeros(basis.size());
        e1[0] = 1.0;
        let drift = (reduced.g() - &e1).amax();
        if drift > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "reduced source is not e1 (off by {drift:e}); build the problem with Problem::normalized"
            )));
        }
        let xi = quadrature_basis(&problem, &encoder)?;
        let alpha = problem.alpha();
        let mut beta_tilde = problem.beta();
        for a in training {
            beta_tilde = beta_tilde.max(envelope(&xi, &encoder.encode(a)?, alpha));
        }
        if beta_tilde >= alpha {
            return Err(Error::Envelope { alpha, beta_tilde });
        }
        let e = input_tensor(&problem, &reduced, &xi, encoder.m());
        let phi_input = build_phi_input(&e)?;
        let f_dual = problem.dual_norm_of_load()?;
        let (approximator, report) = build_phi_app(&phi_input, alpha, beta_tilde, f_dual, epsilon)?;
        let certificates = Certificates {
            net: report,
            n: basis.n(),
            m: encoder.m(),
            beta_tilde,
            a_min: None,
            selection: basis.selection().to_vec(),
        };
        Ok(Self {
            problem,
            encoder,
            basis,
            reduced,
            xi: Arc::new(xi),
            approximator,
            certificates,
        })
    }

    pub fn problem(&self) -> &Arc<Problem> {
        &self.problem
    }

    pub fn encoder(&self) -> &Arc<Encoder> {
        &self.encoder
    }

    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    pub fn reduced(&self) -> &ReducedOperator {
        &self.reduced
    }

    pub fn approximator(&self) -> &NeuralNet {
        &self.approximator
    }

    pub fn certificates(&self) -> &Certificates {
        &self.certificates
    }

    pub fn epsilon(&self) -> f64 {
        self.certificates.net.epsilon
    }

    /// The `Phi_input` layer alone, rebuilt from the stored basis and encoder.
    pub fn phi_input(&self) -> Result<NeuralNet> {
        build_phi_input(&input_tensor(&self.problem, &self.reduced, &self.xi, self.encoder.m()))
    }

    /// The coefficient the operator actually targets for input `a`.
    pub fn effective_coefficient(&self, a: &CoefficientField) -> CoefficientField {
        match self.certificates.a_min {
            Some(a_min) => abs_shift(a, a_min),
            None => a.clone(),
        }
    }

    /// Encoded input of the base approximator.
    fn effective_encoding(&self, y: &[f64]) -> Vec<f64> {
        match self.certificates.a_min {
            Some(a_min) => y.iter().map(|v| a_min + v.abs()).collect(),
            None => y.to_vec(),
        }
    }

    /// Reduced coordinates `Realize(Phi_app)(y)` in the orthonormal basis.
    pub fn approximate(&self, y: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.approximator.realize(y)?))
    }

    pub fn evaluate_encoded(&self, y: &[f64]) -> Result<FemVector> {
        self.basis.synthesize_ortho(&self.approximate(y)?)
    }

    pub fn evaluate(&self, a: &CoefficientField) -> Result<FemVector> {
        self.evaluate_encoded(&self.encoder.encode(a)?)
    }

    /// Reduced system of the reconstruction `y . Xi`.
    pub fn encoded_system(&self, y: &[f64]) -> ReducedSystem {
        let samples = reconstruction_samples(&self.xi, &self.effective_encoding(y));
        self.reduced.system_sampled(&self.problem, &samples)
    }

    /// `S^{Y_N}(y . Xi)` by a dense reduced solve.
    pub fn reduced_solve_encoded(&self, y: &[f64]) -> Result<FemVector> {
        let c = self.encoded_system(y).direct_solve()?;
        self.basis.synthesize_ortho(&c)
    }

    /// `S^{Y_N}(a)` by a dense reduced solve.
    pub fn reduced_solve(&self, a: &CoefficientField) -> Result<FemVector> {
        let c = self
            .reduced
            .system(&self.problem, &self.effective_coefficient(a))?
            .direct_solve()?;
        self.basis.synthesize_ortho(&c)
    }

    /// Envelope of the reconstruction of `y` at the FEM quadrature points.
    pub fn envelope_of(&self, y: &[f64]) -> f64 {
        envelope(&self.xi, &self.effective_encoding(y), self.problem.alpha())
    }

    /// `a -> S(a_min + |a|)`: prepends `y -> a_min + |y|` to the approximator.
    /// The base operator must have been built for shifted coefficients.
    pub fn nonsmooth(&self, a_min: f64) -> Result<Self> {
        if self.certificates.a_min.is_some() {
            return Err(Error::InvalidInput("operator is already nonsmooth".into()));
        }
        if !(a_min > 0.0) {
            return Err(Error::InvalidInput(format!("a_min must be positive, got {a_min}")));
        }
        let abs = abs_shift_net(self.encoder.m(), a_min)?;
        let approximator = sparse_concat(&self.approximator, &abs)?;
        let mut certificates = self.certificates.clone();
        certificates.net.depth = approximator.depth();
        certificates.net.size = approximator.size();
        certificates.net.parts.push(("abs".into(), abs.size()));
        certificates.a_min = Some(a_min);
        Ok(Self {
            approximator,
            certificates,
            ..self.clone()
        })
    }

    /// Splits the error against the fine Galerkin solution into its parts.
    pub fn error_decomposition(&self, test: &[CoefficientField]) -> Result<ErrorReport> {
        let rows = test
            .par_iter()
            .enumerate()
            .map(|(index, a)| self.error_row(index, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(ErrorReport {
            epsilon: self.epsilon(),
            beta_tilde: self.certificates.beta_tilde,
            rows,
        })
    }

    fn error_row(&self, index: usize, a: &CoefficientField) -> Result<ErrorRow> {
        let p = &self.problem;
        let eff = self.effective_coefficient(a);
        let u_h = p.galerkin_solve(&eff)?;
        let u_n = self.reduced_solve(a)?;
        let y = self.encoder.encode(a)?;
        let u_ne = self.reduced_solve_encoded(&y)?;
        let c = self.approximate(&y)?;
        let u_g = self.basis.synthesize_ortho(&c)?;
        let decoder = (self.basis.analyze_ortho(&u_g) - &c).norm();
        let best = self.basis.projection_residual(&u_h, self.basis.n());
        let envelope = self.envelope_of(&y);
        Ok(ErrorRow {
            index,
            total: p.energy_norm(&(&u_h - &u_g)),
            rb: p.energy_norm(&(&u_h - &u_n)),
            rb_best: best,
            encoder: p.energy_norm(&(&u_n - &u_ne)),
            network: p.energy_norm(&(&u_ne - &u_g)),
            decoder,
            envelope,
            certified: envelope <= self.certificates.beta_tilde,
        })
    }

    /// Writes `mesh.txt`, `psi.csv`, `ortho.csv`, `encoder.json`, `net.json`
    /// and `certificates.json` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_mesh(self.problem.space().mesh(), BufWriter::new(File::create(dir.join("mesh.txt"))?))?;
        ReducedBasis::write_matrix_csv(self.basis.psi(), BufWriter::new(File::create(dir.join("psi.csv"))?))?;
        ReducedBasis::write_matrix_csv(self.basis.ortho(), BufWriter::new(File::create(dir.join("ortho.csv"))?))?;
        fs::write(dir.join("encoder.json"), self.encoder.to_json()?)?;
        self.approximator
            .write_json(BufWriter::new(File::create(dir.join("net.json"))?))?;
        fs::write(
            dir.join("certificates.json"),
            serde_json::to_string_pretty(&self.certificates)?,
        )?;
        Ok(())
    }

    /// Loads a bundle written by [`NeuralOperator::write_bundle`] for `problem`.
    pub fn read_bundle(dir: &Path, problem: Arc<Problem>) -> Result<Self> {
        let mesh = read_mesh(BufReader::new(File::open(dir.join("mesh.txt"))?))?;
        let own = problem.space().mesh();
        if mesh.nodes() != own.nodes() || mesh.triangles() != own.triangles() {
            return Err(Error::InvalidInput("bundle mesh differs from the problem mesh".into()));
        }
        let certificates: Certificates =
            serde_json::from_str(&fs::read_to_string(dir.join("certificates.json"))?)?;
        let psi = ReducedBasis::read_matrix_csv(&fs::read_to_string(dir.join("psi.csv"))?)?;
        let ortho = ReducedBasis::read_matrix_csv(&fs::read_to_string(dir.join("ortho.csv"))?)?;
        let basis = ReducedBasis::from_psi(&problem, &psi, certificates.selection.clone())?;
        if ortho.shape() != basis.ortho().shape() || (&ortho - basis.ortho()).amax() > 1e-12 {
            return Err(Error::Parse("stored orthonormal basis does not match psi".into()));
        }
        let encoder = Arc::new(Encoder::from_json(&fs::read_to_string(dir.join("encoder.json"))?)?);
        let approximator = NeuralNet::read_json(BufReader::new(File::open(dir.join("net.json"))?))?;
        if approximator.input_dim() != encoder.m() || approximator.output_dim() != basis.size() {
            return Err(Error::DimensionMismatch {
                expected: basis.size(),
                found: approximator.output_dim(),
            });
        }
        let reduced = ReducedOperator::new(&problem, basis.ortho())?;
        let xi = quadrature_basis(&problem, &encoder)?;
        Ok(Self {
            problem,
            encoder,
            basis,
            reduced,
            xi: Arc::new(xi),
            approximator,
            certificates,
        })
    }
}

fn envelope(xi: &QuadratureBasis, y: &[f64], alpha: f64) -> f64 {
    reconstruction_samples(xi, y)
        .into_iter()
        .fold(0.0, |m, v| m.max((v - alpha).abs()))
}

/// Energy-norm errors for one test coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub index: usize,
    /// `||S^{Y_h}(a) - G(a)||`.
    pub total: f64,
    /// (I): `||S^{Y_h}(a) - S^{Y_N}(a)||`.
    pub rb: f64,
    /// Best approximation of `S^{Y_h}(a)` from the basis span.
    pub rb_best: f64,
    /// (II): `||S^{Y_N}(a) - S^{Y_N}(E(a) . Xi)||`.
    pub encoder: f64,
    /// (III): `||S^{Y_N}(E(a) . Xi) - G(a)||`.
    pub network: f64,
    /// (IV): decoder defect, zero for exact synthesis.
    pub decoder: f64,
    pub envelope: f64,
    /// Whether the encoded input lies in the certified envelope.
    pub certified: bool,
}

impl ErrorRow {
    pub fn bound(&self) -> f64 {
        self.rb + self.encoder + self.network + self.decoder
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub beta_tilde: f64,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Largest `total - bound`; at most rounding for every report.
    pub fn triangle_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.total - r.bound())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Certified rows whose network term exceeds `epsilon`.
    pub fn violations(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.certified && r.network > self.epsilon)
            .map(|r| r.index)
            .collect()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "index", "total", "term_i", "term_i_best", "term_ii", "term_iii", "term_iv", "bound", "envelope",
            "certified",
        ]);
        for r in &self.rows {
            t.push(vec![
                r.index.to_string(),
                num(r.total),
                num(r.rb),
                num(r.rb_best),
                num(r.encoder),
                num(r.network),
                num(r.decoder),
                num(r.bound()),
                num(r.envelope),
                r.certified.to_string(),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests;
