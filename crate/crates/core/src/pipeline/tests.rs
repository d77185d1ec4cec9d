use super::*;
use crate::coeff::{FamilyKind, Mode};
use crate::fem::{FemSpace, ProblemConfig};
use crate::mesh::Mesh;
use crate::richardson::assemble_reduced;
use crate::coeff::CoefficientField as C;

fn problem(n: usize) -> Arc<Problem> {
    let space = Arc::new(FemSpace::new(Arc::new(Mesh::unit_square(n).unwrap()), 1).unwrap());
    let cfg = ProblemConfig::with_unit_nominal(1.0, 0.5, C::Constant(1.0)).unwrap();
    Arc::new(Problem::normalized(space, cfg).unwrap())
}

fn family() -> DataFamily {
    DataFamily::new(
        FamilyKind::Parametric {
            modes: vec![
                Mode::SinSin { kx: 1.0, ky: 1.0 },
                Mode::CosCos { kx: 1.0, ky: 0.0 },
                Mode::CosCos { kx: 0.0, ky: 2.0 },
                Mode::SinCos { kx: 2.0, ky: 1.0 },
            ],
            amplitude: 0.9,
        },
        1.0,
        0.5,
    )
    .unwrap()
}

fn encoder(n: usize) -> Arc<Encoder> {
    Arc::new(Encoder::nodal_on_mesh(Arc::new(Mesh::unit_square(n).unwrap()), 1).unwrap())
}

fn settings(n: usize, epsilon: f64) -> BuildSettings {
    BuildSettings {
        training_count: 24,
        n,
        gamma: 1.0,
        epsilon,
        seed: 11,
        grid_n: 24,
    }
}

fn operator(n: usize, epsilon: f64) -> NeuralOperator {
    build_operator(problem(8), &family(), &Polygon::unit_square(), encoder(4), &settings(n, epsilon))
        .unwrap()
        .0
}

#[test]
fn nominal_family_reproduces_psi0() {
    let nominal = DataFamily::new(FamilyKind::Nominal, 1.0, 0.5).unwrap();
    let p = problem(6);
    let (op, trace) =
        build_operator(p.clone(), &nominal, &Polygon::unit_square(), encoder(3), &settings(0, 1e-2)).unwrap();
    assert_eq!(trace.steps.len(), 1);
    let u = op.evaluate(&C::Constant(1.0)).unwrap();
    let psi0 = op.basis().psi_vector(0);
    assert!(p.energy_norm(&(u - psi0)) <= 1e-2);
}

#[test]
fn certificates_and_widths() {
    let op = operator(4, 1e-2);
    let c = op.certificates();
    assert_eq!(c.n, 4);
    assert_eq!(c.m, 25);
    assert_eq!(op.approximator().input_dim(), c.m);
    assert_eq!(op.approximator().output_dim(), c.n + 1);
    assert_eq!(c.net.depth, op.approximator().depth());
    assert_eq!(c.net.size, op.approximator().size());
    assert!(c.beta_tilde >= 0.5 && c.beta_tilde < 1.0);
    assert_eq!(c.selection.len(), 5);
}

#[test]
fn phi_input_matches_reduced_assembly() {
    let op = operator(3, 1e-1);
    let phi = op.phi_input().unwrap();
    let m = op.encoder().m();
    assert!(phi.size() <= 16 * m + 16);
    let zero = phi.realize(&vec![0.0; m]).unwrap();
    assert_eq!(crate::relu_net::unvec(&zero, 4), DMatrix::identity(4, 4));
    let fields = sample_family(&family(), &Polygon::unit_square(), 5, 3, 16).unwrap();
    for a in &fields {
        let y = op.encoder().encode(a).unwrap();
        let recon = op.encoder().reconstruct(&y).unwrap();
        let direct = assemble_reduced(op.problem(), op.basis().ortho(), &recon).unwrap();
        let net = crate::relu_net::unvec(&phi.realize(&y).unwrap(), 4);
        assert!((net - direct.a_v).amax() < 1e-12);
    }
    let y = op.encoder().encode(&C::Constant(1.0)).unwrap();
    assert!(phi.realize(&y).unwrap().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn decomposition_is_consistent() {
    let op = operator(5, 1e-2);
    let test = sample_family(&family(), &Polygon::unit_square(), 12, 99, 16).unwrap();
    let report = op.error_decomposition(&test).unwrap();
    assert!(report.triangle_gap() <= 1e-8);
    assert!(report.violations().is_empty());
    for r in &report.rows {
        assert!(r.decoder < 1e-12);
        assert!(r.rb_best <= r.rb + 1e-12);
        assert!(r.total <= r.rb + r.encoder + op.epsilon() + 1e-8);
    }
    let csv = report.table().to_string_with_hash(None);
    assert_eq!(csv.lines().count(), 2 + test.len());
}

#[test]
fn evaluate_is_the_three_stage_pipeline() {
    let op = operator(3, 1e-2);
    let a = sample_family(&family(), &Polygon::unit_square(), 1, 5, 16).unwrap().remove(0);
    let y = op.encoder().encode(&a).unwrap();
    let c = DVector::from_vec(op.approximator().realize(&y).unwrap());
    let manual = op.basis().synthesize_ortho(&c).unwrap();
    assert_eq!(op.evaluate(&a).unwrap(), manual);
}

#[test]
fn same_seed_same_operator() {
    let a = operator(3, 1e-1);
    let b = operator(3, 1e-1);
    assert_eq!(a.approximator().to_json().unwrap(), b.approximator().to_json().unwrap());
    assert_eq!(a.certificates(), b.certificates());
}

#[test]
fn envelope_violation_aborts() {
    let p = problem(4);
    let snaps = SnapshotSet::from_fields(&p, vec![C::Constant(1.0)]).unwrap();
    let (basis, _) = weak_greedy(&p, &snaps, 1, 1.0).unwrap();
    match NeuralOperator::assemble(p, basis, encoder(2), &[C::Constant(2.0)], 1e-2) {
        Err(Error::Envelope { beta_tilde, .. }) => assert!(beta_tilde >= 1.0),
        other => panic!("expected an envelope error, got {other:?}"),
    }
}

#[test]
fn nonsmooth_is_even_and_extends_the_base() {
    let a_min = 0.7;
    let raw: Vec<C> = (0..16)
        .map(|i| {
            let s = 0.55 * ((i as f64) / 8.0 - 1.0);
            C::from_fn("tilt", move |x| s * (x[0] - 0.5) + 0.05 * (3.0 * x[1]).sin())
        })
        .collect();
    let shifted: Vec<C> = raw.iter().map(|a| abs_shift(a, a_min)).collect();
    let base = build_from_fields(problem(6), shifted, encoder(4), &settings(4, 1e-2)).unwrap().0;
    let op = base.nonsmooth(a_min).unwrap();
    let a = &raw[3];
    let neg = a.scaled(-1.0);
    assert_eq!(op.evaluate(a).unwrap(), op.evaluate(&neg).unwrap());
    let pos = C::from_fn("pos", |x| 0.2 * x[0] * x[1]);
    let via_abs = op.evaluate(&pos).unwrap();
    let via_base = base.evaluate(&abs_shift(&pos, a_min)).unwrap();
    assert!((via_abs - via_base).amax() < 1e-12);
    let report = op.error_decomposition(&raw[..4]).unwrap();
    assert!(report.triangle_gap() <= 1e-8);
    assert!(report.violations().is_empty());
}

#[test]
fn bundle_round_trip() {
    let op = operator(3, 1e-1);
    let dir = tempfile::tempdir().unwrap();
    op.write_bundle(dir.path()).unwrap();
    let back = NeuralOperator::read_bundle(dir.path(), op.problem().clone()).unwrap();
    let a = sample_family(&family(), &Polygon::unit_square(), 1, 8, 16).unwrap().remove(0);
    assert_eq!(back.evaluate(&a).unwrap(), op.evaluate(&a).unwrap());
    assert_eq!(back.certificates(), op.certificates());
    assert!(NeuralOperator::read_bundle(dir.path(), problem(5)).is_err());
}
