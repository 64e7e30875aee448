use bie_core::assembly::{navier_residual, ProblemKind};
use bie_core::boundary::BoundaryCurve;
use bie_core::datagen::*;
use bie_core::trigseries::CoeffVec;

fn small_boundary_set(count: usize) -> Vec<BoundaryCurve> {
    generate_boundaries(count, 8, &RHO_GRID, 10.0, 17).unwrap().0
}

#[test]
fn boundary_sets_are_deterministic_and_balanced() {
    let (a, stats) = generate_boundaries(12, 8, &RHO_GRID, 10.0, 3).unwrap();
    let (b, _) = generate_boundaries(12, 8, &RHO_GRID, 10.0, 3).unwrap();
    assert_eq!(a.len(), 12);
    assert_eq!(
        a.iter().map(|c| c.to_gamma_vec()).collect::<Vec<_>>(),
        b.iter().map(|c| c.to_gamma_vec()).collect::<Vec<_>>()
    );
    assert_eq!(stats.accepted, 12);
    assert_eq!(
        stats.attempts,
        12 + stats.rejected_curvature + stats.rejected_degenerate + stats.rejected_not_simple
    );
    assert!(stats.max_curvatures.iter().all(|&k| k <= 10.0));
    assert_eq!(stats.curvature_histogram(10.0).iter().sum::<usize>(), 12);
}

#[test]
fn impossible_curvature_cap_aborts() {
    // A closed curve of length L has max |κ| ≥ 2π/L, so a tiny cap rejects all draws.
    assert!(generate_boundaries(1, 4, &[0.6], 1e-3, 0).is_err());
}

#[test]
fn forward_round_trip_for_laplace_kinds() {
    let boundaries = small_boundary_set(3);
    let dens = sample_densities(4, 12, 5.0, 8).unwrap();
    for kind in [ProblemKind::Idp, ProblemKind::Edp, ProblemKind::Inp, ProblemKind::Enp] {
        let ds = forward_generate(&boundaries, &dens, kind, 12, 512).unwrap();
        assert_eq!(ds.len(), 12);
        let errs = roundtrip_errors(&ds, 512).unwrap();
        assert!(errs.iter().all(|&e| e <= 1e-10), "{}: {errs:?}", kind.name());
    }
}

#[test]
fn zero_density_gives_zero_rhs() {
    let boundaries = small_boundary_set(1);
    let ds = forward_generate(&boundaries, &[CoeffVec::zeros(6)], ProblemKind::Edp, 6, 512).unwrap();
    assert!(ds.records[0].rhs.iter().all(|&v| v == 0.0));
}

#[test]
fn potential_flow_on_circle() {
    let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 8).unwrap();
    let ds = generate_potential_flow(&[c], &[3.0, -1.0], 8, 512).unwrap();
    let r = &ds.records[0];
    assert_eq!(r.meta, vec![3.0]);
    for (i, v) in r.rhs.iter().enumerate() {
        let want = if i == 1 { 6.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-12, "{i}: {v}");
    }
    assert!(roundtrip_errors(&ds, 512).unwrap().iter().all(|&e| e < 1e-10));
}

#[test]
fn elastostatic_records_satisfy_the_boundary_equation() {
    let boundaries = small_boundary_set(2);
    let params = sample_field_params(2, 4);
    let ds = generate_elastostatic(&boundaries, &params, 1.0, 0.3, 48).unwrap();
    assert_eq!(ds.len(), 4);
    for r in &ds.records {
        let b = r.boundary().unwrap();
        let v = match ds.rhs(r).unwrap() {
            bie_core::assembly::FieldCoeffs::Pair(v) => v,
            _ => unreachable!(),
        };
        let t = match ds.density(r).unwrap() {
            bie_core::assembly::FieldCoeffs::Pair(t) => t,
            _ => unreachable!(),
        };
        assert!(navier_residual(&b, 1.0, 0.3, &v, &t, 1024).unwrap() <= 1e-6);
    }
    assert!(generate_elastostatic(&boundaries, &params, 1.0, 0.5, 8).is_err());
}

#[test]
fn helmholtz_records_round_trip() {
    let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
    let ds = generate_helmholtz(&[c], &[1.0, 3.0], [1.0, 0.0], 24, None).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.records[1].meta, vec![3.0, 3.0, 1.0, 0.0]);
    assert!(roundtrip_errors(&ds, 512).unwrap().iter().all(|&e| e < 1e-10));
}

#[test]
fn files_round_trip_byte_identically() {
    let boundaries = small_boundary_set(2);
    let dens = sample_densities(2, 6, 5.0, 1).unwrap();
    let ds = forward_generate(&boundaries, &dens, ProblemKind::Idp, 6, 512).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.bied");
    write_dataset(&path, &ds).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back, ds);
    let again = dir.path().join("again.bied");
    write_dataset(&again, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

    let bpath = dir.path().join("b.bieb");
    write_boundaries(&bpath, 8, &boundaries).unwrap();
    let (n, bs) = read_boundaries(&bpath).unwrap();
    assert_eq!(n, 8);
    assert_eq!(bs, boundaries);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(dataset_from_bytes(&bytes).is_err());
    bytes[0] = b'X';
    assert!(dataset_from_bytes(&bytes).is_err());
}

#[test]
fn csv_export_has_one_row_per_record() {
    let c = BoundaryCurve::circle([0.0, 0.0], 1.0, 2).unwrap();
    let ds = generate_potential_flow(&[c], &[1.0, 2.0], 3, 512).unwrap();
    let mut buf = Vec::new();
    export_csv(&ds, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("kind,v0,gamma_0"));
    assert_eq!(lines[1].split(',').count(), 2 + 10 + 7 + 7);
}
