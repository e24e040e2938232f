//! Quadrature and discrete-operator accuracy of the two mesh families,
//! checked against closed-form integrals and boundary value problems.

use std::f64::consts::PI;

use critmin_core::mesh::Mesh;

#[test]
fn radial_quadrature_integrates_polynomials() {
    let mesh = Mesh::radial_ball(1000).unwrap();
    // The reported volume is the quadrature sum, second-order accurate.
    assert!((mesh.volume() - 4.0 * PI / 3.0).abs() < 1.0e-6 * mesh.volume());
    // int r^2 over the unit ball = 4 pi / 5.
    let quad: f64 = (0..mesh.n_nodes())
        .map(|i| {
            let r = mesh.position(i)[0];
            mesh.weights()[i] * r * r
        })
        .sum();
    let exact = 4.0 * PI / 5.0;
    assert!((quad - exact).abs() < 1.0e-5 * exact, "{quad} vs {exact}");
}

#[test]
fn box_quadrature_integrates_separable_products() {
    let lengths = [1.0, 0.75, 0.5];
    let mesh = Mesh::box3(lengths, 24).unwrap();
    let vol: f64 = lengths.iter().product();
    assert!((mesh.volume() - vol).abs() < 1.0e-12 * vol);
    // int sin(pi x / Lx) sin(pi y / Ly) sin(pi z / Lz) = (2/pi)^3 Lx Ly Lz.
    let quad: f64 = (0..mesh.n_nodes())
        .map(|i| {
            let p = mesh.position(i);
            mesh.weights()[i]
                * (PI * p[0] / lengths[0]).sin()
                * (PI * p[1] / lengths[1]).sin()
                * (PI * p[2] / lengths[2]).sin()
        })
        .sum();
    let exact = (2.0 / PI).powi(3) * vol;
    assert!((quad - exact).abs() < 3.0e-3 * exact, "{quad} vs {exact}");
}

#[test]
fn radial_stiffness_reproduces_dirichlet_energy() {
    let mesh = Mesh::radial_ball(2000).unwrap();
    // v = 1 - r^2 vanishes on the boundary; int |grad v|^2 = 16 pi / 5.
    let v: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| {
            let r = mesh.position(i)[0];
            1.0 - r * r
        })
        .collect();
    let mut av = vec![0.0; v.len()];
    mesh.apply_stiffness(&v, &mut av);
    let energy: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    let exact = 16.0 * PI / 5.0;
    assert!((energy - exact).abs() < 1.0e-5 * exact, "{energy} vs {exact}");
}

#[test]
fn box_stiffness_reproduces_dirichlet_energy() {
    let mesh = Mesh::box3([1.0, 1.0, 1.0], 40).unwrap();
    // v = product of sines: int |grad v|^2 = 3 pi^2 / 8 on the unit cube.
    let v: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| {
            let p = mesh.position(i);
            (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin()
        })
        .collect();
    let mut av = vec![0.0; v.len()];
    mesh.apply_stiffness(&v, &mut av);
    let energy: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    let exact = 3.0 * PI * PI / 8.0;
    assert!((energy - exact).abs() < 2.0e-3 * exact, "{energy} vs {exact}");
}

#[test]
fn radial_poisson_solve_matches_parabola() {
    // -Delta u = 1 with zero boundary data has u = (1 - r^2) / 6 on the
    // unit ball; the tridiagonal factorization must reproduce it.
    let mesh = Mesh::radial_ball(500).unwrap();
    let tri = mesh.stiffness_tridiag().unwrap();
    let lu = critmin_core::linalg::TridiagLU::factor_shifted(&tri, 0.0);
    let mut rhs: Vec<f64> = mesh.weights().to_vec();
    lu.solve(&mut rhs);
    for j in (0..500).step_by(71) {
        let r = mesh.position(j)[0];
        let exact = (1.0 - r * r) / 6.0;
        assert!((rhs[j] - exact).abs() < 1.0e-5, "r = {r}: {} vs {exact}", rhs[j]);
    }
}

#[test]
fn center_extrapolations_recover_smooth_values() {
    let mesh = Mesh::radial_ball(400).unwrap();
    // Even profile: cos(pi r / 2) has value 1 and zero slope at the center.
    let even: Vec<f64> = (0..mesh.n_nodes())
        .map(|i| (PI * mesh.position(i)[0] / 2.0).cos())
        .collect();
    let c = mesh.radial_center_value_even(&even).unwrap();
    assert!((c - 1.0).abs() < 1.0e-5, "{c}");
    // Profile with a genuine linear term: 1 - r. The linear rule is exact.
    let slanted: Vec<f64> = (0..mesh.n_nodes()).map(|i| 1.0 - mesh.position(i)[0]).collect();
    let c = mesh.radial_center_value_linear(&slanted).unwrap();
    assert!((c - 1.0).abs() < 1.0e-12, "{c}");
}

#[test]
fn interior_edges_cover_the_connectivity() {
    let mesh = Mesh::radial_ball(64).unwrap();
    let mut count = 0;
    mesh.for_each_interior_edge(|i, j, c| {
        assert!(i < j && c > 0.0);
        count += 1;
    });
    assert_eq!(count, 63);

    let mesh = Mesh::box3([1.0, 1.0, 1.0], 8).unwrap();
    let mut count = 0;
    mesh.for_each_interior_edge(|i, j, c| {
        assert!(i != j && c > 0.0);
        count += 1;
    });
    // 3 axes times R^2 (R - 1) interior node pairs per axis.
    assert_eq!(count, 3 * 8 * 8 * 7);
}
