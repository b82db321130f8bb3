use std::sync::Arc;

use parahom::diagnostics::local_beta;
use parahom::fem::Assembler;
use parahom::metrics::{loglog_slope, relative_errors_fine};
use parahom::{MediumSpec, Mesh, Point, TensorSample};
use proptest::prelude::*;

fn field(mesh: &Mesh, a: f64, b: f64, c: f64) -> Vec<f64> {
    mesh.nodes().iter().map(|p| a * (b * p.x).sin() + c * p.y * p.y + p.x * p.y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_annihilates_constants(n in 2usize..12, seed in 0u64..1000) {
        let mesh = Mesh::uniform(n).unwrap();
        let medium = MediumSpec::percolation().build(&mesh, seed).unwrap();
        let a = Assembler::new(Arc::new(mesh.clone())).stiffness_full(&medium, 0.0).unwrap();
        let scale = a.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in a.mul_vec(&vec![1.0; mesh.n_nodes()]) {
            prop_assert!(r.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn mass_entries_sum_to_domain_area(n in 1usize..20) {
        let mesh = Mesh::uniform(n).unwrap();
        let total: f64 = Assembler::new(Arc::new(mesh)).mass_full().values().iter().sum();
        prop_assert!((total - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn relative_errors_are_scale_invariant(b in 0.5f64..4.0, c in -2.0f64..2.0, s in 1e-3f64..1e3) {
        let mesh = Mesh::uniform(8).unwrap();
        let u = field(&mesh, 1.0, b, c);
        let v = field(&mesh, 1.1, b, 0.9 * c);
        let e = relative_errors_fine(&u, &v, &mesh).unwrap();
        let us: Vec<f64> = u.iter().map(|x| s * x).collect();
        let vs: Vec<f64> = v.iter().map(|x| s * x).collect();
        let es = relative_errors_fine(&us, &vs, &mesh).unwrap();
        for (x, y) in [(e.l1, es.l1), (e.l2, es.l2), (e.linf, es.linf), (e.h1, es.h1)] {
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1e-300));
        }
    }

    #[test]
    fn loglog_slope_recovers_power(p in -3.0f64..3.0, k in 0.1f64..10.0) {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|x: &f64| k * x.powf(p)).collect();
        prop_assert!((loglog_slope(&h, &e) - p).abs() <= 1e-10);
    }

    #[test]
    fn cordes_parameter_lies_in_unit_interval(l1 in 1e-3f64..1e3, l2 in 1e-3f64..1e3, theta in 0.0f64..6.3) {
        let (c, s) = (theta.cos(), theta.sin());
        let t = TensorSample { a11: l1 * c * c + l2 * s * s, a12: (l1 - l2) * c * s, a22: l1 * s * s + l2 * c * c };
        let beta = local_beta(&t);
        prop_assert!((-1e-12..1.0).contains(&beta));
    }

    #[test]
    fn located_points_reconstruct(n in 1usize..16, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let mesh = Mesh::uniform(n).unwrap();
        let p = Point::new(x, y);
        let loc = mesh.locator();
        let found = loc.locate(p).unwrap();
        let q = loc.reconstruct(&found);
        prop_assert!((q - p).norm() <= 1e-12);
        prop_assert!(found.barycentric.iter().all(|&b| b >= -1e-12));
    }
}
