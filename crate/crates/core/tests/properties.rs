use cyleig::assemble::{assemble_cylinder, assemble_cross_section};
use cyleig::coeff::{schur_argmin, schur_complement, CoefficientField, SymMat};
use cyleig::eig::{rayleigh_quotient, smallest_eigenpairs};
use cyleig::grid::{CrossSection, DomainKind, Resolution, TensorMesh};
use proptest::prelude::*;

fn spd(n: usize, m: &[f64]) -> SymMat {
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut s: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
            if i == j {
                s += 0.1;
            }
            upper.push(s);
        }
    }
    SymMat::from_upper(n, &upper).unwrap()
}

fn small_mesh(kind: DomainKind, ell: f64) -> TensorMesh {
    TensorMesh::build(kind, ell, &CrossSection::interval(-1.0, 1.0), Resolution { axial: 4.0, cross: 4.0 }, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schur_value_is_the_minimum_over_the_axial_block(
        n in 2usize..=3,
        p_raw in 0usize..2,
        m in prop::collection::vec(-1.0f64..1.0, 9),
        z in prop::collection::vec(-2.0f64..2.0, 3),
        probe in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let p = 1 + p_raw % (n - 1);
        let b = spd(n, &m[..n * n]);
        let z2 = &z[..n - p];
        let value = schur_complement(&b, p).unwrap().form(z2);
        let mut at_min = schur_argmin(&b, p, z2).unwrap();
        at_min.extend_from_slice(z2);
        prop_assert!((b.form(&at_min) - value).abs() <= 1e-9 * (1.0 + value.abs()));
        let mut other = probe[..p].to_vec();
        other.extend_from_slice(z2);
        prop_assert!(b.form(&other) >= value - 1e-9 * (1.0 + value.abs()));
    }

    #[test]
    fn model_form_splits_into_squares(d in 0.0f64..0.99, x1 in -3.0f64..3.0, x2 in -3.0f64..3.0) {
        let a = CoefficientField::model(d).unwrap().eval(&[0.3]);
        let split = (1.0 - d * d) * x2 * x2 + (x1 + d * x2).powi(2);
        prop_assert!((a.form(&[x1, x2]) - split).abs() < 1e-12);
        let s = CoefficientField::model(d).unwrap().schur_reduce(&[0.3]).unwrap();
        prop_assert!((s.get(0, 0) - (1.0 - d * d)).abs() < 1e-12);
    }

    #[test]
    fn even_field_forms_are_reflection_invariant(d in 0.0f64..0.95, u in prop::collection::vec(-1.0f64..1.0, 200)) {
        let mesh = small_mesh(DomainKind::FullCylinder, 2.0);
        let pencil = assemble_cylinder(&mesh, &CoefficientField::model(d).unwrap()).unwrap();
        let perm = mesh.reflection_permutation().unwrap();
        let x: Vec<f64> = (0..pencil.dofs.len()).map(|i| u[i % u.len()]).collect();
        let nodal = pencil.dofs.expand(&x);
        let mirrored: Vec<f64> = (0..nodal.len()).map(|i| nodal[perm[i]]).collect();
        let y = pencil.dofs.restrict(&mirrored);
        for form in [&pencil.stiffness, &pencil.mass] {
            let (a, b) = (form.quad(&x), form.quad(&y));
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn every_rayleigh_quotient_bounds_lambda1(d in 0.0f64..0.9, u in prop::collection::vec(-1.0f64..1.0, 64)) {
        let mesh = small_mesh(DomainKind::FullCylinder, 1.0);
        let pencil = assemble_cylinder(&mesh, &CoefficientField::model(d).unwrap()).unwrap();
        let lam = smallest_eigenpairs(&pencil.stiffness, &pencil.mass, 1, 1e-10).unwrap()[0].value;
        let x: Vec<f64> = (0..pencil.dofs.len()).map(|i| u[i % u.len()] + 1e-3).collect();
        prop_assert!(rayleigh_quotient(&pencil.stiffness, &pencil.mass, &x) >= lam * (1.0 - 1e-9));
    }

    #[test]
    fn cross_section_mass_integrates_constants(cells in 2usize..40) {
        let mesh = TensorMesh::build(DomainKind::CrossSection, 0.0, &CrossSection::interval(-1.0, 1.0), Resolution { axial: 1.0, cross: cells as f64 }, 1).unwrap();
        let pencil = assemble_cross_section(&mesh, &CoefficientField::identity(2, 1).unwrap(), false).unwrap();
        let ones = vec![1.0; pencil.dofs.len()];
        let rows = pencil.mass.apply(&ones);
        prop_assert!(rows.iter().all(|&r| r > 0.0));
        // the interior hats sum to 1 except on the two end cells, where they ramp to 0
        let h = 1.0 / cells as f64;
        prop_assert!((pencil.mass.quad(&ones) - (2.0 - 4.0 * h / 3.0)).abs() < 1e-10);
    }
}
