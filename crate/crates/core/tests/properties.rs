use proptest::prelude::*;

use towsteer::manufacturing::{Bounds, ConstraintField, DiffStencil};
use towsteer::mesh::{build_preset, ProblemPreset, StructuredGrid};
use towsteer::optimizer::{al_penalty, al_update, ks_aggregate, AlParams, AlState, KsParams, Problem};
use towsteer::orientation::{project, DesignState, OrientationFilter};
use towsteer::postprocess::{read_field_csv, render_svg, trace_streamlines, write_field_csv, Layer};

fn lbracket(n: usize) -> StructuredGrid {
    build_preset(&ProblemPreset::lbracket().with_resolution(n, n)).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn al_update_keeps_multipliers_nonnegative_and_schedules_monotone(
        g in prop::collection::vec(-3.0f64..3.0, 8),
        lambda in prop::collection::vec(0.0f64..50.0, 8),
        mu in 1.0f64..2e6,
        weight in 1e-3f64..1.0,
    ) {
        let p = AlParams::default();
        let mut st = AlState::new(8, p);
        st.lambda = lambda;
        st.mu = mu.min(p.mu_max);
        st.weight = weight;
        let next = al_update(&st, &g);
        prop_assert!(next.lambda.iter().all(|&l| l >= 0.0));
        prop_assert!(next.mu >= st.mu && next.mu <= p.mu_max);
        prop_assert!(next.weight >= st.weight && next.weight <= p.weight_max);
        prop_assert_eq!(next.k, st.k + 1);
    }

    #[test]
    fn al_penalty_is_nondecreasing_in_each_constraint(
        g in prop::collection::vec(-3.0f64..3.0, 6),
        lambda in prop::collection::vec(0.0f64..10.0, 6),
        j in 0usize..6,
        dg in 0.0f64..1.0,
    ) {
        let mut st = AlState::new(6, AlParams::default());
        st.lambda = lambda;
        let (v0, d) = al_penalty(&g, &st);
        let mut g2 = g.clone();
        g2[j] += dg;
        let (v1, _) = al_penalty(&g2, &st);
        prop_assert!(v1 >= v0 - 1e-12);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn ks_is_a_lower_smooth_max(g in prop::collection::vec(-5.0f64..5.0, 1..40), p in 1.0f64..60.0) {
        let (v, w) = ks_aggregate(&g, p);
        let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v <= gmax + 1e-12);
        prop_assert!(v >= gmax - (g.len() as f64).ln() / p - 1e-12);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_schedule_is_monotone_and_capped(p in 0.1f64..100.0) {
        let k = KsParams::default();
        let next = k.next(p.min(k.p_max));
        prop_assert!(next >= p.min(k.p_max) && next <= k.p_max);
    }

    #[test]
    fn filter_rows_are_a_partition_of_unity(n in prop::sample::select(vec![10usize, 15, 20]), radius in 0.02f64..0.5) {
        let grid = lbracket(n);
        let f = OrientationFilter::new(&grid, radius).unwrap();
        for e in 0..grid.n_elements() {
            let w = f.weights(e);
            prop_assert!(w.iter().all(|&(_, v)| v >= 0.0));
            prop_assert!((w.iter().map(|&(_, v)| v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_at_most_unit_and_keeps_direction(s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let [m, n] = project(s, t);
        let norm = m.hypot(n);
        prop_assert!(norm < 1.0);
        prop_assert!((m * t - n * s).abs() < 1e-12);
        prop_assert!(m * s + n * t >= 0.0);
    }

    #[test]
    fn curl_and_divergence_scale_with_the_field(
        seed in prop::collection::vec(-3.2f64..3.2, 100),
        a in -2.0f64..2.0,
    ) {
        let grid = StructuredGrid::rectangle(10, 10, 0.1, 0.1).unwrap();
        let st = DiffStencil::new(&grid);
        let field: Vec<[f64; 2]> = seed.iter().map(|t| [t.cos(), t.sin()]).collect();
        let scaled: Vec<[f64; 2]> = field.iter().map(|v| [a * v[0], a * v[1]]).collect();
        let (k, p) = st.curl_div(&field);
        let (ks, ps) = st.curl_div(&scaled);
        for e in 0..grid.n_elements() {
            prop_assert!((ks[e] - a * k[e]).abs() <= 1e-9 * (1.0 + k[e].abs()));
            prop_assert!((ps[e] - a * p[e]).abs() <= 1e-9 * (1.0 + p[e].abs()));
        }
    }

    #[test]
    fn constraint_vector_brackets_the_ratios(
        seed in prop::collection::vec(-3.2f64..3.2, 64),
        kb in 0.5f64..20.0,
        pb in 0.5f64..20.0,
    ) {
        let grid = lbracket(10);
        let field: Vec<[f64; 2]> = seed.iter().cycle().take(grid.n_elements()).map(|t| [t.cos(), t.sin()]).collect();
        let bounds = Bounds::new(kb, pb).unwrap();
        let cf = ConstraintField::evaluate(&DiffStencil::new(&grid), &field, &bounds);
        let ne = grid.n_elements();
        prop_assert_eq!(cf.g.len(), 4 * ne);
        for e in 0..ne {
            prop_assert!((cf.g[e].max(cf.g[ne + e]) - (cf.kappa[e].abs() / kb - 1.0)).abs() < 1e-12);
            prop_assert!((cf.g[2 * ne + e].max(cf.g[3 * ne + e]) - (cf.psi[e].abs() / pb - 1.0)).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn compliance_is_positive_and_blind_to_fiber_sense(x in prop::collection::vec(-1.0f64..1.0, 2 * 64)) {
        let preset = ProblemPreset::lbracket().with_resolution(10, 10);
        let pb = Problem::from_preset(&preset, 0.15).unwrap();
        let x: Vec<f64> = x.iter().cycle().take(pb.n_vars()).copied().collect();
        let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
        let c = pb.evaluate(&x).unwrap().solution.compliance;
        let cf = pb.evaluate(&flipped).unwrap().solution.compliance;
        prop_assert!(c > 0.0);
        prop_assert!((c - cf).abs() <= 1e-9 * c);
    }

    #[test]
    fn field_csv_round_trips(x in prop::collection::vec(-1.0f64..1.0, 2 * 64)) {
        let grid = lbracket(10);
        let filter = OrientationFilter::new(&grid, 0.15).unwrap();
        let x: Vec<f64> = x.iter().cycle().take(2 * grid.n_elements()).copied().collect();
        let state = DesignState::from_flat(&filter, &x);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field_csv(&path, &grid, &state).unwrap();
        let table = read_field_csv(&path).unwrap();
        prop_assert_eq!(table.field(), state.field);
        prop_assert_eq!(table.grid.mask(), grid.mask());
    }

    #[test]
    fn svg_output_is_deterministic(angles in prop::collection::vec(-1.5f64..1.5, 64)) {
        let grid = lbracket(10);
        let field: Vec<[f64; 2]> = angles.iter().cycle().take(grid.n_elements()).map(|t| [t.cos(), t.sin()]).collect();
        let lines = trace_streamlines(&grid, &field, 0.1).unwrap();
        let again = trace_streamlines(&grid, &field, 0.1).unwrap();
        let a = render_svg(&grid, &[Layer::Orientation(&field), Layer::Streamlines(&lines)]);
        let b = render_svg(&grid, &[Layer::Orientation(&field), Layer::Streamlines(&again)]);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn streamlines_stay_inside_and_keep_their_distance(angle in -1.5f64..1.5) {
        let grid = StructuredGrid::rectangle(20, 20, 0.05, 0.05).unwrap();
        let field = vec![[angle.cos(), angle.sin()]; grid.n_elements()];
        let sep = 0.1;
        let lines = trace_streamlines(&grid, &field, sep).unwrap();
        prop_assert!(!lines.is_empty());
        for (a, la) in lines.iter().enumerate() {
            for p in &la.points {
                prop_assert!(p[0] >= -1e-9 && p[0] <= 1.0 + 1e-9 && p[1] >= -1e-9 && p[1] <= 1.0 + 1e-9);
            }
            // Straight parallel lines: the offset along the normal measures the gap.
            let normal = [-angle.sin(), angle.cos()];
            let off = |l: &towsteer::postprocess::Streamline| l.points[0][0] * normal[0] + l.points[0][1] * normal[1];
            for lb in &lines[a + 1..] {
                prop_assert!((off(la) - off(lb)).abs() >= 0.5 * sep);
            }
        }
    }
}
