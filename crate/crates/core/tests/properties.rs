use eoam_core::dmm::{stopping_distance, BufferPolicy, LookupTable3D, PhaseDiagram, Sector};
use eoam_core::inverse::{accel_envelope, solve_inverse};
use eoam_core::path::{arc_length_parameterize, quintic_lane_change};
use eoam_core::scenario::{collision_check, Footprint};
use eoam_core::vehicle::{
    derivatives, lateral_tire_force, step, ControlInput, VehicleParams, VehicleState,
};
use proptest::prelude::*;

fn params() -> VehicleParams {
    VehicleParams::default()
}

fn diagram(clear: [f64; 4], ttc: f64, buffers: BufferPolicy) -> PhaseDiagram {
    let p = params();
    let speeds = vec![0.0, 12.0, 20.0, 30.0, 40.0];
    let mut c = vec![0.0];
    let mut acc = 0.0;
    for d in clear {
        acc += d;
        c.push(acc);
    }
    let d = PhaseDiagram {
        mu: 1.0,
        stop: speeds
            .iter()
            .map(|&v| stopping_distance(v, 1.0, &p))
            .collect(),
        speeds,
        stop_buffered: Vec::new(),
        clear_subopt: c.clone(),
        clear_const: c.iter().map(|x| x * 1.1).collect(),
        clear_buffered: Vec::new(),
        ttc_threshold: ttc,
        buffers,
    };
    d.with_buffers(buffers)
}

fn reference_sector(d: &PhaseDiagram, dist: f64, v: f64) -> Sector {
    if v <= 0.0 {
        return Sector::G;
    }
    let in_a = dist < d.clear_at(v) && dist < d.stop_at(v);
    let in_steer = !in_a && dist >= d.clear_at(v) && dist < d.clear_buffered_at(v);
    let in_c = !in_a && !in_steer && dist < d.stop_at(v);
    let in_d = !in_a && !in_steer && !in_c && dist < d.stop_buffered_at(v);
    let in_e = !in_a && !in_steer && !in_c && !in_d && dist / v < d.ttc_threshold;
    let labels = [
        (in_a, Sector::A),
        (in_steer && dist < d.stop_buffered_at(v), Sector::F),
        (in_steer && dist >= d.stop_buffered_at(v), Sector::B),
        (in_c, Sector::C),
        (in_d, Sector::D),
        (in_e, Sector::E),
    ];
    let hits: Vec<Sector> = labels.iter().filter(|l| l.0).map(|l| l.1).collect();
    assert!(hits.len() <= 1, "overlapping sectors {hits:?}");
    hits.first().copied().unwrap_or(Sector::G)
}

proptest! {
    #[test]
    fn tire_force_odd_monotone_bounded(
        c in 1e4f64..3e5,
        a in -0.5f64..0.5,
        b in -0.5f64..0.5,
        mu in 0.05f64..1.2,
    ) {
        let star = 0.0873;
        let f = |x: f64| lateral_tire_force(c, x, mu, star);
        prop_assert_eq!(f(-a), -f(a));
        if a <= b {
            prop_assert!(f(a) >= f(b));
        }
        prop_assert!(f(a).abs() <= mu * c * star * (1.0 + 1e-12));
    }

    #[test]
    fn plateau_scales_with_mu(c in 1e4f64..3e5, mu in 0.05f64..1.0, k in 0.1f64..1.0, a in 0.1f64..0.5) {
        let star = 0.0873;
        let base = lateral_tire_force(c, a, mu, star);
        let scaled = lateral_tire_force(c, a, k * mu, star);
        prop_assert!((scaled - k * base).abs() <= 1e-9 * base.abs());
    }

    #[test]
    fn straight_running_has_no_lateral_response(vx in 1.5f64..60.0, mu in 0.1f64..1.0) {
        let s = VehicleState::straight(0.0, 0.0, vx);
        let d = derivatives(&s, &ControlInput { f_t: 0.0, delta: 0.0 }, mu, &params()).unwrap();
        prop_assert_eq!(d.v_y, 0.0);
        prop_assert_eq!(d.psi_dot, 0.0);
        let n = step(&s, &ControlInput { f_t: 0.0, delta: 0.0 }, mu, &params(), 0.01).unwrap();
        prop_assert!((n.v_x - vx).abs() < 1e-12);
    }

    #[test]
    fn stopping_distance_is_quadratic(v in 0.0f64..80.0, mu in 0.05f64..1.0) {
        let p = params();
        prop_assert_eq!(stopping_distance(2.0 * v, mu, &p), 4.0 * stopping_distance(v, mu, &p));
    }

    #[test]
    fn arc_path_reconstructs(v0 in 12.0f64..46.0, t_f in 1.5f64..5.0) {
        let q = quintic_lane_change(v0, t_f, 3.5).unwrap();
        let arc = arc_length_parameterize(&q, 401).unwrap();
        let (theta, x, y) = arc.reconstruct();
        for i in 0..arc.len() {
            prop_assert!((x[i] - arc.x[i]).abs() < 1e-3);
            prop_assert!((y[i] - arc.y[i]).abs() < 1e-3);
            prop_assert!((theta[i] - arc.theta[i]).abs() < 1e-6);
        }
        for i in 1..arc.len() - 1 {
            let fd = (arc.theta[i + 1] - arc.theta[i - 1]) / (arc.s[i + 1] - arc.s[i - 1]);
            prop_assert!((fd - arc.kappa[i]).abs() < 1e-4);
        }
        let k: Vec<f64> = arc.kappa.iter().copied().filter(|k| k.abs() > 1e-9).collect();
        let changes = k.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        prop_assert_eq!(changes, 1);
    }

    #[test]
    fn doubling_speed_less_than_doubles_length(v0 in 8.0f64..30.0, t_f in 1.5f64..4.0) {
        let a = quintic_lane_change(v0, t_f, 3.5).unwrap();
        let b = quintic_lane_change(2.0 * v0, t_f, 3.5).unwrap();
        let la = arc_length_parameterize(&a, 401).unwrap().total_length();
        let lb = arc_length_parameterize(&b, 401).unwrap().total_length();
        prop_assert!(lb < 2.0 * la + 1e-9);
        for i in 0..=10 {
            let t = t_f * i as f64 / 10.0;
            prop_assert_eq!(a.lateral(t), b.lateral(t));
        }
    }

    #[test]
    fn sectors_partition_the_plane(
        clear in prop::array::uniform4(3.0f64..25.0),
        ttc in 1.0f64..20.0,
        sf in 1.0f64..1.5,
        cf in 1.0f64..1.5,
        dist in 0.0f64..400.0,
        v in -10.0f64..60.0,
    ) {
        let d = diagram(clear, ttc, BufferPolicy { stop_factor: sf, clear_factor: cf });
        prop_assert_eq!(d.classify(dist, v), reference_sector(&d, dist, v));
    }

    #[test]
    fn buffers_never_reduce_caution(
        clear in prop::array::uniform4(3.0f64..25.0),
        sf in 1.0f64..1.5,
        cf in 1.0f64..1.5,
        dist in 0.0f64..400.0,
        v in -10.0f64..60.0,
    ) {
        let buffered = diagram(clear, 2.5, BufferPolicy { stop_factor: sf, clear_factor: cf });
        let plain = buffered.with_buffers(BufferPolicy::NONE);
        prop_assert!(plain.classify(dist, v).caution() <= buffered.classify(dist, v).caution());
    }

    #[test]
    fn interpolation_stays_within_neighbours(speed in 5.0f64..60.0, dx in -5.0f64..20.0, mu in 0.0f64..1.5) {
        let speeds = vec![12.0, 20.0, 30.0];
        let dxs = vec![0.0, 5.0, 10.0];
        let mus = vec![0.3, 1.0];
        let n = 18;
        let plane: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 3.0).collect();
        let t = LookupTable3D {
            speeds,
            dx: dxs,
            mus,
            y_target: plane.clone(),
            ax_target: plane.clone(),
            theta_target: plane.clone(),
            kappa_target: plane.clone(),
            maneuver_length: vec![10.0; 6],
        };
        let got = t.interpolate(speed, dx, mu).values.y;
        let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(got >= lo - 1e-12 && got <= hi + 1e-12);
    }

    #[test]
    fn collision_is_symmetric(
        x in -8.0f64..8.0,
        y in -4.0f64..4.0,
        h1 in -3.2f64..3.2,
        h2 in -3.2f64..3.2,
    ) {
        let a = Footprint { cx: 0.0, cy: 0.0, heading: h1, half_length: 2.4, half_width: 0.95 };
        let b = Footprint { cx: x, cy: y, heading: h2, half_length: 2.5, half_width: 1.0 };
        prop_assert_eq!(collision_check(&a, &b).is_some(), collision_check(&b, &a).is_some());
        if (x * x + y * y).sqrt() > 2.0 * (2.5f64.hypot(1.0)) {
            prop_assert!(collision_check(&a, &b).is_none());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_grip_widens_envelope(v in 14.0f64..40.0, mu_lo in 0.5f64..0.8, gap in 0.05f64..0.4) {
        let p = params();
        let mu_hi = mu_lo + gap;
        let q = quintic_lane_change(v, 4.0, 3.5).unwrap();
        let arc = arc_length_parameterize(&q, 201).unwrap();
        let speeds = vec![v; arc.len()];
        let lo = solve_inverse(&arc, &speeds, mu_lo, &p).unwrap();
        let hi = solve_inverse(&arc, &speeds, mu_hi, &p).unwrap();
        let (el, eh) = (accel_envelope(&lo, mu_lo, &p), accel_envelope(&hi, mu_hi, &p));
        for i in 0..el.s.len() {
            if el.empty[i] || eh.empty[i] {
                continue;
            }
            prop_assert!(eh.ax_max[i] >= el.ax_max[i] - 1e-9);
            prop_assert!(eh.ax_min[i] <= el.ax_min[i] + 1e-9);
        }
    }
}
