use lcp_core::env::{
    pd_torque, reward_terms, trajectory_header, trajectory_row, Command, CommandRanges,
    RandomizationRanges, TrackerConfig, TrackerEnv, VecEnv,
};
use lcp_core::LcpError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn nominal(cfg: TrackerConfig) -> TrackerConfig {
    TrackerConfig {
        randomization: RandomizationRanges {
            inertia_scale: [1.0, 1.0],
            strength_scale: [1.0, 1.0],
            max_latency: 0,
        },
        ..cfg
    }
}

fn fixed_command(vx: f64) -> CommandRanges {
    CommandRanges {
        vx: [vx, vx],
        vy: [0.0, 0.0],
        vyaw: [0.0, 0.0],
        resample_period: 150,
    }
}

#[test]
fn same_seed_gives_same_initial_observation() {
    let mut a = TrackerEnv::new(TrackerConfig::tracker_nd(6, 4), 17).unwrap();
    let mut b = TrackerEnv::new(TrackerConfig::tracker_nd(6, 4), 17).unwrap();
    assert_eq!(a.reset().0, b.reset().0);
    assert_eq!(a.reset().1, b.reset().1);
}

#[test]
fn phase_starts_at_zero_angle() {
    let mut env = TrackerEnv::new(TrackerConfig::tracker1d(), 0).unwrap();
    let (obs, _) = env.reset();
    assert_eq!(obs.phase(), [0.0, 1.0]);
    assert_eq!(obs.0.len(), TrackerConfig::tracker1d().obs_dim());
}

#[test]
fn reset_commands_and_randomization_stay_in_range() {
    let cfg = TrackerConfig::tracker1d();
    let mut env = TrackerEnv::new(cfg.clone(), 5).unwrap();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut latencies = [0usize; 3];
    for _ in 0..10_000 {
        let (obs, p) = env.reset();
        for (k, c) in obs.command().iter().enumerate() {
            lo[k] = lo[k].min(*c);
            hi[k] = hi[k].max(*c);
        }
        assert!(p.inertia_scale.iter().all(|s| (0.8..=1.2).contains(s)));
        assert!(p.strength_scale.iter().all(|s| (0.8..=1.2).contains(s)));
        latencies[p.latency] += 1;
    }
    let ranges = [cfg.commands.vx, cfg.commands.vy, cfg.commands.vyaw];
    for k in 0..3 {
        assert!(lo[k] >= ranges[k][0] && hi[k] <= ranges[k][1]);
        let width = ranges[k][1] - ranges[k][0];
        // With 10⁴ uniform draws the extremes land within 0.1% of the ends.
        assert!(lo[k] - ranges[k][0] < 1e-3 * width * 5.0);
        assert!(ranges[k][1] - hi[k] < 1e-3 * width * 5.0);
    }
    assert!(latencies.iter().all(|&c| c > 3000));
}

#[test]
fn pd_torque_clips_then_scales() {
    assert_eq!(
        pd_torque(&[1.0], &[0.0], &[0.0], 20.0, 0.5, 10.0, &[1.0]),
        vec![10.0]
    );
    let t = pd_torque(
        &[0.1, -0.2],
        &[0.0, 0.1],
        &[1.0, -2.0],
        20.0,
        0.5,
        10.0,
        &[1.0, 1.0],
    );
    let h = pd_torque(
        &[0.1, -0.2],
        &[0.0, 0.1],
        &[1.0, -2.0],
        20.0,
        0.5,
        10.0,
        &[0.5, 0.5],
    );
    for (t, h) in t.iter().zip(h) {
        assert_eq!(h, 0.5 * t);
    }
}

#[test]
fn idle_plant_tracks_zero_command_perfectly() {
    let cfg = TrackerConfig {
        commands: fixed_command(0.0),
        ..nominal(TrackerConfig::tracker1d())
    };
    let mut env = TrackerEnv::new(cfg, 0).unwrap();
    env.reset();
    env.set_joint_state(vec![0.0], vec![0.0]);
    for _ in 0..20 {
        let out = env.step(&[0.0]).unwrap();
        assert_eq!(out.info.base_velocity, [0.0; 3]);
        assert_eq!(out.terms.tracking_lin, 1.0);
        assert_eq!(out.terms.tracking_yaw, 1.0);
        assert_eq!(out.terms.torque_sq, 0.0);
    }
}

#[test]
fn matching_joint_velocity_maximizes_tracking() {
    let cfg = TrackerConfig::tracker1d();
    let b = cfg.mixing();
    let command = Command {
        vx: 0.4,
        vy: 0.0,
        vyaw: 0.0,
    };
    let tracking = |qd: f64| {
        let v = [b.get(0, 0) * qd, b.get(1, 0) * qd, b.get(2, 0) * qd];
        reward_terms(&cfg, &[0.0], v, command, 0.0, &[0.0]).tracking_lin
    };
    assert_eq!(tracking(0.4), 1.0);
    for k in -100..=100 {
        assert!(tracking(k as f64 * 0.013) <= tracking(0.4));
    }
}

#[test]
fn episode_ends_at_exactly_500_steps() {
    let mut env = TrackerEnv::new(TrackerConfig::tracker1d(), 2).unwrap();
    env.reset();
    for t in 1..=500 {
        let out = env.step(&[0.0]).unwrap();
        assert_eq!(out.done, t == 500, "step {t}");
        assert_eq!(out.info.timeout, t == 500);
    }
    assert!(matches!(env.step(&[0.0]), Err(LcpError::EpisodeDone)));
}

#[test]
fn leaving_the_joint_range_terminates() {
    let mut env = TrackerEnv::new(nominal(TrackerConfig::tracker1d()), 2).unwrap();
    env.reset();
    env.set_joint_state(vec![1.99], vec![5.0]);
    let out = env.step(&[3.0]).unwrap();
    assert!(out.done && !out.info.timeout);
}

#[test]
fn wrong_action_width_is_rejected() {
    let mut env = TrackerEnv::new(TrackerConfig::tracker_nd(4, 0), 2).unwrap();
    env.reset();
    assert!(matches!(
        env.step(&[0.0; 3]),
        Err(LcpError::Dimension {
            expected: 4,
            got: 3,
            ..
        })
    ));
}

#[test]
fn one_step_matches_closed_form_integration() {
    let cfg = nominal(TrackerConfig::tracker_nd(3, 9));
    let mut env = TrackerEnv::new(cfg.clone(), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        env.reset();
        let q: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let qd: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        env.set_joint_state(q.clone(), qd.clone());
        let out = env.step(&a).unwrap();
        let b = cfg.mixing();
        let mut v = [0.0; 3];
        for i in 0..3 {
            let tau = (20.0 * (a[i] - q[i]) - 0.5 * qd[i]).clamp(-10.0, 10.0);
            let qd_next = qd[i] + tau * 0.02;
            let q_next = q[i] + qd_next * 0.02;
            assert!((out.info.torque[i] - tau).abs() <= 1e-12);
            assert!((out.info.qd[i] - qd_next).abs() <= 1e-12);
            assert!((out.info.q[i] - q_next).abs() <= 1e-12);
            for (k, vk) in v.iter_mut().enumerate() {
                *vk += b.get(k, i) * qd_next;
            }
        }
        for k in 0..3 {
            assert!((out.info.base_velocity[k] - v[k]).abs() <= 1e-12);
        }
        let theta = 2.0 * std::f64::consts::PI * 0.02 / 0.8;
        assert!((out.obs.phase()[0] - theta.sin()).abs() <= 1e-12);
    }
}

#[test]
fn latency_delays_the_applied_target() {
    let mut env = TrackerEnv::new(nominal(TrackerConfig::tracker1d()), 0).unwrap();
    env.reset();
    env.set_privileged(vec![1.0], vec![1.0], 2);
    // max_latency is 0 in the nominal config, so the override is capped.
    assert_eq!(env.privileged().latency, 0);

    let mut env = TrackerEnv::new(TrackerConfig::tracker1d(), 0).unwrap();
    env.reset();
    env.set_privileged(vec![1.0], vec![1.0], 2);
    let applied: Vec<f64> = [0.1, 0.2, 0.3, 0.4]
        .iter()
        .map(|a| env.step(&[*a]).unwrap().info.delayed_action[0])
        .collect();
    assert_eq!(applied, vec![0.0, 0.0, 0.1, 0.2]);
}

#[test]
fn commands_change_only_on_the_resample_schedule() {
    let mut env = TrackerEnv::new(TrackerConfig::tracker1d(), 8).unwrap();
    let (mut prev, _) = env.reset();
    let mut changes = Vec::new();
    for t in 1..=500 {
        let out = env.step(&[0.0]).unwrap();
        if out.obs.command() != prev.command() {
            changes.push(t);
        }
        prev = out.obs;
    }
    assert_eq!(changes, vec![150, 300, 450]);
}

#[test]
fn vec_env_streams_differ_but_are_reproducible() {
    let cfg = TrackerConfig::tracker1d();
    let mut a = VecEnv::new(&cfg, 4, 3).unwrap();
    let mut b = VecEnv::new(&cfg, 4, 3).unwrap();
    let ra = a.reset_all();
    assert_eq!(ra, b.reset_all());
    assert_ne!(ra[0].0, ra[1].0);
    let actions = vec![vec![0.2]; 4];
    assert_eq!(a.step(&actions).unwrap(), b.step(&actions).unwrap());
    assert!(matches!(
        a.step(&actions[..3]),
        Err(LcpError::LengthMismatch(4, 3))
    ));
    assert!(VecEnv::new(&cfg, 0, 3).is_err());
}

#[test]
fn trajectory_rows_match_header() {
    let mut env = TrackerEnv::new(TrackerConfig::tracker_nd(2, 0), 0).unwrap();
    env.reset();
    let out = env.step(&[0.1, -0.1]).unwrap();
    let header = trajectory_header(2);
    let row = trajectory_row(0, &[0.1, -0.1], &out);
    assert_eq!(header.len(), row.len());
    assert_eq!(header[0], "t");
    assert_eq!(header[5], "a0");
}

fn run_episode<F: FnMut(&[f64], &[f64]) -> f64>(mut policy: F) -> (f64, usize, Vec<f64>) {
    let cfg = TrackerConfig {
        commands: fixed_command(0.4),
        ..nominal(TrackerConfig::tracker1d())
    };
    let mut env = TrackerEnv::new(cfg.clone(), 0).unwrap();
    env.reset();
    env.set_joint_state(vec![0.0], vec![0.0]);
    let (mut q, mut qd) = (vec![0.0], vec![0.0]);
    let mut total = 0.0;
    let mut actions = Vec::new();
    for t in 0..500 {
        let a = policy(&q, &qd);
        actions.push(a);
        let out = env.step(&[a]).unwrap();
        total += out.terms.task_reward(&cfg.rewards);
        q = out.info.q.clone();
        qd = out.info.qd.clone();
        if out.done {
            return (total, t + 1, actions);
        }
    }
    (total, 500, actions)
}

#[test]
fn oscillating_targets_beat_every_constant_target() {
    let mut best_constant = f64::NEG_INFINITY;
    for k in -90..=90 {
        let c = k as f64 * 0.02;
        best_constant = best_constant.max(run_episode(|_, _| c).0);
    }
    // Velocity servo through the PD target: ramp up at the commanded speed,
    // snap back quickly near the limit.
    let mut returning = false;
    let (osc, len, actions) = run_episode(|q, qd| {
        if q[0] > 1.5 {
            returning = true;
        } else if q[0] < -1.5 {
            returning = false;
        }
        let vd = if returning { -3.0 } else { 0.4 };
        q[0] + (0.5 * vd + 5.0 * (vd - qd[0])) / 20.0
    });
    assert_eq!(len, 500);
    let sign_flips = actions
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() > 0.05)
        .count();
    assert!(sign_flips >= 2, "policy never switched direction");
    assert!(
        osc > best_constant,
        "oscillating {osc} vs constant {best_constant}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_stays_within_the_actuator_bound(seed in 0u64..1000, scale in 0.1f64..4.0) {
        let cfg = TrackerConfig::tracker_nd(3, seed);
        let mut env = TrackerEnv::new(cfg.clone(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset();
        let bound = 3.0 * cfg.torque_limit * cfg.randomization.strength_scale[1] * cfg.velocity_limit;
        for _ in 0..200 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-scale..scale)).collect();
            let out = env.step(&a).unwrap();
            let power: f64 = out.info.torque.iter().zip(&out.info.qd).map(|(t, v)| t * v).sum();
            prop_assert!(power.abs() <= bound);
            prop_assert!(out.info.qd.iter().all(|v| v.abs() <= cfg.velocity_limit));
            let [s, c] = out.obs.phase();
            prop_assert!((s * s + c * c - 1.0).abs() <= 1e-12);
            if out.done {
                env.reset();
            }
        }
    }

    #[test]
    fn identical_seeds_and_actions_give_identical_trajectories(seed in 0u64..1000) {
        let cfg = TrackerConfig::tracker_nd(2, 1);
        let mut a = TrackerEnv::new(cfg.clone(), seed).unwrap();
        let mut b = TrackerEnv::new(cfg, seed).unwrap();
        a.reset();
        b.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..100 {
            let act: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (oa, ob) = (a.step(&act).unwrap(), b.step(&act).unwrap());
            prop_assert_eq!(&oa, &ob);
            if oa.done {
                break;
            }
        }
    }
}
