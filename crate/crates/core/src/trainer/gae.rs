/// Generalized advantage estimates and value targets for a time-major
/// `[T][N]` rollout. A `done` step is terminal: nothing is bootstrapped
/// past it. `last_values` bootstraps the horizon end of unfinished episodes.
pub fn compute_gae(
    rewards: &[Vec<f64>],
    values: &[Vec<f64>],
    dones: &[Vec<bool>],
    last_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let t_len = rewards.len();
    let n = last_values.len();
    let mut adv = vec![vec![0.0; n]; t_len];
    let mut targets = vec![vec![0.0; n]; t_len];
    for e in 0..n {
        let mut running = 0.0;
        for t in (0..t_len).rev() {
            let next_value = if t + 1 == t_len {
                last_values[e]
            } else {
                values[t + 1][e]
            };
            let live = if dones[t][e] { 0.0 } else { 1.0 };
            let delta = rewards[t][e] + gamma * next_value * live - values[t][e];
            running = delta + gamma * lambda * live * running;
            adv[t][e] = running;
            targets[t][e] = running + values[t][e];
        }
    }
    (adv, targets)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return Vec::new();
    }
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}
