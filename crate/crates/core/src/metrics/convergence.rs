/// Trailing means over `window` episodes; entry `i` covers `i + 1 − window ..= i`.
pub fn moving_average(trace: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || trace.len() < window {
        return Vec::new();
    }
    let mut sum: f64 = trace[..window].iter().sum();
    let mut out = vec![sum / window as f64];
    for i in window..trace.len() {
        sum += trace[i] - trace[i - window];
        out.push(sum / window as f64);
    }
    out
}

/// First episode `i` at which the reward trend has flattened.
///
/// The trend at `i` is the per-episode slope between the mean of the
/// `window` episodes before `i` and the mean of the `window` episodes from
/// `i` on. The detector fires at the first `i` where the slope stays below
/// `slope_tol` in magnitude for `window` consecutive episodes.
pub fn convergence_detector(trace: &[f64], window: usize, slope_tol: f64) -> Option<usize> {
    let n = trace.len();
    if window == 0 || n < 2 * window {
        return None;
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for x in trace {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + x);
    }
    let w = window as f64;
    let slope = |i: usize| {
        let before = (prefix[i] - prefix[i - window]) / w;
        let after = (prefix[i + window] - prefix[i]) / w;
        (after - before) / w
    };
    let mut run = 0;
    for i in window..=n - window {
        if slope(i).abs() < slope_tol {
            run += 1;
            if run == window {
                return Some(i + 1 - window);
            }
        } else {
            run = 0;
        }
    }
    None
}
