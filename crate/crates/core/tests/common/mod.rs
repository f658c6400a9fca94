//! Test support shared by the integration targets.

#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

/// Straight-line transcription of the learning unit, written independently
/// of `belbic_grid::belbic`. Returns the model output and the updated
/// `(v, v_th, w)`.
pub fn oracle_step(
    v: &[f64],
    v_th: f64,
    w: &[f64],
    si: &[f64],
    es: f64,
    k_v: f64,
    k_w: f64,
    thalamus: bool,
) -> (f64, Vec<f64>, f64, Vec<f64>) {
    let n = si.len();

    let mut a_sum = 0.0;
    for i in 0..n {
        a_sum += v[i] * si[i];
    }
    let mut si_max = si[0];
    for i in 1..n {
        if si[i] > si_max {
            si_max = si[i];
        }
    }
    let a_th = if thalamus { v_th * si_max } else { 0.0 };
    let mut oc_sum = 0.0;
    for i in 0..n {
        oc_sum += w[i] * si[i];
    }
    let mo = (a_sum + a_th) - oc_sum;

    let reward = es - (a_sum + a_th);
    let reward = if reward > 0.0 { reward } else { 0.0 };
    let mut v_new = vec![0.0; n];
    for i in 0..n {
        v_new[i] = v[i] + k_v * si[i] * reward;
    }
    let v_th_new = if thalamus {
        v_th + k_v * si_max * reward
    } else {
        v_th
    };

    let mut w_new = vec![0.0; n];
    for i in 0..n {
        w_new[i] = w[i] + k_w * si[i] * (mo - es);
    }
    (mo, v_new, v_th_new, w_new)
}

/// `|a - b| / max(|a|, |b|)`, 0 when both are 0.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
