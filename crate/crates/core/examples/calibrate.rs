//! Prints per-specification fail rates and overall yield for the synthetic
//! populations, plus suggested amplitude rescales toward target fail rates.
use spectc_core::datamodel::Label;
use spectc_core::syngen::{generate, GeneratorConfig};

fn solve_scale(z: &[f64], d_lo: f64, d_hi: f64, target: f64) -> f64 {
    // P(s*z > d_hi or s*z < -d_lo) is nondecreasing in s; bisect.
    let fail = |s: f64| {
        z.iter().filter(|&&v| s * v > d_hi || s * v < -d_lo).count() as f64 / z.len() as f64
    };
    let (mut lo, mut hi) = (0.05_f64, 200.0_f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if fail(mid) < target { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

fn report(name: &str, cfg: &GeneratorConfig, targets: &[f64]) {
    let ds = generate(cfg).unwrap();
    let names = ds.spec_names();
    println!("== {name} (n={}, seed={})", cfg.n, cfg.seed);
    for (i, spec) in names.iter().enumerate() {
        let def = &ds.specs()[i];
        let (span, nom) = (def.span(), def.nominal);
        let z: Vec<f64> = ds.values_of(spec).unwrap().iter().map(|v| (v - nom) / span).collect();
        let labels = ds.label_pass_fail(std::slice::from_ref(spec)).unwrap();
        let fails = labels.labels().iter().filter(|l| **l == Label::Fail).count();
        let d_lo = (nom - def.range_lo) / span;
        let d_hi = (def.range_hi - nom) / span;
        let target = targets[i % targets.len()];
        let s = solve_scale(&z, d_lo, d_hi, target);
        println!(
            "  {spec:<24} fail {:6.2}%  target {:4.1}%  amp_scale x{:.4}",
            100.0 * fails as f64 / ds.len() as f64, 100.0 * target, s
        );
    }
    let all = ds.label_pass_fail(&names).unwrap();
    println!("  yield {:.2}%", 100.0 * all.pass_count() as f64 / ds.len() as f64);
}

fn main() {
    let opamp_targets = [0.025, 0.045, 0.03, 0.05, 0.035, 0.045, 0.035, 0.04, 0.03, 0.025, 0.02];
    report("opamp", &GeneratorConfig::opamp(20000, 1), &opamp_targets);
    // Accel: set room-block targets; hot/cold inherit the same amplitude.
    let accel_targets = [0.042, 0.044, 0.042, 0.042, 0.042];
    report("accel", &GeneratorConfig::accel(20000, 1), &accel_targets);
}
