//! Interactive browser demo. Three operations, each returning a JSON string
//! for the static page in `www/` to plot:
//!
//! - [`certificate_demo`]: one seeded instance; per-pair `(V, log H/K)`
//!   scatter against the certified envelope `c·V ≤ log H/K ≤ C·V`.
//! - [`norm_sweep_demo`]: empirical and theoretical constants as the measure
//!   is rescaled across operator norms, on fixed geometry.
//! - [`dyadic_demo`]: Carleson norm vs operator norm sandwich for the
//!   dyadic-cube model.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use resolvent::instances::{random_plane_instance, PlaneInstanceSpec};
use resolvent::models::{build_dyadic, SRule};
use resolvent::neumann::{neumann_sum_with, NeumannOptions};
use resolvent::rng::SplitMix64;
use resolvent::space::quasimetric_constant;
use resolvent::{certify, operator_norm, upper_constant};

fn err_json(message: &str) -> String {
    format!("{{\"error\":{}}}", serde_json::Value::from(message))
}

#[derive(Serialize)]
struct CertificatePoint {
    v: f64,
    log_ratio: f64,
}

#[derive(Serialize)]
struct CertificateDemo {
    n: usize,
    kappa: f64,
    #[serde(rename = "norm_T")]
    norm_t: f64,
    c: f64,
    c_empirical: f64,
    #[serde(rename = "C_empirical")]
    c_empirical_max: f64,
    log10_c_final: f64,
    min_lower_margin: f64,
    lower_pass: bool,
    upper_pass: bool,
    pairs: Vec<CertificatePoint>,
}

/// One instance end to end: κ scan, resolvent, certificate, scatter data.
#[wasm_bindgen]
pub fn certificate_demo(n: u32, seed: u32, target_norm: f64) -> String {
    let n = (n as usize).clamp(4, 120);
    if !(0.01..1.0).contains(&target_norm) {
        return err_json("target norm must lie in (0.01, 1)");
    }
    let (kernel, omega) = match random_plane_instance(
        &PlaneInstanceSpec::new(n, seed as u64).with_target_norm(target_norm),
    ) {
        Ok(p) => p,
        Err(e) => return err_json(&e.to_string()),
    };
    let (kappa, _) = match quasimetric_constant(&kernel) {
        Ok(k) => k,
        Err(e) => return err_json(&e.to_string()),
    };
    let r = match neumann_sum_with(&kernel, &omega, NeumannOptions {
        tol: 1e-10,
        keep_iterates: false,
        ..NeumannOptions::default()
    }) {
        Ok(r) => r,
        Err(e) => return err_json(&e.to_string()),
    };
    let ledger = match upper_constant(kappa, r.norm_t) {
        Ok(l) => l,
        Err(e) => return err_json(&e.to_string()),
    };
    let h = r.h_solve.as_ref().expect("subcritical instance");
    let cert = certify(h, &kernel, &r.k2, &ledger, 1e-9);

    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push(CertificatePoint {
                v: r.k2.get(i, j) / kernel.entry(i, j),
                log_ratio: (h.get(i, j) / kernel.entry(i, j)).ln(),
            });
        }
    }
    serde_json::to_string(&CertificateDemo {
        n,
        kappa,
        norm_t: r.norm_t,
        c: ledger.c,
        c_empirical: cert.c_empirical_min.unwrap_or(f64::NAN),
        c_empirical_max: cert.c_empirical_max.unwrap_or(f64::NAN),
        log10_c_final: ledger.c_final.log10(),
        min_lower_margin: cert.min_lower_margin,
        lower_pass: cert.lower_pass,
        upper_pass: cert.upper_pass,
        pairs,
    })
    .unwrap_or_else(|e| err_json(&e.to_string()))
}

#[derive(Serialize)]
struct SweepRow {
    norm: f64,
    c: f64,
    c_empirical: f64,
    #[serde(rename = "C_empirical")]
    c_empirical_max: f64,
    log10_c_final: f64,
}

#[derive(Serialize)]
struct SweepDemo {
    kappa: f64,
    rows: Vec<SweepRow>,
}

/// Sweep the target operator norm on fixed geometry.
#[wasm_bindgen]
pub fn norm_sweep_demo(n: u32, seed: u32, steps: u32) -> String {
    let n = (n as usize).clamp(4, 80);
    let steps = (steps as usize).clamp(2, 40);
    let mut kappa_out = 0.0;
    let mut rows = Vec::with_capacity(steps);
    for s in 0..steps {
        let target = 0.05 + 0.90 * s as f64 / (steps - 1) as f64;
        let built = random_plane_instance(
            &PlaneInstanceSpec::new(n, seed as u64).with_target_norm(target),
        );
        let (kernel, omega) = match built {
            Ok(p) => p,
            Err(e) => return err_json(&e.to_string()),
        };
        let (kappa, _) = match quasimetric_constant(&kernel) {
            Ok(k) => k,
            Err(e) => return err_json(&e.to_string()),
        };
        kappa_out = kappa;
        let r = match neumann_sum_with(&kernel, &omega, NeumannOptions {
            tol: 1e-9,
            keep_iterates: false,
            ..NeumannOptions::default()
        }) {
            Ok(r) => r,
            Err(e) => return err_json(&e.to_string()),
        };
        let ledger = match upper_constant(kappa, r.norm_t) {
            Ok(l) => l,
            Err(e) => return err_json(&e.to_string()),
        };
        let cert = certify(
            r.h_solve.as_ref().expect("subcritical"),
            &kernel,
            &r.k2,
            &ledger,
            1e-9,
        );
        rows.push(SweepRow {
            norm: r.norm_t,
            c: ledger.c,
            c_empirical: cert.c_empirical_min.unwrap_or(f64::NAN),
            c_empirical_max: cert.c_empirical_max.unwrap_or(f64::NAN),
            log10_c_final: ledger.c_final.log10(),
        });
    }
    serde_json::to_string(&SweepDemo {
        kappa: kappa_out,
        rows,
    })
    .unwrap_or_else(|e| err_json(&e.to_string()))
}

#[derive(Serialize)]
struct CubeRow {
    gen: u32,
    mass: f64,
    s: f64,
}

#[derive(Serialize)]
struct DyadicDemo {
    n_atoms: usize,
    level: u32,
    carleson_norm: f64,
    #[serde(rename = "norm_T")]
    norm_t: f64,
    norm_over_carleson: f64,
    ultra_metric_ok: bool,
    cubes: Vec<CubeRow>,
}

/// Seeded dyadic Carleson model with the `‖s‖_ω ≤ ‖T‖ ≤ 4‖s‖_ω` sandwich.
#[wasm_bindgen]
pub fn dyadic_demo(atoms: u32, level: u32, seed: u32) -> String {
    let n_atoms = (atoms as usize).clamp(2, 100);
    let level = level.clamp(1, 8);
    let base = SplitMix64::new(seed as u64);
    let mut arng = base.split(11);
    let mut mrng = base.split(12);
    let pts: Vec<Vec<f64>> = (0..n_atoms).map(|_| vec![arng.next_f64()]).collect();
    let masses: Vec<f64> = (0..n_atoms).map(|_| mrng.next_range(0.5, 1.5)).collect();
    let model = match build_dyadic(1, level, pts, masses, &SRule::Seeded {
        seed: seed as u64 ^ 0xD7AD,
        lo: 0.02,
        hi: 0.3,
    }) {
        Ok(m) => m,
        Err(e) => return err_json(&e.to_string()),
    };
    let kernel = model.kernel();
    let omega = model.measure();
    let norm_t = match operator_norm(&kernel, &omega) {
        Ok(v) => v,
        Err(e) => return err_json(&e.to_string()),
    };
    let carleson = model.carleson_norm();

    let mut ultra_ok = true;
    let d = |a: usize, b: usize| 1.0 / kernel.entry(a, b);
    'outer: for i in 0..n_atoms {
        for j in 0..n_atoms {
            for z in 0..n_atoms {
                if d(i, j) > d(i, z).max(d(z, j)) {
                    ultra_ok = false;
                    break 'outer;
                }
            }
        }
    }

    serde_json::to_string(&DyadicDemo {
        n_atoms,
        level,
        carleson_norm: carleson,
        norm_t,
        norm_over_carleson: norm_t / carleson,
        ultra_metric_ok: ultra_ok,
        cubes: model
            .cube_summaries()
            .into_iter()
            .map(|(gen, mass, s)| CubeRow { gen, mass, s })
            .collect(),
    })
    .unwrap_or_else(|e| err_json(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_demo_produces_passing_json() {
        let text = certificate_demo(30, 7, 0.6);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("error").is_none(), "{text}");
        assert_eq!(v["lower_pass"], true);
        assert_eq!(v["upper_pass"], true);
        assert_eq!(v["pairs"].as_array().unwrap().len(), 30 * 29 / 2);
    }

    #[test]
    fn norm_sweep_is_monotone_in_c_final() {
        let text = norm_sweep_demo(16, 3, 8);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 8);
        let mut last = f64::NEG_INFINITY;
        for row in rows {
            let lc = row["log10_c_final"].as_f64().unwrap();
            assert!(lc >= last);
            last = lc;
        }
    }

    #[test]
    fn dyadic_demo_sandwich_holds() {
        let text = dyadic_demo(25, 4, 11);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["ultra_metric_ok"], true);
        let ratio = v["norm_over_carleson"].as_f64().unwrap();
        assert!((1.0 - 1e-10..=4.0 + 1e-10).contains(&ratio));
    }

    #[test]
    fn demo_output_is_deterministic() {
        assert_eq!(certificate_demo(20, 5, 0.5), certificate_demo(20, 5, 0.5));
    }
}
