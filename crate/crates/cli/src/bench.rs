//! Scaling benchmark: public-info size and key-management operation
//! timings across group sizes, with a linear fit on the size column.

use std::collections::BTreeSet;
use std::time::Instant;

use gridkey_core::bgkm::{self, Backend, GroupState, MeterId, SecurityParams};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub pubinfo_bytes: usize,
    pub keygen_ms: f64,
    pub keyder_us: f64,
    pub rekey_ms: f64,
}

/// Least-squares linear fit `y = a + b*x`; returns the coefficient of
/// determination. A perfect fit (or a degenerate constant input) is 1.0.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 1.0;
    }
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return 1.0;
    }
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - (a + b * p.0)).powi(2)).sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

/// Measure one group size: median key generation, single-member
/// derivation, and re-key times over `trials`, plus the serialized
/// public-info size.
fn bench_size(backend: Backend, n: usize, trials: u32, seed: u64) -> BenchRow {
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&seed.to_be_bytes());
    seed_bytes[8..16].copy_from_slice(&(n as u64).to_be_bytes());
    let mut state =
        GroupState::setup(SecurityParams::default(), backend, seed_bytes).expect("valid params");
    let members: BTreeSet<MeterId> = (0..n).map(|i| MeterId(format!("m{i:05}"))).collect();
    for id in &members {
        state.sec_gen(id).expect("enroll");
    }
    let probe = members.iter().next().unwrap().clone();

    let mut keygen = Vec::new();
    let mut keyder = Vec::new();
    let mut rekey = Vec::new();
    let mut pubinfo_bytes = 0;
    for _ in 0..trials.max(1) {
        let t0 = Instant::now();
        let (key, info) = state.key_gen(&members).expect("key_gen");
        keygen.push(t0.elapsed().as_secs_f64() * 1e3);
        pubinfo_bytes = info.to_bytes().len();

        let secret = state.secret(&probe).unwrap().clone();
        let t1 = Instant::now();
        let derived = bgkm::key_der(&secret, &info, &state.params).expect("key_der");
        keyder.push(t1.elapsed().as_secs_f64() * 1e6);
        assert_eq!(derived, key);

        let t2 = Instant::now();
        state.re_key(&members).expect("re_key");
        rekey.push(t2.elapsed().as_secs_f64() * 1e3);
    }
    BenchRow {
        n,
        pubinfo_bytes,
        keygen_ms: median(keygen),
        keyder_us: median(keyder),
        rekey_ms: median(rekey),
    }
}

pub fn run(backend: Backend, sizes: &[usize], trials: u32, seed: u64) -> (Vec<BenchRow>, f64) {
    let rows: Vec<BenchRow> = sizes
        .iter()
        .map(|&n| bench_size(backend, n, trials, seed))
        .collect();
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.n as f64, r.pubinfo_bytes as f64))
        .collect();
    (rows, linear_fit_r2(&points))
}

pub fn render(backend: Backend, rows: &[BenchRow], r2: f64) -> String {
    let mut out = format!("backend={}\n", backend.name());
    out.push_str("n\tpubinfo_bytes\tkeygen_ms\tkeyder_us\trekey_ms\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\n",
            r.n, r.pubinfo_bytes, r.keygen_ms, r.keyder_us, r.rekey_ms
        ));
    }
    out.push_str(&format!("fit\tpubinfo_bytes~n\tr2={r2:.6}\n"));
    out
}
