use mixbp::io;
use mixbp::proximal::{run_proximal, ProximalFlavor, ProximalOptions};
use mixbp::energy::bethe_weights;
use mixbp::mp::{run_mixed_product, SolverOptions};

fn main() {
    for t in 0..3 {
        let m = io::gen_hmm(20, 1.0, 1000 + t).unwrap();
        let r = run_proximal(&m, ProximalFlavor::Trw, &ProximalOptions { seed: t, ..Default::default() }).unwrap();
        println!("hmm trw: converged={} iters={} delta={:.3e} bound={:?}", r.converged, r.iterations, r.residuals.message_change, r.bound);
    }
    // integrality count on 60 trials
    let mut conv = 0; let mut integral = 0;
    for t in 0..60u64 {
        let m = io::gen_hmm(20, 1.0, 2000 + t).unwrap();
        let w = bethe_weights(&m, 0.0);
        let rep = run_mixed_product(&m, &w, &SolverOptions { seed: t, ..Default::default() }).unwrap();
        if rep.converged {
            conv += 1;
            let b = rep.node_beliefs.as_ref().unwrap();
            let ok = m.max_nodes().iter().all(|&i| {
                let log_b: Vec<f64> = b[i].iter().map(|&p| if p > 0.0 { p.ln() / 1e-4 } else { f64::NEG_INFINITY }).collect();
                let mx = log_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = log_b.iter().map(|&v| (v - mx).exp()).sum();
                1.0 / z >= 1.0 - 1e-6
            });
            if ok { integral += 1; }
            else if t < 10 {
                // print the worst node gap
                let mut worst = f64::INFINITY;
                for &i in &m.max_nodes() {
                    let mut v: Vec<f64> = b[i].clone(); v.sort_by(|a,b| b.partial_cmp(a).unwrap());
                    worst = worst.min(v[0].ln() - v[1].ln());
                }
                println!("trial {}: converged but not integral; min log-gap {:.3e}", t, worst);
            }
        }
    }
    println!("converged={} integral={}", conv, integral);
}
