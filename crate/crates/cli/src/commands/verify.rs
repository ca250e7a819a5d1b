use std::process::ExitCode;

use csfair::gaussian_oracle::{verify_cs_kl_inequality, verify_quadrature_agreement, INEQUALITY_SLACK};

use super::parse_list;
use crate::args::VerifyArgs;
use crate::error::CliResult;

/// KDE width of the quadrature suite.
const QUADRATURE_SIGMA: f64 = 0.5;
const QUADRATURE_POINTS: usize = 4096;
const QUADRATURE_TOLERANCE: f64 = 1e-3;

pub fn run(args: VerifyArgs) -> CliResult<ExitCode> {
    let dims: Vec<usize> = parse_list(&args.dims, "dims")?;
    let ineq = verify_cs_kl_inequality(args.trials, &dims, args.seed)?;
    println!(
        "cs <= min(kl): {} pairs, max violation {:.3e} (slack {INEQUALITY_SLACK:.0e})",
        ineq.trials, ineq.max_violation
    );
    let quad = verify_quadrature_agreement(args.quadrature_instances, QUADRATURE_SIGMA, QUADRATURE_POINTS, args.seed)?;
    println!(
        "estimator vs quadrature: {} instances, max abs error {:.3e} (tolerance {QUADRATURE_TOLERANCE:.0e})",
        quad.instances, quad.max_abs_error
    );

    let mut ok = true;
    if !ineq.passed() {
        ok = false;
        if let Some(w) = &ineq.worst {
            println!("violating instance:");
            println!("  p: mean {:?} covariance {:?}", w.p.mean().as_slice(), w.p.covariance().as_slice());
            println!("  q: mean {:?} covariance {:?}", w.q.mean().as_slice(), w.q.covariance().as_slice());
            println!("  cs {} kl(p;q) {} kl(q;p) {}", w.cs, w.kl_pq, w.kl_qp);
        }
    }
    if quad.max_abs_error > QUADRATURE_TOLERANCE {
        ok = false;
        if let Some((k, est, q)) = quad.worst {
            println!("quadrature mismatch on instance {k}: estimator {est}, quadrature {q}");
        }
    }
    println!("{}", if ok { "verification passed" } else { "verification FAILED" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
