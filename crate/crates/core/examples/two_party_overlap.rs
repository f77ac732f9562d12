// Two parties holding private states estimate `|⟨ψ|φ⟩|²` over TCP; a
// coordinator only ever sees Pauli samples and single-entry answers.
//
// ```bash
// cargo run --release --example two_party_overlap
// ```

use asq_lab::experiments::loopback_overlap;
use asq_lab::numeric::seeded_rng;
use asq_lab::pauli::states::low_magic_pair;
use asq_lab::pauli::{distributed_overlap, OverlapSeeds};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(9);
    let (psi, phi) = low_magic_pair(3, &mut rng);
    let truth = psi.inner(&phi)?.norm_sqr();
    let (eps, root, session) = (0.2, 9, 0);
    let remote = loopback_overlap(&psi, &phi, eps, root, session)?;
    let local = distributed_overlap(&psi, &phi, eps, OverlapSeeds::for_session(root, session))?;
    println!(
        "overlap {truth:.4}: tcp {:.4}, in-process {:.4}, kappa {:.3}, messages to alice/bob {:?}",
        remote.report.estimate.re, local.estimate.re, remote.kappa, remote.messages
    );
    assert_eq!(remote.report.estimate, local.estimate);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
