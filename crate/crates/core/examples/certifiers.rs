//! Numeric certificates for the geometric hypotheses: the saddle graph
//! z = xy over x ≥ 0 is Whitney (a) at the y-axis but not normally flat,
//! while the rank strata of M²ˣ² are both.

use rand::SeedableRng;
use stratsmooth::strata::{self, FlatnessOptions, FrontierOptions, WhitneyOptions};
use stratsmooth::{catalog, Rng, Stratification};

fn report(a: &Stratification, rng: &mut Rng) -> stratsmooth::Result<()> {
    println!("{}", a.name());
    let fr = strata::check_frontier(a, 20, FrontierOptions::default(), rng)?;
    println!("  frontier            max {:.2e}  {}", fr.max_violation, verdict(fr.pass));
    for (l, m) in a.pairs() {
        let w = strata::check_whitney_a(a, l, m, 20, WhitneyOptions::default(), rng)?;
        let nf = strata::check_normal_flatness(a, l, m, 0.1, 20, FlatnessOptions::default(), rng)?;
        println!("  {:<10} whitney  max {:.2e}  {}", w.subject, w.max_violation, verdict(w.pass));
        println!("  {:<10} flatness max {:.2e}  {}", nf.subject, nf.max_violation, verdict(nf.pass));
        if let (false, Some(x)) = (nf.pass, &nf.witness) {
            println!("    witness {x:?}");
        }
    }
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn main() -> stratsmooth::Result<()> {
    let mut rng = Rng::seed_from_u64(6);
    report(&catalog::counterexample_stratification()?, &mut rng)?;
    report(&catalog::rank_stratification(2, 2)?, &mut rng)?;

    // P_L x versus P_L P_M x off the graph, L the y-axis
    let x = stratsmooth::Point::from_vec(vec![0.5, 0.0, 0.5]);
    let (pl, pm) = catalog::counterexample_projections(&x)?;
    println!("x = {:?}: P_L x = {:?}, P_M x = {:?}, P_L P_M x = {:?}", x.as_slice(), pl.as_slice(), pm.as_slice(), [0.0, pm[1], 0.0]);
    Ok(())
}
