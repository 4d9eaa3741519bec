//! Builds a small finite world by hand, computes every hypothesis's exact
//! risks and shows the posterior chain at each input.

use pretext_eval::worlds::{decompose_posterior, exact_risks, verify_bound, FiniteWorld};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three inputs, two labels; input 2 is ambiguous
    let world = FiniteWorld::new(
        3,
        2,
        vec![0.3, 0.0, 0.0, 0.3, 0.2, 0.2],
        vec![vec![true, false], vec![false, true], vec![true, true]],
        vec![vec![true, false], vec![false, true], vec![true, false]],
    )?;
    println!("reliable: {}, complete: {}", world.is_reliable(), world.is_complete());
    for i in 0..world.hypothesis_count()? {
        let h = world.hypothesis(i);
        let r = exact_risks(&world, &h)?;
        println!(
            "h = {h:?}: target {:.3} <= bound {:.3} (unlearnable {:.3}, unreliable {:.3}, incomplete {:.3})",
            r.r_target,
            r.product_bound(),
            r.r_unlearnable,
            r.r_unreliable,
            r.r_incomplete
        );
    }
    // the chain product matches p(y|x) only under conditional independence
    for x in 0..3 {
        for y in 0..2 {
            let d = decompose_posterior(&world, x, y)?;
            println!("p(y={y}|x={x}) = {:.3}, chain product {:.3}", d.posterior, d.product);
        }
    }
    println!("violations: {}", verify_bound(&world)?.total_violations());
    Ok(())
}
