use pathstable::hydro::{build_river_problem, CascadeModel};
use pathstable::*;
use std::time::Instant;

fn main() {
    let model = CascadeModel::reference(1).unwrap();
    let p = build_river_problem(1, &model).unwrap();
    let t0 = Instant::now();
    let rep = solve_bnb(&p, &BnbConfig::default()).unwrap();
    println!(
        "bnb 1w: delta {} obj {:.8} visited {} failed {} res {:.2e} in {:?}",
        rep.delta_bitstring(), rep.objective, rep.visited_nodes, rep.failed_nodes, rep.kkt_residual, t0.elapsed()
    );

    let model2 = CascadeModel::reference(2).unwrap();
    let p2 = build_river_problem(2, &model2).unwrap();
    let t0 = Instant::now();
    let rep2 = solve_bnb(&p2, &BnbConfig::default()).unwrap();
    println!(
        "bnb 2w: delta {} obj {:.8} visited {} failed {} res {:.2e} in {:?}",
        rep2.delta_bitstring(), rep2.objective, rep2.visited_nodes, rep2.failed_nodes, rep2.kkt_residual, t0.elapsed()
    );
}
