//! Ten-seed pilot of the scenario experiments whose thresholds the
//! acceptance suite pins. Run with
//! `cargo run --release -p anchorite --example pilot [clouds|walkers|theorem1]`;
//! `walkers` takes an optional step sigma.

#[path = "../tests/common/mod.rs"]
mod common;

use common::*;

use anchorite::fields::RandomWalkers;
use anchorite::FieldModel;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let section = args.first().map(String::as_str);
    let seeds: Vec<u64> = (0..10).collect();
    if section.is_none() || section == Some("clouds") {
        clouds(&seeds);
    }
    if section.is_none() || section == Some("walkers") {
        let sigma = args.get(1).map_or(0.02, |s| s.parse().expect("step sigma"));
        walker_section(&seeds, sigma);
    }
    if section.is_none() || section == Some("theorem1") {
        theorem1(&seeds);
    }
}

fn clouds(seeds: &[u64]) {
    println!("seed,model,spearman,recall,localized,interior_median,boundary_median");
    for &s in seeds {
        for (name, model) in [("round", round_clouds()), ("half_plane", half_plane())] {
            let r = run(scenario(s, model, 0));
            let rep = end_to_end(&r);
            println!(
                "{s},{name},{:.4},{:.4},{:.4},{:.4},{:.4}",
                all_pairs_spearman(&r, false),
                recall(&r),
                rep.n_localized as f64 / rep.n_nodes as f64,
                rep.interior_median_error.unwrap_or(f64::NAN),
                rep.boundary_median_error.unwrap_or(f64::NAN),
            );
        }
    }
}

fn walker_section(seeds: &[u64], sigma: f64) {
    let mut m = RandomWalkers::new(10, 0.13);
    m.step_sigma = sigma;
    println!("step_sigma = {sigma}");
    println!("seed,walker_high,walker_low,high_mean,low_mean,self_lagged_high,self_lagged_low,recall");
    for &s in seeds {
        let r = run(scenario(s, FieldModel::RandomWalkers(m.clone()), 2));
        let (hi, lo) = occupation_nodes(&r);
        println!(
            "{s},{:.4},{:.4},{:.4},{:.4},{:.5},{:.5},{:.4}",
            fixed_node_spearman(&r, hi, true),
            fixed_node_spearman(&r, lo, true),
            r.cm.mean(hi),
            r.cm.mean(lo),
            self_lagged(&r, hi),
            self_lagged(&r, lo),
            recall(&r),
        );
    }
}

fn theorem1(seeds: &[u64]) {
    println!("seed,median_500,median_1000,median_2000,lost");
    for &s in seeds {
        let m = theorem1_medians(s);
        println!(
            "{s},{:.5},{:.5},{:.5},{}",
            m[0].0,
            m[1].0,
            m[2].0,
            m.iter().map(|x| x.1).sum::<usize>()
        );
    }
}
