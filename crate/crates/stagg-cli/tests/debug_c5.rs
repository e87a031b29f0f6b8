use stagg_cli::config::SynthSection;
use stagg_cli::synth::generate;
use stagg_core::aggregate::TemporalAggregation;
use stagg_opt::branch_bound::{solve_milp, SolverOptions};
use stagg_opt::gep::{build_gep, NodeGrouping};
use stagg_opt::milp::SolveStatus;
use stagg_opt::ub::{select_two_days, upper_bound};

#[test]
#[ignore]
fn debug_seed_11() {
    let cfg = SynthSection {
        power_nodes: 4,
        gas_nodes: 2,
        days: 6,
        hours_per_day: 3,
        communities: 2,
        archetypes: 2,
        noise: 0.0,
        seed: 11,
        candidate_pipeline: false,
    };
    let output = generate(&cfg);
    let instance = &output.instance;
    let built = build_gep(instance).unwrap();
    let exact = solve_milp(&built.problem, &SolverOptions::with_gap(0.0));
    assert_eq!(exact.status, SolveStatus::Optimal);
    println!("exact optimum {}", exact.objective);
    for n in 0..4 {
        for i in 0..2 {
            println!(
                "  exact xop[{},{}] = {} est {} dec {}",
                n, i,
                exact.value_of(&built.problem, &format!("xop[{},{}]", n, i)).unwrap(),
                exact.value_of(&built.problem, &format!("xest[{},{}]", n, i)).unwrap(),
                exact.value_of(&built.problem, &format!("xdec[{},{}]", n, i)).unwrap()
            );
        }
    }
    let temporal = TemporalAggregation::identity(instance.days);
    println!("two days {:?}", select_two_days(instance, &temporal));
    let report = upper_bound(
        instance,
        &NodeGrouping::identity(instance),
        &temporal,
        &SolverOptions::with_gap(0.01),
    )
    .unwrap();
    println!(
        "step1 {} (gap {}) step2 {} (gap {}) ub {}",
        report.step1_objective, report.step1_gap, report.step2_objective, report.step2_gap, report.ub
    );
    for p in &report.node_investments.plants {
        println!("  step2 plan {:?}", p);
    }
    for s in &report.node_investments.storage {
        println!("  step2 storage {:?}", s);
    }
    println!("gen {:?}", report.generation_by_plant);
}
