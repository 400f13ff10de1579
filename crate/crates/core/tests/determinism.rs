use clot_core::resampling::{bootstrap_replicates, WeightCentering};
use clot_core::sim::{null_distribution_experiment, sample_scenario, scenario};
use clot_core::{
    bootstrap_distribution, h_summary, nte_estimate, permutation_distribution, variance_components, KernelSpec,
};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn max_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4).max(4)
}

#[test]
fn replicate_sets_do_not_depend_on_thread_count() {
    let s = scenario("gaussian-shift").unwrap();
    let p = sample_scenario(&s, 120, 5).unwrap();
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let run = || {
        (
            bootstrap_distribution(&spec, &p, 300, 9).unwrap(),
            permutation_distribution(&spec, &p, 300, 9).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let many = in_pool(max_threads(), run);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.0.values), bits(&many.0.values));
    assert_eq!(bits(&one.1.values), bits(&many.1.values));
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let s = scenario("gaussian-moderate").unwrap();
    let p = sample_scenario(&s, 400, 6).unwrap();
    let spec = KernelSpec::gaussian(1.0).unwrap();
    let run = || {
        let sum = h_summary(&spec, &p).unwrap();
        let v = variance_components(&sum).unwrap();
        let reps = bootstrap_replicates(&sum, 150, 2, WeightCentering::Unit).unwrap();
        (nte_estimate(&sum).to_bits(), v.sigma_hat.to_bits(), reps)
    };
    assert_eq!(in_pool(1, run), in_pool(max_threads(), run));
}

#[test]
fn experiment_tables_do_not_depend_on_thread_count() {
    let s = scenario("gaussian-null-2d").unwrap();
    let run = || null_distribution_experiment(&s, 40, 17).unwrap();
    assert_eq!(in_pool(1, run), in_pool(max_threads(), run));
}
