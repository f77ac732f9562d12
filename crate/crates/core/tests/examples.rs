//! Runs every example as a test.

macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(exact_access, exact_access_runs, "exact_access.rs");
example!(relative_estimate, relative_estimate_runs, "relative_estimate.rs");
example!(linear_combination, linear_combination_runs, "linear_combination.rs");
example!(inner_products, inner_products_runs, "inner_products.rs");
example!(perturbed_sampling, perturbed_sampling_runs, "perturbed_sampling.rs");
example!(tomography, tomography_runs, "tomography.rs");
example!(column_sampling, column_sampling_runs, "column_sampling.rs");
example!(magic_report, magic_report_runs, "magic_report.rs");
example!(two_party_overlap, two_party_overlap_runs, "two_party_overlap.rs");
example!(experiment_runner, experiment_runner_runs, "experiment_runner.rs");
