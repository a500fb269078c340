macro_rules! example_test {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $module() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example_test!(feature_extraction, "feature_extraction.rs");
example_test!(tokenize_synthetic, "tokenize_synthetic.rs");
example_test!(model_selection, "model_selection.rs");
example_test!(consistency, "consistency.rs");
example_test!(movement_quality, "movement_quality.rs");
example_test!(token_statistics, "token_statistics.rs");
