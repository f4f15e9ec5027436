use mrh::files::{read_chain_file, read_info_file, write_chain_file, CHAIN_FILE, INFO_FILE};
use mrh::numfmt::round_g6;
use mrh::posterior::summarize;
use mrh::sampler::run_mcmc;
use mrh::sim::{simulate_strata, PiecewiseHazard};
use mrh::{McmcConfig, ModelSpec, MrhError, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fitted(dir: &std::path::Path) -> (mrh::SurvivalDataset, mrh::FitResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let hazards = [PiecewiseHazard::constant(0.4), PiecewiseHazard::new(vec![0.0, 1.5], vec![0.2, 0.8]).unwrap()];
    let data = simulate_strata(&hazards, 40, 3.0, 0.1, &mut rng).unwrap();
    let mut spec = ModelSpec::for_data(&data, 3, 3.0);
    spec.prune.enabled = true;
    let config = McmcConfig { max_iter: 8000, progress: false, ..McmcConfig::default() };
    let result = run_mcmc(&data, &spec, &config, dir).unwrap();
    (data, result)
}

#[test]
fn written_chains_read_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (_, result) = fitted(dir.path());
    let back = read_chain_file(&dir.path().join(CHAIN_FILE), Some(3)).unwrap();
    assert_eq!(back.names(), result.store.names());
    assert_eq!(back.n_rows(), result.store.n_rows());
    for (a, b) in back.rows().zip(result.store.rows()) {
        assert_eq!(a, b);
        assert!(a.iter().zip(b).all(|(x, y)| round_g6(*x) == round_g6(*y)));
    }
    let info = read_info_file(&dir.path().join(INFO_FILE)).unwrap();
    assert_eq!(info, result.info);
}

#[test]
fn summary_from_file_equals_in_process_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (data, result) = fitted(dir.path());
    // Pruning can remove whole levels, so the depth is not implied by the columns.
    let store = read_chain_file(&dir.path().join(CHAIN_FILE), Some(3)).unwrap();
    let grid = TimeGrid::new(3, 3.0).unwrap();
    let from_file = summarize(&store, &grid, 0.05, data.labels()).unwrap();
    assert_eq!(from_file, result.summary);
    assert_eq!(from_file.to_string(), result.summary.to_string());
}

#[test]
fn malformed_chain_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert!(matches!(read_chain_file(&empty, None), Err(MrhError::Format(_))));
    let header_only = dir.path().join("header.txt");
    std::fs::write(&header_only, "H00_1\tRmp1.0_1\n").unwrap();
    assert!(matches!(read_chain_file(&header_only, None), Err(MrhError::Format(_))));
    let (_, result) = fitted(&dir.path().join("fit"));
    let empty_store = result.store.tail(0);
    assert!(write_chain_file(&empty_store, &dir.path().join("none.txt")).is_err());
}
