//! Train ERM and IRM on the synthetic shift benchmark and compare their
//! accuracy and fairness on the reversed test environment.
//!
//! ```sh
//! cargo run --release --example shift
//! ```

use irmkit::envsynth::{default_specs, synth_benchmark};
use irmkit::harness::make_search_data;
use irmkit::metrics::evaluate;
use irmkit::objective::Mode;
use irmkit::trainer::{train, HyperParams};

fn main() -> irmkit::Result<()> {
    let envs = synth_benchmark(2000, 8, 0.25, &default_specs(), 7)?;
    let data = make_search_data(&envs, 0.8, 11)?;

    for mode in [Mode::Erm, Mode::Irm] {
        let hp = HyperParams {
            learning_rate: 1e-3,
            iterations: 2000,
            l2: 1e-4,
            penalty_lambda: 1e4,
            anneal_iters: 100,
            mode,
            rescale: true,
        };
        let model = train(&data.train_envs, &hp, 0)?;
        let ind = evaluate(&model, &data.ind)?;
        let ood = evaluate(&model, &data.ood)?;
        println!(
            "{mode}: InD accuracy {:.3} | OOD accuracy {:.3}, dDP {:.3}, dEO {:.3}",
            ind.accuracy, ood.accuracy, ood.delta_dp, ood.delta_eo
        );
    }
    Ok(())
}
