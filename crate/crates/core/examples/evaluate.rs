//! Scores PSF sources against a dataset: the synthetic lens against its own
//! samples, then a quickly trained network.

use psfnet::ann::{train, TrainConfig};
use psfnet::metrics::{evaluate, EvalSummary};
use psfnet::synth::{training_dataset, SamplingGrid, SynthKernel, SynthLensSpec};

fn main() -> psfnet::Result<()> {
    let lens = SynthLensSpec::default();
    let data = training_dataset(&lens, &[SamplingGrid::series_a()], 13, 6.5)?;

    let exact = SynthKernel::new(lens, 13, 6.5)?;
    let cfg = TrainConfig {
        hidden_size: 32,
        max_epochs: 300,
        ..Default::default()
    };
    let (model, _) = train(&data, &cfg)?;

    println!("source,{}", EvalSummary::CSV_HEADER);
    println!("synthetic lens,{}", evaluate(&exact, &data)?.csv_row());
    println!("network H=32,{}", evaluate(&model, &data)?.csv_row());
    Ok(())
}
