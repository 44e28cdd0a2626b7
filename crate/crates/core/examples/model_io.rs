//! Writes a model to the `.psfn` format, reads it back and shows what the
//! reader reports for damaged files.

use psfnet::ann::{deserialize, serialize, train, TrainConfig};
use psfnet::synth::{training_dataset, SamplingGrid, SynthLensSpec};

fn main() -> psfnet::Result<()> {
    let grid = SamplingGrid::new(vec![-10.0, 0.0, 10.0], vec![0.0, 1.5, 3.0], vec![0.0, 90.0, 180.0, 270.0])?;
    let data = training_dataset(&SynthLensSpec::default(), &[grid], 13, 6.5)?;
    let cfg = TrainConfig {
        hidden_size: 8,
        max_epochs: 50,
        ..Default::default()
    };
    let (model, _) = train(&data, &cfg)?;

    let bytes = serialize(&model);
    println!("{} parameters, {} bytes, layers {:?}", model.parameter_count(), bytes.len(), model.layer_sizes());
    assert_eq!(deserialize(&bytes)?, model);

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    println!("bad magic: {}", deserialize(&bad_magic).unwrap_err());
    println!("truncated: {}", deserialize(&bytes[..bytes.len() / 2]).unwrap_err());
    Ok(())
}
