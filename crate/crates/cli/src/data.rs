//! Dataset flags: synthetic generators or IDX files on disk.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use axsnn_core::{rasterize, DeskData, Error, Image, RasterSpec, Result, TrainData};

// `load_idx` pairs the two files and validates matching lengths.
use axsnn_core::codec::load_idx;

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum DataSource {
    /// Synthetic images when the run is image-based, synthetic event
    /// streams when it is neuromorphic.
    Auto,
    /// Class-separable random images.
    SyntheticImages,
    /// Synthetic gesture event streams.
    SyntheticStreams,
    /// IDX image and label files (see --train-images and friends).
    Idx,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Where the labeled dataset comes from.
    #[arg(long, value_enum, default_value = "auto")]
    pub data: DataSource,

    /// IDX training images (required with --data idx).
    #[arg(long, value_name = "FILE")]
    pub train_images: Option<PathBuf>,
    /// IDX training labels (required with --data idx).
    #[arg(long, value_name = "FILE")]
    pub train_labels: Option<PathBuf>,
    /// IDX test images (required with --data idx).
    #[arg(long, value_name = "FILE")]
    pub test_images: Option<PathBuf>,
    /// IDX test labels (required with --data idx).
    #[arg(long, value_name = "FILE")]
    pub test_labels: Option<PathBuf>,

    /// Synthetic training-set size.
    #[arg(long, default_value_t = 256)]
    pub train_count: usize,
    /// Synthetic test-set size.
    #[arg(long, default_value_t = 128)]
    pub test_count: usize,
    /// Synthetic image height and width.
    #[arg(long, default_value_t = 8)]
    pub image_size: usize,
    /// Number of classes in the synthetic task.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Events per synthetic gesture stream.
    #[arg(long, default_value_t = 160)]
    pub events: usize,
    /// Seed for synthetic data generation.
    #[arg(long, default_value_t = 7)]
    pub data_seed: u64,
}

impl DataArgs {
    /// Materialize the dataset; `neuromorphic` resolves the `auto` source.
    pub fn build(&self, neuromorphic: bool) -> Result<DeskData> {
        let source = match self.data {
            DataSource::Auto if neuromorphic => DataSource::SyntheticStreams,
            DataSource::Auto => DataSource::SyntheticImages,
            explicit => explicit,
        };
        match source {
            DataSource::SyntheticImages => DeskData::synthetic_images(
                self.train_count,
                self.test_count,
                self.image_size,
                self.image_size,
                self.classes,
                self.data_seed,
            ),
            DataSource::SyntheticStreams => DeskData::synthetic_streams(
                self.train_count,
                self.test_count,
                self.classes,
                self.events,
                self.data_seed,
            ),
            DataSource::Idx => self.load_idx(),
            DataSource::Auto => unreachable!("resolved above"),
        }
    }

    fn load_idx(&self) -> Result<DeskData> {
        let path = |p: &Option<PathBuf>, flag: &str| {
            p.clone()
                .ok_or_else(|| Error::Config(format!("--data idx requires --{flag}")))
        };
        let train = load_labeled_idx(
            &path(&self.train_images, "train-images")?,
            &path(&self.train_labels, "train-labels")?,
        )?;
        let test = load_labeled_idx(
            &path(&self.test_images, "test-images")?,
            &path(&self.test_labels, "test-labels")?,
        )?;
        Ok(DeskData::Images { train, test })
    }
}

/// Load an IDX image file and its label file into a labeled set.
pub fn load_labeled_idx(images: &PathBuf, labels: &PathBuf) -> Result<Vec<(Image, usize)>> {
    Ok(crate::annotate(load_idx(images, labels), images)?
        .into_iter()
        .map(|(img, l)| (img, l as usize))
        .collect())
}

/// One split of a dataset as trainer input. Event streams are rasterized
/// into `time_steps` bins over the dataset-wide time window.
pub fn to_train_data(data: &DeskData, test: bool, time_steps: usize) -> Result<TrainData> {
    match data {
        DeskData::Images { train, test: te } => {
            Ok(TrainData::Images(if test { te } else { train }.clone()))
        }
        DeskData::Streams { train, test: te } => {
            let window = data
                .raster_window()
                .ok_or_else(|| Error::Config("event dataset is empty".into()))?;
            let spec = RasterSpec::new(time_steps, window)?;
            let encoded = if test { te } else { train }
                .iter()
                .map(|(s, label)| rasterize(s, &spec).map(|r| (r.stacked(), *label)))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainData::Spikes(encoded))
        }
    }
}
