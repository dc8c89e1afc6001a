use super::MonthlySeries;
use crate::error::{PluviaError, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// How windows treat months dropped during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    /// The cleaned series is treated as contiguous; windows may span gaps.
    #[default]
    Contiguous,
    /// Windows whose months (inputs and target) are not consecutive are dropped.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `w x 1`, raw values divided by the dataset scale.
    pub input: Tensor,
    /// Next-month value in millimetres.
    pub target: f64,
    /// Index of the target in the source series.
    pub target_index: usize,
    /// Raw values following each input step (`values[i-w+1..=i]`); the last
    /// entry is `target`. Used for whole-sequence loss.
    pub next_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    pub window_size: usize,
    pub scale: f64,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Split by target membership: targets before `boundary` train.
    pub fn partition(self, boundary: usize) -> (WindowedDataset, WindowedDataset) {
        let (train, test): (Vec<_>, Vec<_>) =
            self.windows.into_iter().partition(|w| w.target_index < boundary);
        let rebuild = |windows| WindowedDataset {
            windows,
            window_size: self.window_size,
            scale: self.scale,
        };
        (rebuild(train), rebuild(test))
    }
}

/// One window per target index `i` in `[w, n)`: inputs are
/// `values[i-w..i] / scale`, the target is `values[i]` in millimetres.
pub fn make_windows(series: &MonthlySeries, window_size: usize, scale: f64) -> Result<WindowedDataset> {
    make_windows_with(series, window_size, scale, GapPolicy::Contiguous)
}

pub fn make_windows_with(
    series: &MonthlySeries,
    window_size: usize,
    scale: f64,
    policy: GapPolicy,
) -> Result<WindowedDataset> {
    if window_size == 0 {
        return Err(PluviaError::Parameter("window size must be at least 1".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(PluviaError::Parameter(format!("scale must be positive, got {scale}")));
    }
    let values = series.values();
    let n = values.len();
    let mut windows = Vec::with_capacity(n.saturating_sub(window_size));
    for i in window_size..n {
        if policy == GapPolicy::Strict && !is_consecutive(series, i - window_size, i) {
            continue;
        }
        let input = values[i - window_size..i].iter().map(|v| v / scale).collect();
        windows.push(Window {
            input: Tensor::new(vec![window_size, 1], input)?,
            target: values[i],
            target_index: i,
            next_values: values[i + 1 - window_size..=i].to_vec(),
        });
    }
    Ok(WindowedDataset {
        windows,
        window_size,
        scale,
    })
}

fn is_consecutive(series: &MonthlySeries, from: usize, to: usize) -> bool {
    series.points[from..=to]
        .windows(2)
        .all(|p| p[1].ordinal() - p[0].ordinal() == 1)
}

/// Fisher-Yates permutation of the windows.
pub fn shuffle_windows(mut dataset: WindowedDataset, rng: &mut Rng) -> WindowedDataset {
    rng.shuffle(&mut dataset.windows);
    dataset
}
